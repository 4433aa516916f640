#include "brainparc/metrics.hpp"

#include "brainparc/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <vector>

namespace brainparc {

ContingencyTable contingency(const Parcellation& a, const Parcellation& b) {
    if (a.size() != b.size()) {
        throw InputError("parcellations differ in length: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    ContingencyTable t;
    t.total = a.size();
    t.row_totals.assign(static_cast<std::size_t>(a.k()), 0);
    t.col_totals.assign(static_cast<std::size_t>(b.k()), 0);

    std::vector<std::uint64_t> keys(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++t.row_totals[static_cast<std::size_t>(a[i] - 1)];
        ++t.col_totals[static_cast<std::size_t>(b[i] - 1)];
        keys[i] = (static_cast<std::uint64_t>(a[i]) << 32) | static_cast<std::uint32_t>(b[i]);
    }
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        t.cells.push_back({static_cast<int>(keys[i] >> 32), static_cast<int>(keys[i] & 0xffffffffu),
                           static_cast<std::uint64_t>(j - i)});
        i = j;
    }
    return t;
}

namespace {

double entropy(const std::vector<std::uint64_t>& totals, double n) {
    double h = 0.0;
    for (const auto c : totals) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

double nmi(const Parcellation& a, const Parcellation& b) {
    const auto t = contingency(a, b);
    if (t.total == 0) return 1.0;
    const auto n = static_cast<double>(t.total);
    const double ha = entropy(t.row_totals, n);
    const double hb = entropy(t.col_totals, n);
    if (ha + hb == 0.0) return 1.0;
    // one cell per non-empty row and column: identical up to relabeling
    const auto nonempty = [](const std::vector<std::uint64_t>& v) {
        return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](std::uint64_t c) { return c > 0; }));
    };
    if (t.cells.size() == nonempty(t.row_totals) && t.cells.size() == nonempty(t.col_totals)) return 1.0;
    std::vector<double> terms;
    terms.reserve(t.cells.size());
    for (const auto& c : t.cells) {
        const double pab = static_cast<double>(c.count) / n;
        const double pa = static_cast<double>(t.row_totals[static_cast<std::size_t>(c.a - 1)]) / n;
        const double pb = static_cast<double>(t.col_totals[static_cast<std::size_t>(c.b - 1)]) / n;
        terms.push_back(pab * std::log(pab / (pa * pb)));
    }
    // summed in sorted order so that nmi(a, b) == nmi(b, a) bit for bit
    std::sort(terms.begin(), terms.end());
    double mi = 0.0;
    for (const double v : terms) mi += v;
    return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double dice(const Parcellation& a, const Parcellation& b) {
    const auto t = contingency(a, b);
    if (t.total == 0) return 1.0;
    std::uint64_t common = 0, sa = 0, sb = 0;
    for (const auto& c : t.cells) common += c.count * c.count;
    for (const auto r : t.row_totals) sa += r * r;
    for (const auto c : t.col_totals) sb += c * c;
    return static_cast<double>(2 * common) / static_cast<double>(sa + sb);
}

double similarity(const Parcellation& a, const Parcellation& b, Metric metric) {
    return metric == Metric::nmi ? nmi(a, b) : dice(a, b);
}

Eigen::MatrixXd pairwise_similarity(std::span<const Parcellation> parcs, Metric metric) {
    const auto s = static_cast<Eigen::Index>(parcs.size());
    for (const auto& p : parcs) {
        if (p.size() != parcs.front().size()) throw InputError("parcellations differ in length");
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = i + 1; j < s; ++j) {
            const double v = similarity(parcs[static_cast<std::size_t>(i)], parcs[static_cast<std::size_t>(j)], metric);
            m(i, j) = v;
            m(j, i) = v;
        }
    return m;
}

void write_similarity_tsv(const Eigen::MatrixXd& m, std::ostream& out) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << '\t';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

}  // namespace brainparc
