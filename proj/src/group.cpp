#include "brainparc/group.hpp"

#include "brainparc/error.hpp"
#include "brainparc/rng.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace brainparc {

// ---- atlas ------------------------------------------------------------------

RelabelResult relabel_to_reference(const Parcellation& parc, const Parcellation& ref) {
    if (parc.size() != ref.size()) throw InputError("parcellation and reference differ in length");
    if (parc.k() != ref.k()) {
        throw InputError("k mismatch: parcellation has " + std::to_string(parc.k()) + " regions, reference has " +
                         std::to_string(ref.k()));
    }
    const auto k = static_cast<std::size_t>(parc.k());
    const auto table = contingency(parc, ref);
    std::vector<std::uint64_t> best(k, 0);
    RelabelResult out;
    out.mapping.resize(k);
    std::iota(out.mapping.begin(), out.mapping.end(), 1);  // empty regions keep their label
    // Cells are sorted by (a, b), so the first maximal cell per region has the
    // smaller reference label.
    for (const auto& c : table.cells) {
        const auto r = static_cast<std::size_t>(c.a - 1);
        if (c.count > best[r]) {
            best[r] = c.count;
            out.mapping[r] = c.b;
        }
    }
    std::vector<int> seen(k + 1, 0);
    for (const int m : out.mapping) ++seen[static_cast<std::size_t>(m)];
    out.degenerate = std::any_of(seen.begin() + 1, seen.end(), [](int s) { return s != 1; });

    std::vector<int> labels(parc.size());
    for (std::size_t i = 0; i < parc.size(); ++i) labels[i] = out.mapping[static_cast<std::size_t>(parc[i] - 1)];
    out.parcellation = Parcellation(std::move(labels), ref.k());
    return out;
}

Atlas majority_atlas(std::span<const Parcellation> parcs) {
    if (parcs.empty()) throw InputError("atlas needs at least one parcellation");
    const auto n = parcs.front().size();
    const int k = parcs.front().k();
    for (const auto& p : parcs) {
        if (p.size() != n) throw InputError("parcellations differ in length");
        if (p.k() != k) throw InputError("parcellations differ in k");
    }
    std::vector<int> labels(n);
    std::vector<double> confidence(n);
    std::vector<int> counts(static_cast<std::size_t>(k) + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& p : parcs) ++counts[static_cast<std::size_t>(p[i])];
        int mode = 1;
        for (int l = 2; l <= k; ++l)
            if (counts[static_cast<std::size_t>(l)] > counts[static_cast<std::size_t>(mode)]) mode = l;
        labels[i] = mode;
        confidence[i] = static_cast<double>(counts[static_cast<std::size_t>(mode)]) / static_cast<double>(parcs.size());
        for (const auto& p : parcs) counts[static_cast<std::size_t>(p[i])] = 0;
    }
    return {Parcellation(std::move(labels), k), std::move(confidence)};
}

void write_confidence(const Atlas& atlas, std::ostream& out) {
    out << "CONF " << atlas.confidence.size() << '\n';
    for (const double c : atlas.confidence) out << format_double(c) << '\n';
}

// ---- connectomes --------------------------------------------------------------

Connectome build_connectome(const SparseConnectivity& conn, const Parcellation& parc) {
    if (conn.size() != parc.size()) {
        throw InputError("parcellation covers " + std::to_string(parc.size()) + " voxels but connectivity has " +
                         std::to_string(conn.size()));
    }
    Connectome c{Eigen::MatrixXd::Zero(parc.k(), parc.k())};
    for (const auto& e : conn.upper()) {
        const int a = parc[e.i] - 1, b = parc[e.j] - 1;
        c.weights(a, b) += e.w;
        if (a != b) c.weights(b, a) += e.w;
    }
    return c;
}

Connectome read_connectome(std::istream& in) {
    std::string word;
    long long k = 0;
    if (!(in >> word) || word != "CONNECTOME" || !(in >> k) || k < 1) {
        throw InputError("expected header 'CONNECTOME k'");
    }
    Connectome c{Eigen::MatrixXd(k, k)};
    for (long long a = 0; a < k; ++a)
        for (long long b = 0; b < k; ++b)
            if (!(in >> c.weights(a, b))) throw InputError("truncated connectome matrix");
    if (!c.weights.isApprox(c.weights.transpose(), 1e-12) && !(c.weights - c.weights.transpose()).isZero(1e-12)) {
        throw InputError("connectome matrix is not symmetric");
    }
    return c;
}

Connectome read_connectome(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return read_connectome(in);
}

void write_connectome(const Connectome& c, std::ostream& out) {
    out << "CONNECTOME " << c.k() << '\n';
    for (Eigen::Index a = 0; a < c.weights.rows(); ++a) {
        for (Eigen::Index b = 0; b < c.weights.cols(); ++b) {
            if (b) out << ' ';
            out << format_double(c.weights(a, b));
        }
        out << '\n';
    }
}

// ---- t-tests ----------------------------------------------------------------

double student_t_two_sided_p(double t, double df) {
    if (std::isinf(t)) return 0.0;
    if (t == 0.0) return 1.0;
    return boost::math::ibeta(0.5 * df, 0.5, df / (df + t * t));
}

namespace {

struct Moments {
    double n = 0.0;
    double mean = 0.0;
    double var = 0.0;  // unbiased
};

Moments moments(std::span<const double> xs) {
    Moments m;
    m.n = static_cast<double>(xs.size());
    for (const double x : xs) m.mean += x;
    m.mean /= m.n;
    for (const double x : xs) m.var += (x - m.mean) * (x - m.mean);
    m.var /= (m.n - 1.0);
    return m;
}

}  // namespace

TTestResult two_sample_ttest(std::span<const double> xs, std::span<const double> ys, TTestKind kind) {
    if (xs.size() < 2 || ys.size() < 2) throw InputError("t-test needs at least two values per sample");
    const auto a = moments(xs);
    const auto b = moments(ys);
    TTestResult r;
    double se2 = 0.0;
    if (kind == TTestKind::pooled) {
        r.df = a.n + b.n - 2.0;
        const double pooled = ((a.n - 1.0) * a.var + (b.n - 1.0) * b.var) / r.df;
        se2 = pooled * (1.0 / a.n + 1.0 / b.n);
    } else {
        const double va = a.var / a.n, vb = b.var / b.n;
        se2 = va + vb;
        const double denom = va * va / (a.n - 1.0) + vb * vb / (b.n - 1.0);
        r.df = denom > 0.0 ? se2 * se2 / denom : a.n + b.n - 2.0;
    }
    const double diff = a.mean - b.mean;
    if (se2 <= 0.0) {
        if (diff == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
            r.infinite = true;
        }
        return r;
    }
    r.t = diff / std::sqrt(se2);
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

EdgewiseResult edgewise_ttests(std::span<const Connectome> group_a, std::span<const Connectome> group_b,
                               std::vector<double> thresholds, TTestKind kind) {
    if (group_a.size() < 2 || group_b.size() < 2) throw InputError("each group needs at least two connectomes");
    const int k = group_a.front().k();
    for (const auto& c : group_a)
        if (c.k() != k) throw InputError("connectomes differ in size");
    for (const auto& c : group_b)
        if (c.k() != k) throw InputError("connectomes differ in size");

    EdgewiseResult r;
    r.t = Eigen::MatrixXd::Zero(k, k);
    r.p = Eigen::MatrixXd::Ones(k, k);
    std::vector<double> xs(group_a.size()), ys(group_b.size());
    for (int a = 0; a < k; ++a)
        for (int b = a; b < k; ++b) {
            for (std::size_t s = 0; s < group_a.size(); ++s) xs[s] = group_a[s].weights(a, b);
            for (std::size_t s = 0; s < group_b.size(); ++s) ys[s] = group_b[s].weights(a, b);
            const auto tt = two_sample_ttest(xs, ys, kind);
            r.t(a, b) = r.t(b, a) = tt.t;
            r.p(a, b) = r.p(b, a) = tt.p;
        }
    for (const double thr : thresholds) r.maps.push_back((r.p.array() < thr).matrix());
    r.thresholds = std::move(thresholds);
    return r;
}

namespace {

std::string format_threshold(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(12) << v;
    auto str = s.str();
    if (str.find('.') != std::string::npos) {
        str.erase(str.find_last_not_of('0') + 1);
        if (str.back() == '.') str.pop_back();
    }
    return str;
}

}  // namespace

void write_edgewise_report(const EdgewiseResult& r, std::ostream& out) {
    out << "a\tb\tt\tp";
    for (const double thr : r.thresholds) out << "\tsig@" << format_threshold(thr);
    out << '\n';
    for (Eigen::Index a = 0; a < r.p.rows(); ++a)
        for (Eigen::Index b = a; b < r.p.cols(); ++b) {
            out << a + 1 << '\t' << b + 1 << '\t' << format_double(r.t(a, b)) << '\t' << format_double(r.p(a, b));
            for (const auto& m : r.maps) out << '\t' << (m(a, b) ? 1 : 0);
            out << '\n';
        }
}

GroupTestResult similarity_group_test(std::span<const Parcellation> group_a, std::span<const Parcellation> group_b,
                                      Metric metric, TTestKind kind) {
    if (group_a.size() < 3 || group_b.size() < 3) throw InputError("each group needs at least three parcellations");
    GroupTestResult r;
    for (std::size_t s = 0; s < group_a.size(); ++s)
        for (std::size_t t = s + 1; t < group_a.size(); ++t) r.within_a.push_back(similarity(group_a[s], group_a[t], metric));
    for (std::size_t s = 0; s < group_b.size(); ++s)
        for (std::size_t t = s + 1; t < group_b.size(); ++t) r.within_b.push_back(similarity(group_b[s], group_b[t], metric));
    for (const auto& a : group_a)
        for (const auto& b : group_b) r.across.push_back(similarity(a, b, metric));
    r.a_vs_across = two_sample_ttest(r.within_a, r.across, kind);
    r.b_vs_across = two_sample_ttest(r.within_b, r.across, kind);
    r.a_vs_b = two_sample_ttest(r.within_a, r.within_b, kind);
    return r;
}

void write_group_test(const GroupTestResult& r, std::ostream& out) {
    out << "comparison\tt\tp\tdf\n";
    const auto row = [&](const char* name, const TTestResult& t) {
        out << name << '\t' << format_double(t.t) << '\t' << format_double(t.p) << '\t' << format_double(t.df) << '\n';
    };
    row("within_A_vs_across", r.a_vs_across);
    row("within_B_vs_across", r.b_vs_across);
    row("within_A_vs_within_B", r.a_vs_b);
}

std::vector<std::pair<int, int>> select_top_edges(const Eigen::MatrixXd& p, std::size_t count) {
    if (count < 1) throw InputError("edge count must be >= 1");
    const auto k = static_cast<int>(p.rows());
    std::vector<std::pair<int, int>> entries;
    for (int a = 0; a < k; ++a)
        for (int b = a; b < k; ++b) entries.emplace_back(a, b);
    if (count > entries.size()) {
        throw InputError("requested " + std::to_string(count) + " edges but only " + std::to_string(entries.size()) +
                         " exist");
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [&](const auto& x, const auto& y) { return p(x.first, x.second) < p(y.first, y.second); });
    entries.resize(count);
    return entries;
}

// ---- classifier ---------------------------------------------------------------

namespace {

void check_labels(std::span<const int> labels) {
    bool pos = false, neg = false;
    for (const int y : labels) {
        if (y == 1) {
            pos = true;
        } else if (y == -1) {
            neg = true;
        } else {
            throw InputError("class labels must be +1 or -1");
        }
    }
    if (!pos || !neg) throw InputError("single-class labels");
}

double svm_objective(const Eigen::MatrixXd& z, std::span<const int> y, const Eigen::VectorXd& w, double b, double c) {
    double hinge = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        hinge += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * (z.row(i).dot(w) + b));
    }
    return 0.5 * w.squaredNorm() + c * hinge / static_cast<double>(z.rows());
}

}  // namespace

LinearClassifier train_linear_classifier(const Eigen::MatrixXd& features, std::span<const int> labels,
                                         const ClassifierParams& params) {
    if (features.rows() != static_cast<Eigen::Index>(labels.size())) throw InputError("feature/label count mismatch");
    if (features.cols() < 1) throw InputError("need at least one feature");
    check_labels(labels);
    const auto s = features.rows();
    const auto d = features.cols();

    const Eigen::RowVectorXd mean = features.colwise().mean();
    const Eigen::MatrixXd z = features.rowwise() - mean;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    LinearClassifier model;
    double f = svm_objective(z, labels, w, b, params.c);
    for (int epoch = 1; epoch <= params.epochs; ++epoch) {
        Eigen::VectorXd gw = w;
        double gb = 0.0;
        const double scale_hinge = params.c / static_cast<double>(s);
        for (Eigen::Index i = 0; i < s; ++i) {
            const double y = labels[static_cast<std::size_t>(i)];
            if (y * (z.row(i).dot(w) + b) < 1.0) {
                gw.noalias() -= scale_hinge * y * z.row(i).transpose();
                gb -= scale_hinge * y;
            }
        }
        double eta = params.step / std::sqrt(static_cast<double>(epoch));
        for (int halving = 0; halving < 30; ++halving, eta *= 0.5) {
            const Eigen::VectorXd w_new = w - eta * gw;
            const double b_new = b - eta * gb;
            const double f_new = svm_objective(z, labels, w_new, b_new, params.c);
            if (f_new <= f) {
                w = w_new;
                b = b_new;
                f = f_new;
                break;
            }
        }
        model.loss_history.push_back(f);
    }

    model.w = w;
    model.b = b - mean.dot(model.w);
    return model;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
    if (folds < 2) throw InputError("folds must be >= 2");
    if (labels.size() < static_cast<std::size_t>(folds)) throw InputError("fewer samples than folds");
    std::vector<int> fold(labels.size(), 0);
    int counter = 0;
    const int classes[] = {1, -1};
    for (std::size_t ci = 0; ci < 2; ++ci) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == classes[ci]) idx.push_back(i);
        std::mt19937_64 rng(derive_seed(seed, ci));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (const auto i : idx) fold[i] = counter++ % folds;
    }
    return fold;
}

double cross_validate(const Eigen::MatrixXd& features, std::span<const int> labels, int folds, std::uint64_t seed,
                      const ClassifierParams& params) {
    if (features.rows() != static_cast<Eigen::Index>(labels.size())) throw InputError("feature/label count mismatch");
    check_labels(labels);
    const auto assignment = stratified_folds(labels, folds, seed);
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < labels.size(); ++i) (assignment[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        Eigen::MatrixXd xtr(static_cast<Eigen::Index>(train.size()), features.cols());
        std::vector<int> ytr(train.size());
        for (std::size_t t = 0; t < train.size(); ++t) {
            xtr.row(static_cast<Eigen::Index>(t)) = features.row(train[t]);
            ytr[t] = labels[static_cast<std::size_t>(train[t])];
        }
        const auto model = train_linear_classifier(xtr, ytr, params);
        std::size_t correct = 0;
        for (const auto i : test) correct += model.predict(features.row(i)) == labels[static_cast<std::size_t>(i)];
        total += static_cast<double>(correct) / static_cast<double>(test.size());
    }
    return total / folds;
}

Eigen::MatrixXd edge_features(std::span<const Connectome> subjects, std::span<const std::pair<int, int>> edges) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(subjects.size()), static_cast<Eigen::Index>(edges.size()));
    for (std::size_t s = 0; s < subjects.size(); ++s)
        for (std::size_t e = 0; e < edges.size(); ++e) {
            const auto [a, b] = edges[e];
            if (a >= subjects[s].k() || b >= subjects[s].k()) throw InputError("edge outside connectome");
            x(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(e)) = subjects[s].weights(a, b);
        }
    return x;
}

}  // namespace brainparc
