#include "brainparc/synth.hpp"

#include "brainparc/error.hpp"
#include "brainparc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace brainparc {

void SynthSpec::validate() const {
    for (const int d : dims)
        if (d < 1) throw InputError("dimensions must be >= 1");
    const auto n = static_cast<long long>(dims[0]) * dims[1] * dims[2];
    if (k_true < 1) throw InputError("k_true must be >= 1");
    if (k_true > n) throw InputError("k_true exceeds voxel count");
    if (!(mu_out >= 0.0) || !(mu_in > mu_out)) throw InputError("need mu_in > mu_out >= 0");
    if (!(sigma >= 0.0)) throw InputError("sigma must be >= 0");
    if (!(density > 0.0 && density <= 1.0)) throw InputError("density must be in (0, 1]");
}

namespace {

struct Box {
    std::array<int, 3> lo;
    std::array<int, 3> hi;  // exclusive
};

void bisect(const Box& box, int k, std::vector<Box>& leaves) {
    if (k == 1) {
        leaves.push_back(box);
        return;
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (box.hi[a] - box.lo[a] > box.hi[axis] - box.lo[axis]) axis = a;
    const int left = k / 2;
    const int extent = box.hi[axis] - box.lo[axis];
    const int cut = box.lo[axis] + static_cast<int>(std::lround(static_cast<double>(extent) * left / k));
    Box a = box, b = box;
    a.hi[axis] = cut;
    b.lo[axis] = cut;
    bisect(a, left, leaves);
    bisect(b, k - left, leaves);
}

}  // namespace

std::vector<int> planted_regions(const BrainMask& mask, int k_true) {
    if (k_true < 1) throw InputError("k_true must be >= 1");
    std::vector<Box> leaves;
    bisect({{0, 0, 0}, mask.dims()}, k_true, leaves);
    std::vector<int> labels(mask.size(), 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto& v = mask[i];
        const std::array<int, 3> c{v.x, v.y, v.z};
        for (std::size_t r = 0; r < leaves.size(); ++r) {
            const auto& b = leaves[r];
            if (c[0] >= b.lo[0] && c[0] < b.hi[0] && c[1] >= b.lo[1] && c[1] < b.hi[1] && c[2] >= b.lo[2] &&
                c[2] < b.hi[2]) {
                labels[i] = static_cast<int>(r) + 1;
                break;
            }
        }
    }
    return labels;
}

bool signature_affinity(int a, int b, int k_true) {
    if (a == b) return true;
    if (k_true <= 3) return false;
    const int d = std::abs(a - b);
    return d == 1 || d == k_true - 1;
}

SynthInstance generate(const SynthSpec& spec) {
    spec.validate();
    SynthInstance out;
    out.mask = BrainMask::full_grid(spec.dims);
    const auto n = out.mask.size();
    auto truth = planted_regions(out.mask, spec.k_true);

    std::vector<std::vector<ConnEntry>> rows(n);
    const auto signed_n = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t si = 0; si < signed_n; ++si) {
        const auto i = static_cast<std::size_t>(si);
        auto& row = rows[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (to_unit(counter_hash(spec.seed, i, j, 0)) >= spec.density) continue;
            const double mean = signature_affinity(truth[i], truth[j], spec.k_true) ? spec.mu_in : spec.mu_out;
            const double noise = spec.sigma > 0.0 ? spec.sigma * counter_normal(spec.seed, i, j) : 0.0;
            const double w = std::max(0.0, mean + noise);
            if (w > 0.0) row.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w});
        }
    }
    std::vector<ConnEntry> entries;
    std::size_t total = 0;
    for (const auto& r : rows) total += r.size();
    entries.reserve(total);
    for (auto& r : rows) {
        entries.insert(entries.end(), r.begin(), r.end());
        std::vector<ConnEntry>().swap(r);
    }
    out.conn = SparseConnectivity::from_triplets(n, std::move(entries));
    out.truth = Parcellation(std::move(truth), spec.k_true);
    return out;
}

Parcellation perturb_parcellation(const Parcellation& parc, double flip_fraction, std::uint64_t seed) {
    if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0)) throw InputError("flip fraction must be in [0, 1]");
    const auto n = parc.size();
    const int k = parc.k();
    const auto flips = static_cast<std::size_t>(std::floor(flip_fraction * static_cast<double>(n)));
    if (k == 1 || flips == 0) return parc;

    std::mt19937_64 rng(derive_seed(seed, 0));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Partial Fisher-Yates: the first `flips` slots are a uniform sample.
    for (std::size_t s = 0; s < flips; ++s) {
        std::uniform_int_distribution<std::size_t> pick(s, n - 1);
        std::swap(order[s], order[pick(rng)]);
    }
    auto labels = parc.labels();
    std::uniform_int_distribution<int> other(1, k - 1);
    for (std::size_t s = 0; s < flips; ++s) {
        const auto i = order[s];
        const int l = other(rng);
        labels[i] = l >= labels[i] ? l + 1 : l;
    }
    return Parcellation(std::move(labels), k);
}

}  // namespace brainparc
