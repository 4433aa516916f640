// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include "brainparc/group.hpp"
#include "brainparc/metrics.hpp"
#include "brainparc/pipeline.hpp"
#include "brainparc/rng.hpp"
#include "brainparc/spatial_graph.hpp"
#include "brainparc/spectral.hpp"
#include "brainparc/synth.hpp"

#include "oracles.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace brainparc;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("[%s] %2d %s: %s; %.2f s (limit %.0f s)%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                limit_s, in_time ? "" : " TIME EXCEEDED");
    std::fflush(stdout);
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::vector<int> random_labels(std::size_t n, int k, std::mt19937_64& rng) {
    std::vector<int> l(n);
    for (auto& v : l) v = static_cast<int>(rng() % static_cast<unsigned>(k)) + 1;
    return l;
}

// ---- shared planted instance ----------------------------------------------

SynthSpec planted_spec() {
    SynthSpec s;
    s.dims = {20, 20, 10};
    s.k_true = 5;
    s.mu_in = 1.0;
    s.mu_out = 0.1;
    s.sigma = 0.1 * s.mu_in;
    s.density = 0.3;
    s.seed = 1;
    return s;
}

PipelineParams planted_params() {
    PipelineParams p;
    p.k = 5;
    p.seed = 0;
    return p;
}

const SynthInstance& planted() {
    static const SynthInstance inst = generate(planted_spec());
    return inst;
}

struct InitRun {
    std::string name;
    PipelineResult result;
};

const std::vector<InitRun>& init_runs() {
    static const std::vector<InitRun> runs = [] {
        const auto& inst = planted();
        const auto params = planted_params();
        std::vector<InitRun> out;
        out.push_back({"grid:5", iterate_parcellation(inst.conn, inst.mask, grid_segmentation(inst.mask, 5), params)});
        out.push_back({"random:90", iterate_parcellation(inst.conn, inst.mask,
                                                         random_spatial_segmentation(inst.mask, 90, 11), params)});
        out.push_back({"random:200", iterate_parcellation(inst.conn, inst.mask,
                                                          random_spatial_segmentation(inst.mask, 200, 12), params)});
        out.push_back({"synthetic", iterate_parcellation(inst.conn, inst.mask,
                                                         synthetic_segmentation(inst.mask, params.k, params), params)});
        return out;
    }();
    return runs;
}

// Dense D^{-1/2} (D - W) D^{-1/2}, isolated rows and columns zero.
Eigen::MatrixXd dense_lsym(const SimilarityGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.n);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (const auto& e : g.edges) w(e.i, e.j) = w(e.j, e.i) = e.w;
    const Eigen::VectorXd d = w.rowwise().sum();
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (d(i) > 0.0 && d(j) > 0.0) l(i, j) = ((i == j ? d(i) : 0.0) - w(i, j)) / std::sqrt(d(i) * d(j));
    return l;
}

std::string trace_text(const PipelineResult& r) {
    std::ostringstream s;
    write_trace(r.trace, s);
    write_parcellation(r.parcellation, s);
    return s.str();
}

}  // namespace

int main() {
#ifdef _OPENMP
    const int default_threads = omp_get_max_threads();
#endif

    criterion(1, "neighbor geometry", 1, [] {
        const auto off = neighbor_offsets(2);
        const auto mask = BrainMask::full_grid({5, 5, 5});
        const auto deg = degrees(build_spatial_edges(mask, 2));
        bool interior_ok = true;
        std::size_t interior = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            const auto& v = mask[i];
            const bool inside = v.x >= 2 && v.x <= 2 && v.y >= 2 && v.y <= 2 && v.z >= 2 && v.z <= 2;
            if (!inside) continue;
            ++interior;
            interior_ok = interior_ok && deg[i] == 32;
        }
        return Outcome{off.size() == 32 && interior == 1 && interior_ok,
                       fmt("offsets=%zu, interior voxels=%zu with degree 32: %s", off.size(), interior,
                           interior_ok ? "yes" : "no")};
    });

    criterion(2, "metric-oracle equivalence", 10, [] {
        std::mt19937_64 rng(2024);
        int dice_mismatch = 0;
        double worst_nmi = 0.0;
        for (int t = 0; t < 500; ++t) {
            const std::size_t n = 1 + rng() % 200;
            const int ka = 1 + static_cast<int>(rng() % 8), kb = 1 + static_cast<int>(rng() % 8);
            const auto la = random_labels(n, ka, rng), lb = random_labels(n, kb, rng);
            const Parcellation a(la, ka), b(lb, kb);
            dice_mismatch += dice(a, b) != oracle::dice(la, lb);
            worst_nmi = std::max(worst_nmi, std::abs(nmi(a, b) - std::clamp(oracle::nmi(la, lb), 0.0, 1.0)));
        }
        return Outcome{dice_mismatch == 0 && worst_nmi <= 1e-12,
                       fmt("500 pairs, dice mismatches=%d, max |nmi - oracle|=%.3g (tol 1e-12)", dice_mismatch,
                           worst_nmi)};
    });

    criterion(3, "identity and permutation", 1, [] {
        std::mt19937_64 rng(3);
        bool perm_ok = true;
        for (int t = 0; t < 50; ++t) {
            const int k = 2 + static_cast<int>(rng() % 7);
            const auto l = random_labels(100, k, rng);
            std::vector<int> perm(static_cast<std::size_t>(k));
            std::iota(perm.begin(), perm.end(), 1);
            std::shuffle(perm.begin(), perm.end(), rng);
            std::vector<int> relabeled(l.size());
            for (std::size_t i = 0; i < l.size(); ++i) relabeled[i] = perm[static_cast<std::size_t>(l[i] - 1)];
            const Parcellation a(l, k), b(relabeled, k);
            perm_ok = perm_ok && nmi(a, a) == 1.0 && dice(a, a) == 1.0 && nmi(a, b) == 1.0 && dice(a, b) == 1.0;
        }
        const Parcellation x({1, 1, 2, 2}, 2), y({1, 2, 1, 2}, 2);
        const double n0 = nmi(x, y), d0 = dice(x, y);
        return Outcome{perm_ok && n0 == 0.0 && d0 == 0.5,
                       fmt("relabeled pairs score 1: %s; [1,1,2,2]/[1,2,1,2] nmi=%g dice=%g", perm_ok ? "yes" : "no",
                           n0, d0)};
    });

    criterion(4, "eigensolver vs dense oracle", 60, [] {
        double worst_value = 0.0, worst_res = 0.0;
        for (std::uint64_t t = 0; t < 100; ++t) {
            std::mt19937_64 rng(derive_seed(4, t));
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const std::size_t n = 10 + rng() % 191;
            const double p = 0.02 + 0.2 * u(rng);
            SimilarityGraph g;
            g.n = n;
            for (std::uint32_t i = 0; i < n; ++i)
                for (std::uint32_t j = i + 1; j < n; ++j)
                    if (u(rng) < p) g.edges.push_back({i, j, 0.05 + 0.95 * u(rng)});
            const std::size_t k = 1 + rng() % std::min<std::size_t>(n, 40);
            EigenSolverOptions opt;
            opt.seed = t;
            const auto emb = smallest_eigenvectors(NormalizedLaplacian(g), k, opt);
            const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(dense_lsym(g));
            for (std::size_t c = 0; c < k; ++c) {
                const auto ci = static_cast<Eigen::Index>(c);
                worst_value = std::max(worst_value, std::abs(emb.values(ci) - dense.eigenvalues()(ci)));
                worst_res = std::max(worst_res, emb.residuals[c]);
            }
        }
        return Outcome{worst_value <= 1e-8 && worst_res <= 1e-8,
                       fmt("100 graphs, max |lambda - oracle|=%.3g, max residual=%.3g (tol 1e-8)", worst_value,
                           worst_res)};
    });

    criterion(5, "planted recovery from grid init", 60, [] {
        const auto& inst = planted();
        const auto params = planted_params();
        const auto r = iterate_parcellation(inst.conn, inst.mask, grid_segmentation(inst.mask, 5), params);
        const double score = nmi(r.parcellation, inst.truth);
        const auto iters = r.trace.iterations.size();
        return Outcome{score >= 0.9 && iters <= 10,
                       fmt("NMI vs truth=%.4f (need >= 0.9) after %zu iterations", score, iters)};
    });

    criterion(6, "initialization independence", 300, [] {
        const auto& runs = init_runs();
        double min_nmi = 1.0, min_dice = 1.0, min_final = 1.0;
        for (std::size_t a = 0; a < runs.size(); ++a) {
            min_final = std::min(min_final, runs[a].result.trace.iterations.back().nmi_prev);
            for (std::size_t b = a + 1; b < runs.size(); ++b) {
                min_nmi = std::min(min_nmi, nmi(runs[a].result.parcellation, runs[b].result.parcellation));
                min_dice = std::min(min_dice, dice(runs[a].result.parcellation, runs[b].result.parcellation));
            }
        }
        return Outcome{min_nmi >= 0.9 && min_dice >= 0.8 && min_final >= 0.95,
                       fmt("inits grid:5 random:90 random:200 synthetic; min pairwise NMI=%.4f (>= 0.9), Dice=%.4f "
                           "(>= 0.8), min final consecutive NMI=%.4f (>= 0.95)",
                           min_nmi, min_dice, min_final)};
    });

    criterion(7, "random-baseline separation", 60, [] {
        const auto& inst = planted();
        const auto& runs = init_runs();
        double pipe_nmi = 1.0, pipe_dice = 1.0;
        for (const auto& r : runs) {
            pipe_nmi = std::min(pipe_nmi, nmi(r.result.parcellation, inst.truth));
            pipe_dice = std::min(pipe_dice, dice(r.result.parcellation, inst.truth));
        }
        // every random parcellation must score below the pipeline; the Dice
        // margin is taken against the average random score, as in the
        // random-parcellation similarity table
        double rand_nmi = 0.0, rand_dice = 0.0, mean_dice = 0.0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            const auto r = random_spatial_segmentation(inst.mask, 5, derive_seed(7, s));
            rand_nmi = std::max(rand_nmi, nmi(r, inst.truth));
            const double d = dice(r, inst.truth);
            rand_dice = std::max(rand_dice, d);
            mean_dice += d / 100.0;
        }
        return Outcome{pipe_nmi > rand_nmi && pipe_dice > rand_dice && pipe_dice - mean_dice >= 0.15,
                       fmt("worst pipeline NMI=%.4f Dice=%.4f; best of 100 random k=5 NMI=%.4f Dice=%.4f; "
                           "Dice margin over mean random %.4f = %.4f (>= 0.15), over best random = %.4f",
                           pipe_nmi, pipe_dice, rand_nmi, rand_dice, mean_dice, pipe_dice - mean_dice,
                           pipe_dice - rand_dice)};
    });

    criterion(8, "heterogeneity detection", 30, [] {
        // Group A: pipeline parcellations of 10 synthetic subjects. Group B:
        // the same parcellations with 15% of the labels flipped.
        std::vector<Parcellation> a, b;
        SynthSpec spec = planted_spec();
        spec.dims = {14, 14, 8};
        PipelineParams params = planted_params();
        for (std::uint64_t s = 0; s < 10; ++s) {
            spec.seed = 800 + s;
            const auto inst = generate(spec);
            params.seed = s;
            a.push_back(iterate_parcellation(inst.conn, inst.mask, grid_segmentation(inst.mask, 4), params).parcellation);
            b.push_back(perturb_parcellation(a.back(), 0.15, derive_seed(8, s)));
        }
        const auto r = similarity_group_test(a, b, Metric::nmi);
        return Outcome{r.a_vs_b.p < 0.01 && r.a_vs_b.t > 0.0,
                       fmt("within-A vs within-B NMI: t=%.4g p=%.3g (need p < 0.01, t > 0)", r.a_vs_b.t, r.a_vs_b.p)};
    });

    criterion(9, "edge-wise discrimination", 10, [] {
        const int k = 5;
        const double sigma = 1.0;
        std::mt19937_64 rng(9);
        std::normal_distribution<double> g(0.0, sigma);
        auto subject = [&](bool shifted) {
            Connectome c{Eigen::MatrixXd(k, k)};
            for (int x = 0; x < k; ++x)
                for (int y = x; y < k; ++y) c.weights(x, y) = c.weights(y, x) = 20.0 + g(rng);
            if (shifted) {
                c.weights(1, 2) += 10.0 * sigma;
                c.weights(2, 1) = c.weights(1, 2);
            }
            return c;
        };
        std::vector<Connectome> a, b;
        for (int s = 0; s < 20; ++s) a.push_back(subject(true));
        for (int s = 0; s < 20; ++s) b.push_back(subject(false));
        const auto r = edgewise_ttests(a, b, {0.05, 0.00005});
        int strict = 0, loose_other = 0;
        bool target_strict = false;
        for (int x = 0; x < k; ++x)
            for (int y = x; y < k; ++y) {
                const bool is_target = x == 1 && y == 2;
                if (r.maps[1](x, y)) {
                    ++strict;
                    target_strict = target_strict || is_target;
                }
                if (!is_target && r.maps[0](x, y)) ++loose_other;
            }
        return Outcome{target_strict && strict == 1 && loose_other <= 3,
                       fmt("entries marked at 0.00005: %d (shifted edge among them: %s); other entries at 0.05: %d "
                           "(<= 3)",
                           strict, target_strict ? "yes" : "no", loose_other)};
    });

    criterion(10, "t-test p-value oracle", 10, [] {
        double worst = 0.0;
        for (int df = 2; df <= 100; ++df)
            for (double t = -10.0; t <= 10.0; t += 0.25) {
                worst = std::max(worst, std::abs(student_t_two_sided_p(t, df) - oracle::t_two_sided(t, df)));
            }
        // the same through two_sample_ttest on random samples
        std::mt19937_64 rng(10);
        std::normal_distribution<double> g;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> xs(2 + rng() % 40), ys(2 + rng() % 40);
            for (auto& x : xs) x = g(rng) + 0.5;
            for (auto& y : ys) y = g(rng);
            const auto r = two_sample_ttest(xs, ys);
            worst = std::max(worst, std::abs(r.p - oracle::t_two_sided(r.t, r.df)));
        }
        return Outcome{worst <= 1e-6, fmt("df 2..100, |t| <= 10: max |p - integral|=%.3g (tol 1e-6)", worst)};
    });

    criterion(11, "classifier sanity", 30, [] {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> g(0.0, 0.5);
        const int n = 100;
        Eigen::MatrixXd x(n, 3);
        std::vector<int> y(n);
        const Eigen::RowVector3d dir(1.0, -2.0, 0.5);
        for (int i = 0; i < n; ++i) {
            const int label = i % 2 ? 1 : -1;
            y[static_cast<std::size_t>(i)] = label;
            Eigen::RowVector3d p(g(rng), g(rng), g(rng));
            // push every point at least 1 unit off the separating plane
            p += (label * (1.0 + std::abs(g(rng))) - p.dot(dir.normalized())) * dir.normalized();
            x.row(i) = p;
        }
        const double acc = cross_validate(x, y, 10, 0);
        double lo = 1.0, hi = 0.0;
        for (std::uint64_t s = 0; s < 20; ++s) {
            auto shuffled = y;
            std::mt19937_64 srng(derive_seed(1100, s));
            std::shuffle(shuffled.begin(), shuffled.end(), srng);
            const double a = cross_validate(x, shuffled, 10, s);
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
        return Outcome{acc == 1.0 && lo >= 0.3 && hi <= 0.7,
                       fmt("separable 10-fold accuracy=%.3f (need 1); shuffled labels over 20 seeds in [%.3f, %.3f] "
                           "(need within [0.3, 0.7])",
                           acc, lo, hi)};
    });

    criterion(12, "determinism and scaling", 120 + 60, [&] {
#ifdef _OPENMP
        const auto& inst = planted();
        const auto params = planted_params();
        const auto init = grid_segmentation(inst.mask, 5);
        omp_set_num_threads(1);
        const auto one = trace_text(iterate_parcellation(inst.conn, inst.mask, init, params));
        omp_set_num_threads(8);
        const auto eight = trace_text(iterate_parcellation(inst.conn, inst.mask, init, params));
        omp_set_num_threads(default_threads);
        const bool same = one == eight;
#else
        const bool same = true;
#endif
        SynthSpec spec;
        spec.dims = {25, 20, 20};
        spec.k_true = 40;
        spec.density = 0.05;
        spec.seed = 12;
        const auto big = generate(spec);
        PipelineParams params40;
        params40.k = 40;
        const auto start = std::chrono::steady_clock::now();
        const auto r = iterate_parcellation(big.conn, big.mask, grid_segmentation(big.mask, 5), params40);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return Outcome{same && secs < 120.0,
                       fmt("threads 1 vs 8 identical: %s; 10000 voxels, %zu entries, k=40: %.1f s for %zu "
                           "iterations (need < 120 s), NMI vs truth %.3f",
                           same ? "yes" : "no", big.conn.nnz(), secs, r.trace.iterations.size(),
                           nmi(r.parcellation, big.truth))};
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures;
}
