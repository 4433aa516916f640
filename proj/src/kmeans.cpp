#include "brainparc/kmeans.hpp"

#include "brainparc/error.hpp"
#include "brainparc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace brainparc {

namespace {

double squared_distance(const RowMatrix& a, Eigen::Index i, const RowMatrix& b, Eigen::Index j) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double d = a(i, c) - b(j, c);
        s += d * d;
    }
    return s;
}

// Squared distance, abandoned as soon as the partial sum exceeds `bound`
// (partial sums only grow, so the comparison against `bound` is unaffected).
double bounded_distance(const double* a, const double* b, Eigen::Index d, double bound) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
        const double t = a[c] - b[c];
        s += t * t;
        if (s > bound) return s;
    }
    return s;
}

// Nearest center per point (ties: lowest index); returns 0-based labels and
// the squared distance to the chosen center. `labels` may carry a previous
// assignment, which is only used as the first candidate.
void assign(const RowMatrix& points, const RowMatrix& centers, std::vector<int>& labels, std::vector<double>& dist) {
    const Eigen::Index n = points.rows();
    const Eigen::Index k = centers.rows();
    const Eigen::Index d = points.cols();
    const bool warm = labels.size() == static_cast<std::size_t>(n);
    labels.resize(static_cast<std::size_t>(n));
    dist.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double* p = points.data() + i * d;
        int best = warm ? labels[static_cast<std::size_t>(i)] : 0;
        if (best < 0 || best >= k) best = 0;
        double best_d = squared_distance(points, i, centers, best);
        for (Eigen::Index c = 0; c < k; ++c) {
            if (c == best) continue;
            const double dc = bounded_distance(p, centers.data() + c * d, d, best_d);
            if (dc < best_d || (dc == best_d && c < best)) {
                best_d = dc;
                best = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = best;
        dist[static_cast<std::size_t>(i)] = best_d;
    }
}

// Moves the farthest eligible point into each empty cluster. Returns false if
// some cluster stays empty (fewer distinct points than clusters).
bool repair_empty(const RowMatrix& points, RowMatrix& centers, std::vector<int>& labels, std::vector<double>& dist) {
    const auto k = static_cast<std::size_t>(centers.rows());
    std::vector<std::size_t> counts(k, 0);
    for (const int l : labels) ++counts[static_cast<std::size_t>(l)];
    bool complete = true;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        std::size_t far = labels.size();
        double far_d = 0.0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (counts[static_cast<std::size_t>(labels[i])] >= 2 && dist[i] > far_d) {
                far_d = dist[i];
                far = i;
            }
        }
        if (far == labels.size()) {
            complete = false;
            continue;
        }
        --counts[static_cast<std::size_t>(labels[far])];
        labels[far] = static_cast<int>(c);
        counts[c] = 1;
        dist[far] = 0.0;
        centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
    }
    return complete;
}

void update_centers(const RowMatrix& points, RowMatrix& centers, const std::vector<int>& labels) {
    const Eigen::Index k = centers.rows();
    RowMatrix sums = RowMatrix::Zero(k, points.cols());
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sums.row(labels[i]) += points.row(static_cast<Eigen::Index>(i));
        ++counts[static_cast<std::size_t>(labels[i])];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
            centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        }
    }
}

double objective0(const RowMatrix& points, const RowMatrix& centers, const std::vector<int>& labels0) {
    double total = 0.0;
    for (std::size_t i = 0; i < labels0.size(); ++i) {
        total += squared_distance(points, static_cast<Eigen::Index>(i), centers, labels0[i]);
    }
    return total;
}

bool has_empty(const std::vector<int>& labels, std::size_t k) {
    std::vector<char> used(k, 0);
    for (const int l : labels) used[static_cast<std::size_t>(l)] = 1;
    return std::find(used.begin(), used.end(), 0) != used.end();
}

}  // namespace

SeedResult kmeanspp_seed(const RowMatrix& points, int k, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k < 1) throw InputError("k must be >= 1");
    if (static_cast<std::size_t>(k) > n) {
        throw InputError("k = " + std::to_string(k) + " exceeds the number of points " + std::to_string(n));
    }
    SeedResult result;
    std::vector<char> chosen(n, 0);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto take = [&](std::size_t idx) {
        result.indices.push_back(idx);
        chosen[idx] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], squared_distance(points, static_cast<Eigen::Index>(i), points,
                                                               static_cast<Eigen::Index>(idx)));
        }
        nearest[idx] = 0.0;
    };

    take(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
    while (result.indices.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += nearest[i];
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            std::size_t pick = n;
            std::size_t last_positive = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (nearest[i] <= 0.0) continue;
                last_positive = i;
                acc += nearest[i];
                if (acc > target) {
                    pick = i;
                    break;
                }
            }
            take(pick < n ? pick : last_positive);
        } else {
            result.degenerate = true;
            const std::size_t remaining = n - result.indices.size();
            std::size_t r = std::uniform_int_distribution<std::size_t>(0, remaining - 1)(rng);
            for (std::size_t i = 0; i < n; ++i) {
                if (chosen[i]) continue;
                if (r-- == 0) {
                    take(i);
                    break;
                }
            }
        }
    }
    return result;
}

double kmeans_objective(const RowMatrix& points, const RowMatrix& centers, const std::vector<int>& labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        total += squared_distance(points, static_cast<Eigen::Index>(i), centers, labels[i] - 1);
    }
    return total;
}

KMeansResult lloyd(const RowMatrix& points, RowMatrix centers, const KMeansOptions& options) {
    if (centers.rows() < 1) throw InputError("lloyd needs at least one center");
    if (centers.cols() != points.cols()) throw InputError("center dimension does not match points");
    if (points.rows() < 1) throw InputError("lloyd needs at least one point");
    const auto k = static_cast<std::size_t>(centers.rows());

    KMeansResult result;
    std::vector<int> labels;  // 0-based while iterating
    std::vector<int> next;
    std::vector<double> dist;
    double prev = std::numeric_limits<double>::infinity();
    bool tol_reached = false;
    bool complete = true;

    for (int it = 1; it <= options.max_iter; ++it) {
        assign(points, centers, next, dist);
        if (it > 1 && next == labels) {
            result.converged = true;
            break;
        }
        if (tol_reached && !has_empty(next, k)) {
            // Close the tolerance stop with a pure assignment step so that
            // labels and centers stay consistent.
            labels = next;
            prev = objective0(points, centers, labels);
            result.history.push_back(prev);
            result.converged = true;
            break;
        }
        complete = repair_empty(points, centers, next, dist);
        labels = next;
        update_centers(points, centers, labels);
        const double obj = objective0(points, centers, labels);
        result.history.push_back(obj);
        result.iterations = it;
        if (std::isfinite(prev) && prev - obj <= options.tol * prev) tol_reached = true;
        prev = obj;
    }

    if (!result.converged) {
        assign(points, centers, next, dist);
        if (next != labels && !has_empty(next, k)) {
            labels = next;
            prev = objective0(points, centers, labels);
            result.history.push_back(prev);
        }
    }

    result.degenerate = !complete || has_empty(labels, k);
    result.objective = objective0(points, centers, labels);
    result.labels.resize(labels.size());
    std::transform(labels.begin(), labels.end(), result.labels.begin(), [](int l) { return l + 1; });
    result.centers = std::move(centers);
    return result;
}

KMeansResult kmeans_multi(const RowMatrix& points, int k, int restarts, std::uint64_t seed,
                          const KMeansOptions& options) {
    if (restarts < 1) throw InputError("restarts must be >= 1");
    if (k < 1) throw InputError("k must be >= 1");
    if (static_cast<Eigen::Index>(k) > points.rows()) {
        throw InputError("k = " + std::to_string(k) + " exceeds the number of points " +
                         std::to_string(points.rows()));
    }
    std::vector<KMeansResult> runs(static_cast<std::size_t>(restarts));

#pragma omp parallel for schedule(dynamic, 1)
    for (int r = 0; r < restarts; ++r) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
        const auto seeds = kmeanspp_seed(points, k, rng);
        RowMatrix centers(k, points.cols());
        for (int c = 0; c < k; ++c) {
            centers.row(c) = points.row(static_cast<Eigen::Index>(seeds.indices[static_cast<std::size_t>(c)]));
        }
        runs[static_cast<std::size_t>(r)] = lloyd(points, std::move(centers), options);
    }

    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].objective < runs[best].objective) best = r;
    }
    return std::move(runs[best]);
}

}  // namespace brainparc
