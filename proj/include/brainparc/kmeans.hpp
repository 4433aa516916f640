#pragma once

#include "brainparc/data_model.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace brainparc {

struct KMeansOptions {
    int max_iter = 300;
    /// Stop once the relative objective decrease of an iteration is <= tol.
    double tol = 1e-9;
};

struct KMeansResult {
    std::vector<int> labels;     // 1-based cluster per point
    RowMatrix centers;           // k x d
    double objective = 0.0;      // sum of squared point-to-center distances
    int iterations = 0;
    bool converged = false;
    bool degenerate = false;     // some cluster could not be populated
    std::vector<double> history; // objective after every iteration
};

struct SeedResult {
    std::vector<std::size_t> indices;
    bool degenerate = false;  // D^2 mass vanished and the uniform fallback was used
};

/// k-means++ seeding: first center uniform, each further center drawn with
/// probability proportional to the squared distance to the nearest chosen
/// center. When every remaining distance is zero the next center is drawn
/// uniformly from the points not yet chosen.
SeedResult kmeanspp_seed(const RowMatrix& points, int k, std::mt19937_64& rng);

/// Lloyd iteration from the given centers. Each point goes to its nearest
/// center (ties: lowest index). A cluster left empty is reseeded at the point
/// farthest from its own center among clusters with at least two members.
/// The returned labels are always nearest-center labels for the returned
/// centers.
KMeansResult lloyd(const RowMatrix& points, RowMatrix centers, const KMeansOptions& options = {});

/// Sum of squared distances of each point to its labelled center.
double kmeans_objective(const RowMatrix& points, const RowMatrix& centers, const std::vector<int>& labels);

/// Best of `restarts` seeded runs by objective (ties: earliest restart).
/// Restart r uses a generator seeded with derive_seed(seed, r).
KMeansResult kmeans_multi(const RowMatrix& points, int k, int restarts, std::uint64_t seed,
                          const KMeansOptions& options = {});

}  // namespace brainparc
