#pragma once

#include "brainparc/data_model.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace brainparc {

using Offset = std::array<int, 3>;

/// Nonzero integer offsets with squared norm <= r^2, sorted lexicographically.
/// r = 2 gives the 32-voxel neighborhood.
std::vector<Offset> neighbor_offsets(int radius);

struct SpatialEdge {
    std::uint32_t i = 0;
    std::uint32_t j = 0;  // i < j

    friend bool operator==(const SpatialEdge&, const SpatialEdge&) = default;
};

/// Unweighted spatial adjacency; edges sorted by (i, j).
struct SpatialEdges {
    std::size_t n = 0;
    int radius = 0;
    std::vector<SpatialEdge> edges;
};

/// One edge per voxel pair of the mask at Euclidean grid distance <= radius.
SpatialEdges build_spatial_edges(const BrainMask& mask, int radius);

enum class SimilarityMeasure { correlation, cosine };

struct WeightedEdge {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    double w = 0.0;

    friend bool operator==(const WeightedEdge&, const WeightedEdge&) = default;
};

/// Sparse undirected graph over voxels; weights in [0, 1].
struct SimilarityGraph {
    std::size_t n = 0;
    int radius = 0;
    std::vector<WeightedEdge> edges;  // i < j, sorted by (i, j)
};

/// Weights each spatial edge by the similarity of its endpoints' profile rows.
/// Negative similarities clamp to 0; constant rows (correlation) and zero
/// rows (cosine) give weight 0 on every incident edge.
SimilarityGraph weight_edges(const SpatialEdges& edges, const ProfileMatrix& profiles,
                             SimilarityMeasure measure = SimilarityMeasure::correlation);

/// Every spatial edge with weight 1; the connectivity-blind graph.
SimilarityGraph unit_weights(const SpatialEdges& edges);

/// Per-voxel edge counts.
std::vector<std::size_t> degrees(const SpatialEdges& edges);

/// Header `SIMGRAPH n e r`, then `i j w` per edge.
void write_similarity_graph(const SimilarityGraph& graph, std::ostream& out);

}  // namespace brainparc
