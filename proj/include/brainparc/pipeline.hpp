#pragma once

#include "brainparc/data_model.hpp"
#include "brainparc/spatial_graph.hpp"
#include "brainparc/spectral.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace brainparc {

struct PipelineParams {
    int k = 40;
    int radius = 2;
    SimilarityMeasure measure = SimilarityMeasure::correlation;
    int restarts = 10;
    /// Stop once NMI between consecutive parcellations reaches this value.
    double stop_threshold = 0.95;
    int max_iterations = 10;
    std::uint64_t seed = 0;
    EigenSolverOptions eigen;
    KMeansOptions kmeans;

    /// Throws InputError on an invalid combination.
    void validate() const;
};

struct IterationRecord {
    int iteration = 0;
    Parcellation parcellation;
    /// Similarity to the previous parcellation (to the initial segmentation
    /// at iteration 1).
    double nmi_prev = 0.0;
    double dice_prev = 0.0;
    std::size_t profile_columns = 0;
    bool degenerate = false;
    bool converged = false;
};

struct PipelineTrace {
    std::vector<IterationRecord> iterations;
    bool converged = false;
    bool degenerate = false;
};

struct PipelineResult {
    Parcellation parcellation;
    PipelineTrace trace;
};

/// k-means++ clustering of voxel coordinates into m compact regions.
Segmentation random_spatial_segmentation(const BrainMask& mask, int m, std::uint64_t seed);

/// Regions are the cubes of side `cube` that contain at least one voxel,
/// numbered in lexicographic cube order.
Segmentation grid_segmentation(const BrainMask& mask, int cube);

/// Spectral clustering of the spatial graph with every weight set to 1.
Segmentation synthetic_segmentation(const BrainMask& mask, int k, const PipelineParams& params);

/// Spectral parameters for one clustering pass derived from pipeline params.
SpectralParams spectral_params(const PipelineParams& params, std::uint64_t seed);

/// The iterative refinement loop: profiles from the current segmentation,
/// weight the spatial graph, spectral clustering into k regions, compare with
/// the previous parcellation; repeat until NMI >= stop_threshold or the
/// iteration cap. The spatial edge list is built once.
PipelineResult iterate_parcellation(const SparseConnectivity& conn, const BrainMask& mask, const Segmentation& init,
                                    const PipelineParams& params);

/// One line per iteration: `iter nmi_prev dice_prev converged`.
void write_trace(const PipelineTrace& trace, std::ostream& out);

}  // namespace brainparc
