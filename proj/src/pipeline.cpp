#include "brainparc/pipeline.hpp"

#include "brainparc/error.hpp"
#include "brainparc/kmeans.hpp"
#include "brainparc/metrics.hpp"
#include "brainparc/profiles.hpp"
#include "brainparc/rng.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace brainparc {

void PipelineParams::validate() const {
    if (k < 1) throw InputError("k must be >= 1");
    if (radius < 1) throw InputError("radius must be >= 1");
    if (restarts < 1) throw InputError("restarts must be >= 1");
    if (!(stop_threshold > 0.0 && stop_threshold <= 1.0)) throw InputError("stop threshold must be in (0, 1]");
    if (max_iterations < 1) throw InputError("max iterations must be >= 1");
    if (!(eigen.tol > 0.0)) throw InputError("eigensolver tolerance must be positive");
}

Segmentation random_spatial_segmentation(const BrainMask& mask, int m, std::uint64_t seed) {
    if (m < 1) throw InputError("number of regions must be >= 1");
    if (static_cast<std::size_t>(m) > mask.size()) {
        throw InputError("number of regions " + std::to_string(m) + " exceeds voxel count " +
                         std::to_string(mask.size()));
    }
    RowMatrix coords(static_cast<Eigen::Index>(mask.size()), 3);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const auto& v = mask[i];
        coords.row(static_cast<Eigen::Index>(i)) << v.x, v.y, v.z;
    }
    const auto km = kmeans_multi(coords, m, 1, seed);
    return Parcellation(km.labels, m);
}

Segmentation grid_segmentation(const BrainMask& mask, int cube) {
    if (cube < 1) throw InputError("cube size must be >= 1");
    std::map<std::array<int, 3>, int> index;
    for (const auto& v : mask.voxels()) index.emplace(std::array{v.x / cube, v.y / cube, v.z / cube}, 0);
    int next = 0;
    for (auto& [key, label] : index) label = ++next;
    std::vector<int> labels;
    labels.reserve(mask.size());
    for (const auto& v : mask.voxels()) labels.push_back(index.at({v.x / cube, v.y / cube, v.z / cube}));
    return Parcellation(std::move(labels), next);
}

SpectralParams spectral_params(const PipelineParams& params, std::uint64_t seed) {
    SpectralParams sp;
    sp.eigen = params.eigen;
    sp.restarts = params.restarts;
    sp.kmeans = params.kmeans;
    sp.seed = seed;
    return sp;
}

Segmentation synthetic_segmentation(const BrainMask& mask, int k, const PipelineParams& params) {
    const auto edges = build_spatial_edges(mask, params.radius);
    return spectral_cluster(unit_weights(edges), k, spectral_params(params, derive_seed(params.seed, 0x5e9)))
        .parcellation;
}

PipelineResult iterate_parcellation(const SparseConnectivity& conn, const BrainMask& mask, const Segmentation& init,
                                    const PipelineParams& params) {
    params.validate();
    if (conn.size() != mask.size()) throw InputError("connectivity size does not match mask");
    if (init.size() != mask.size()) throw InputError("initial segmentation size does not match mask");
    if (static_cast<std::size_t>(params.k) > mask.size()) throw InputError("k exceeds voxel count");

    const auto edges = build_spatial_edges(mask, params.radius);
    PipelineResult result;
    Segmentation current = init;
    for (int t = 1; t <= params.max_iterations; ++t) {
        const auto profiles = aggregate_profiles(conn, current);
        const auto graph = weight_edges(edges, profiles, params.measure);
        auto clustered =
            spectral_cluster(graph, params.k, spectral_params(params, derive_seed(params.seed, static_cast<std::uint64_t>(t))));

        IterationRecord rec;
        rec.iteration = t;
        rec.nmi_prev = nmi(clustered.parcellation, current);
        rec.dice_prev = dice(clustered.parcellation, current);
        rec.profile_columns = profiles.cols();
        rec.degenerate = clustered.degenerate;
        rec.converged = rec.nmi_prev >= params.stop_threshold;
        rec.parcellation = std::move(clustered.parcellation);
        result.trace.degenerate = result.trace.degenerate || rec.degenerate;
        current = rec.parcellation;
        const bool stop = rec.converged;
        result.trace.iterations.push_back(std::move(rec));
        if (stop) {
            result.trace.converged = true;
            break;
        }
    }
    result.parcellation = current;
    return result;
}

void write_trace(const PipelineTrace& trace, std::ostream& out) {
    for (const auto& r : trace.iterations) {
        out << r.iteration << ' ' << format_double(r.nmi_prev) << ' ' << format_double(r.dice_prev) << ' '
            << (r.converged ? 1 : 0) << '\n';
    }
}

}  // namespace brainparc
