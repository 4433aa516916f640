#include "brainparc/spatial_graph.hpp"

#include "brainparc/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace brainparc {

std::vector<Offset> neighbor_offsets(int radius) {
    if (radius < 1) throw InputError("radius must be >= 1");
    std::vector<Offset> out;
    const int r2 = radius * radius;
    for (int dx = -radius; dx <= radius; ++dx)
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dz = -radius; dz <= radius; ++dz) {
                const int d2 = dx * dx + dy * dy + dz * dz;
                if (d2 > 0 && d2 <= r2) out.push_back({dx, dy, dz});
            }
    return out;  // loop order is already lexicographic
}

SpatialEdges build_spatial_edges(const BrainMask& mask, int radius) {
    const auto offsets = neighbor_offsets(radius);
    const std::size_t n = mask.size();
    std::vector<std::vector<std::uint32_t>> forward(n);

#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const Voxel& v = mask[i];
        auto& out = forward[i];
        for (const auto& o : offsets) {
            const auto j = mask.index_of({v.x + o[0], v.y + o[1], v.z + o[2]});
            if (j > ii) out.push_back(static_cast<std::uint32_t>(j));
        }
        std::sort(out.begin(), out.end());
    }

    SpatialEdges result{n, radius, {}};
    std::size_t total = 0;
    for (const auto& f : forward) total += f.size();
    result.edges.reserve(total);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto j : forward[i]) result.edges.push_back({static_cast<std::uint32_t>(i), j});
    return result;
}

namespace {

// Rows scaled so that the similarity of two rows is their dot product:
// centered and unit-norm for correlation, unit-norm for cosine. Rows carrying
// no usable direction become zero.
RowMatrix similarity_basis(const ProfileMatrix& profiles, SimilarityMeasure measure) {
    RowMatrix z = profiles.values;
    const Eigen::Index m = z.cols();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        auto row = z.row(i);
        if (measure == SimilarityMeasure::correlation) {
            const double first = m > 0 ? row(0) : 0.0;
            if ((row.array() == first).all()) {
                row.setZero();
                continue;
            }
            row.array() -= row.mean();
        }
        const double norm = row.norm();
        if (norm > 0.0 && std::isfinite(norm)) {
            row /= norm;
        } else {
            row.setZero();
        }
    }
    return z;
}

}  // namespace

SimilarityGraph weight_edges(const SpatialEdges& edges, const ProfileMatrix& profiles, SimilarityMeasure measure) {
    if (profiles.rows() != edges.n) {
        throw InputError("profile matrix has " + std::to_string(profiles.rows()) + " rows but graph has " +
                         std::to_string(edges.n) + " nodes");
    }
    const RowMatrix z = similarity_basis(profiles, measure);
    SimilarityGraph g{edges.n, edges.radius, std::vector<WeightedEdge>(edges.edges.size())};

#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < static_cast<std::int64_t>(edges.edges.size()); ++e) {
        const auto& se = edges.edges[static_cast<std::size_t>(e)];
        const double s = z.row(se.i).dot(z.row(se.j));
        g.edges[static_cast<std::size_t>(e)] = {se.i, se.j, std::clamp(s, 0.0, 1.0)};
    }
    return g;
}

SimilarityGraph unit_weights(const SpatialEdges& edges) {
    SimilarityGraph g{edges.n, edges.radius, {}};
    g.edges.reserve(edges.edges.size());
    for (const auto& e : edges.edges) g.edges.push_back({e.i, e.j, 1.0});
    return g;
}

std::vector<std::size_t> degrees(const SpatialEdges& edges) {
    std::vector<std::size_t> deg(edges.n, 0);
    for (const auto& e : edges.edges) {
        ++deg[e.i];
        ++deg[e.j];
    }
    return deg;
}

void write_similarity_graph(const SimilarityGraph& graph, std::ostream& out) {
    out << "SIMGRAPH " << graph.n << ' ' << graph.edges.size() << ' ' << graph.radius << '\n';
    for (const auto& e : graph.edges) out << e.i << ' ' << e.j << ' ' << format_double(e.w) << '\n';
}

}  // namespace brainparc
