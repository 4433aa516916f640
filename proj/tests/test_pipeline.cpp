#include "brainparc/error.hpp"
#include "brainparc/metrics.hpp"
#include "brainparc/pipeline.hpp"
#include "brainparc/synth.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <sstream>

using namespace brainparc;

namespace {

double coordinate_variance(const BrainMask& mask, const std::vector<std::size_t>& members) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto i : members) mean += Eigen::Vector3d(mask[i].x, mask[i].y, mask[i].z);
    mean /= static_cast<double>(members.size());
    double v = 0.0;
    for (const auto i : members) v += (Eigen::Vector3d(mask[i].x, mask[i].y, mask[i].z) - mean).squaredNorm();
    return v / static_cast<double>(members.size());
}

SynthInstance small_instance(std::uint64_t seed) {
    SynthSpec s;
    s.dims = {12, 12, 6};
    s.k_true = 4;
    s.density = 0.3;
    s.seed = seed;
    return generate(s);
}

}  // namespace

TEST_CASE("random spatial segmentation") {
    const auto mask = BrainMask::full_grid({10, 10, 10});
    CHECK(random_spatial_segmentation(mask, 1, 0).labels() == std::vector<int>(1000, 1));

    const auto tiny = BrainMask::full_grid({3, 2, 2});
    auto each = random_spatial_segmentation(tiny, 12, 5).labels();
    std::sort(each.begin(), each.end());
    for (int i = 0; i < 12; ++i) CHECK(each[static_cast<std::size_t>(i)] == i + 1);

    const auto seg = random_spatial_segmentation(mask, 8, 3);
    std::vector<std::size_t> all(mask.size());
    std::iota(all.begin(), all.end(), 0);
    const double whole = coordinate_variance(mask, all);
    double within = 0.0;
    for (int r = 1; r <= 8; ++r) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (seg[i] == r) members.push_back(i);
        REQUIRE_FALSE(members.empty());
        within += coordinate_variance(mask, members) / 8.0;
    }
    CHECK(within < whole);
    CHECK_THROWS_AS(random_spatial_segmentation(tiny, 13, 0), InputError);
}

TEST_CASE("grid segmentation") {
    const auto mask = BrainMask::full_grid({10, 10, 10});
    const auto g = grid_segmentation(mask, 5);
    CHECK(g.k() == 8);
    CHECK(g.region_sizes() == std::vector<std::size_t>(8, 125));
    CHECK(grid_segmentation(mask, 11).k() == 1);
    const BrainMask three(Dims{8, 8, 8}, {{0, 0, 0}, {1, 1, 1}, {6, 0, 0}});
    const auto s = grid_segmentation(three, 5);
    CHECK(s.k() == 2);
    CHECK(s.region_sizes() == std::vector<std::size_t>{2, 1});
}

TEST_CASE("synthetic segmentation") {
    PipelineParams p;
    std::vector<Voxel> vox;
    for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 4; ++y) {
            vox.push_back({x, y, 0});
            vox.push_back({x, y, 5});
        }
    const BrainMask slabs(Dims{6, 4, 6}, vox);
    const auto two = synthetic_segmentation(slabs, 2, p);
    std::vector<int> truth;
    for (const auto& v : slabs.voxels()) truth.push_back(v.z == 0 ? 1 : 2);
    CHECK(nmi(two, Parcellation(truth, 2)) == 1.0);

    CHECK(synthetic_segmentation(slabs, 1, p).labels() == std::vector<int>(slabs.size(), 1));

    const auto cube = BrainMask::full_grid({8, 8, 8});
    const auto halves = synthetic_segmentation(cube, 2, p);
    const auto sizes = halves.region_sizes();
    const double a = static_cast<double>(sizes[0]), b = static_cast<double>(sizes[1]);
    CHECK(std::abs(a - b) / std::max(a, b) < 0.2);

    // The library's second eigenvalue agrees with a dense decomposition of
    // the same unit-weight graph.
    const auto edges = build_spatial_edges(cube, p.radius);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(512, 512);
    for (const auto& e : edges.edges) w(e.i, e.j) = w(e.j, e.i) = 1.0;
    const Eigen::VectorXd d = w.rowwise().sum();
    Eigen::MatrixXd l = -w;
    for (Eigen::Index i = 0; i < 512; ++i) l(i, i) += d(i);
    const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
    l = s.asDiagonal() * l * s.asDiagonal();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense(l);
    const auto emb = smallest_eigenvectors(NormalizedLaplacian(unit_weights(edges)), 2);
    CHECK(std::abs(emb.values(1) - dense.eigenvalues()(1)) < 1e-8);
}

TEST_CASE("planted-aligned init converges quickly") {
    const auto inst = small_instance(2);
    PipelineParams p;
    p.k = 4;
    const auto r = iterate_parcellation(inst.conn, inst.mask, inst.truth, p);
    CHECK(r.trace.converged);
    CHECK(r.trace.iterations.size() <= 2);
    CHECK(nmi(r.parcellation, inst.truth) >= 0.95);
}

TEST_CASE("different inits agree") {
    const auto inst = small_instance(3);
    PipelineParams p;
    p.k = 4;
    const auto a = iterate_parcellation(inst.conn, inst.mask, grid_segmentation(inst.mask, 3), p);
    const auto b = iterate_parcellation(inst.conn, inst.mask, random_spatial_segmentation(inst.mask, 60, 1), p);
    CHECK(nmi(a.parcellation, b.parcellation) >= 0.9);
    CHECK(a.trace.iterations.back().nmi_prev >= p.stop_threshold);
}

TEST_CASE("profile columns follow m, then k") {
    const auto inst = small_instance(4);
    PipelineParams p;
    p.k = 4;
    p.stop_threshold = 1.0;
    p.max_iterations = 3;
    const auto init = grid_segmentation(inst.mask, 4);
    const auto r = iterate_parcellation(inst.conn, inst.mask, init, p);
    REQUIRE(r.trace.iterations.size() >= 2);
    CHECK(r.trace.iterations[0].profile_columns == static_cast<std::size_t>(init.k()));
    for (std::size_t t = 1; t < r.trace.iterations.size(); ++t) CHECK(r.trace.iterations[t].profile_columns == 4);
    CHECK(r.trace.iterations[0].nmi_prev == nmi(r.trace.iterations[0].parcellation, init));
}

TEST_CASE("fixed seed gives an identical trace") {
    const auto inst = small_instance(5);
    PipelineParams p;
    p.k = 4;
    p.seed = 9;
    const auto init = random_spatial_segmentation(inst.mask, 30, 2);
    const auto a = iterate_parcellation(inst.conn, inst.mask, init, p);
    const auto b = iterate_parcellation(inst.conn, inst.mask, init, p);
    std::ostringstream ta, tb;
    write_trace(a.trace, ta);
    write_trace(b.trace, tb);
    CHECK(ta.str() == tb.str());
    CHECK(a.parcellation == b.parcellation);
}

TEST_CASE("zero connectivity surfaces the degenerate flag") {
    const auto mask = BrainMask::full_grid({5, 5, 4});
    PipelineParams p;
    p.k = 3;
    p.max_iterations = 2;
    const auto r = iterate_parcellation(SparseConnectivity(mask.size()), mask, grid_segmentation(mask, 3), p);
    CHECK(r.trace.degenerate);
}

TEST_CASE("parameter validation") {
    const auto inst = small_instance(1);
    PipelineParams p;
    p.k = 0;
    CHECK_THROWS_WITH_AS(iterate_parcellation(inst.conn, inst.mask, inst.truth, p), "k must be >= 1", InputError);
    p.k = 4;
    p.stop_threshold = 1.5;
    CHECK_THROWS_AS(iterate_parcellation(inst.conn, inst.mask, inst.truth, p), InputError);
    p.stop_threshold = 0.95;
    CHECK_THROWS_AS(iterate_parcellation(inst.conn, inst.mask, Parcellation({1, 1}, 1), p), InputError);
}

TEST_CASE("trace format") {
    PipelineTrace t;
    IterationRecord r;
    r.iteration = 1;
    r.nmi_prev = 0.5;
    r.dice_prev = 0.25;
    t.iterations.push_back(r);
    r.iteration = 2;
    r.nmi_prev = 1.0;
    r.dice_prev = 1.0;
    r.converged = true;
    t.iterations.push_back(r);
    std::ostringstream out;
    write_trace(t, out);
    CHECK(out.str() == "1 0.5 0.25 0\n2 1 1 1\n");
}
