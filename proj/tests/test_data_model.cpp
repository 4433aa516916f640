#include "brainparc/data_model.hpp"
#include "brainparc/error.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace brainparc;

namespace {

template <class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("read_mask parses header and rows in order") {
    std::istringstream in("MASK 4 4 4 3\n0 0 0\n1 0 0\n2 0 0\n");
    const auto mask = read_mask(in);
    CHECK(mask.size() == 3);
    CHECK(mask.dims() == Dims{4, 4, 4});
    CHECK(mask[1] == Voxel{1, 0, 0});
    CHECK(mask.index_of({2, 0, 0}) == 2);
    CHECK(mask.index_of({3, 3, 3}) == -1);
}

TEST_CASE("read_mask errors") {
    CHECK(error_of([] {
              std::istringstream in("MASK 4 4 4 0\n");
              read_mask(in);
          }) == "empty mask");
    CHECK(error_of([] {
              std::istringstream in("MASK 4 4 4 1\n5 0 0\n");
              read_mask(in);
          }) == "coordinate out of bounds at line 2");
    CHECK(error_of([] {
              std::istringstream in("MASK 4 4 4 2\n1 0 0\n1 0 0\n");
              read_mask(in);
          }) == "duplicate coordinate at line 3");
    CHECK(error_of([] {
              std::istringstream in("MASK 4 4 4 2\n1 0 0\n");
              read_mask(in);
          }).find("declares 2") != std::string::npos);
    CHECK_THROWS_AS(BrainMask(Dims{2, 2, 2}, {}), InputError);
}

TEST_CASE("comments and blank lines keep physical line numbers") {
    std::istringstream in("# header comment\nMASK 2 2 2 1\n\n# row\n2 0 0\n");
    CHECK(error_of([&] { read_mask(in); }) == "coordinate out of bounds at line 5");
}

TEST_CASE("connectivity symmetry and duplicates") {
    const auto c = SparseConnectivity::from_triplets(3, {{0, 1, 5.0}});
    CHECK(c.at(0, 1) == 5.0);
    CHECK(c.at(1, 0) == 5.0);
    CHECK(c.at(0, 2) == 0.0);
    CHECK(error_of([] { SparseConnectivity::from_triplets(3, {{0, 1, 5.0}, {1, 0, 4.0}}); })
              .find("asymmetric entry") != std::string::npos);
    // both orientations agreeing collapse to one stored entry
    const auto both = SparseConnectivity::from_triplets(3, {{0, 1, 5.0}, {1, 0, 5.0}});
    CHECK(both.nnz() == 1);
    const auto loop = SparseConnectivity::from_triplets(3, {{1, 1, 2.0}});
    CHECK(loop.at(1, 1) == 2.0);
    CHECK(loop.strengths() == std::vector<double>{0.0, 2.0, 0.0});
    CHECK_THROWS_AS(SparseConnectivity::from_triplets(3, {{0, 3, 1.0}}), InputError);
    CHECK_THROWS_AS(SparseConnectivity::from_triplets(3, {{0, 1, -1.0}}), InputError);
}

TEST_CASE("connectivity is independent of entry order") {
    std::mt19937_64 rng(3);
    std::vector<ConnEntry> t;
    for (std::uint32_t i = 0; i < 30; ++i)
        for (std::uint32_t j = i; j < 30; ++j)
            if (rng() % 4 == 0) t.push_back({i, j, static_cast<double>(rng() % 100) / 7.0});
    const auto a = SparseConnectivity::from_triplets(30, t);
    auto shuffled = t;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (auto& e : shuffled)
        if (rng() % 2) std::swap(e.i, e.j);
    CHECK(SparseConnectivity::from_triplets(30, shuffled) == a);
}

TEST_CASE("connectivity text and binary round trips") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<ConnEntry> t;
    for (std::uint32_t i = 0; i < 20; ++i)
        for (std::uint32_t j = i; j < 20; ++j)
            if (rng() % 3 == 0) t.push_back({i, j, u(rng)});
    const auto c = SparseConnectivity::from_triplets(20, t);
    const auto mask = BrainMask::full_grid({5, 2, 2});

    std::stringstream text;
    write_connectivity(c, text);
    CHECK(read_connectivity(text, mask) == c);

    std::stringstream bin;
    write_connectivity_binary(c, bin);
    CHECK(read_connectivity(bin, mask) == c);

    std::istringstream wrong("CONN 19 0\n");
    CHECK_THROWS_AS(read_connectivity(wrong, mask), InputError);
}

TEST_CASE("mask round trip") {
    const BrainMask mask(Dims{3, 4, 5}, {{2, 3, 4}, {0, 0, 0}, {1, 2, 3}});
    std::stringstream s;
    write_mask(mask, s);
    CHECK(read_mask(s) == mask);
}

TEST_CASE("parcellation round trips and validation") {
    for (const auto& parc : {Parcellation({1, 2, 1}, 2), Parcellation({1, 1, 1, 1}, 1)}) {
        std::stringstream s;
        write_parcellation(parc, s);
        const auto back = read_parcellation(s);
        CHECK(back == parc);
        CHECK(back.k() == parc.k());
    }
    std::istringstream bad("PARC 2 3\n1\n4\n");
    CHECK(error_of([&] { read_parcellation(bad); }).find("outside [1, 3]") != std::string::npos);
    CHECK_THROWS_AS(Parcellation({0, 1}, 2), InputError);
    CHECK(Parcellation({1, 1, 3}, 3).degenerate());
    CHECK_FALSE(Parcellation({1, 2, 3}, 3).degenerate());
}

TEST_CASE("parcellation against a mask checks the voxel count") {
    const auto mask = BrainMask::full_grid({2, 1, 1});
    std::istringstream in("PARC 3 1\n1\n1\n1\n");
    CHECK_THROWS_AS(read_parcellation(in, mask), InputError);
}

TEST_CASE("compact relabels in order of first appearance") {
    const std::vector<int> raw{7, 3, 7, 9};
    const auto p = Parcellation::compact(raw);
    CHECK(p.labels() == std::vector<int>{1, 2, 1, 3});
    CHECK(p.k() == 3);
    CHECK(p.region_sizes() == std::vector<std::size_t>{2, 1, 1});
}

TEST_CASE("format_double round-trips") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) / 3.0;
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.5) == "0.5");
}
