#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace brainparc {

struct Voxel {
    int x = 0;
    int y = 0;
    int z = 0;

    friend bool operator==(const Voxel&, const Voxel&) = default;
    friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

using Dims = std::array<int, 3>;

/// Ordered set of voxel coordinates. The position of a voxel in the sequence
/// is its index everywhere else in the library.
class BrainMask {
public:
    BrainMask() = default;
    /// Validates uniqueness and bounds; throws InputError.
    BrainMask(Dims dims, std::vector<Voxel> voxels);

    /// Every voxel of an nx*ny*nz box, x-major then y then z.
    static BrainMask full_grid(Dims dims);

    std::size_t size() const noexcept { return voxels_.size(); }
    const Dims& dims() const noexcept { return dims_; }
    const std::vector<Voxel>& voxels() const noexcept { return voxels_; }
    const Voxel& operator[](std::size_t i) const { return voxels_[i]; }

    /// Index of the voxel at `v`, or -1 when it is outside the mask.
    std::int64_t index_of(const Voxel& v) const noexcept;

    friend bool operator==(const BrainMask& a, const BrainMask& b) {
        return a.dims_ == b.dims_ && a.voxels_ == b.voxels_;
    }

private:
    std::size_t linear(const Voxel& v) const noexcept {
        return (static_cast<std::size_t>(v.x) * dims_[1] + v.y) * dims_[2] + v.z;
    }

    Dims dims_{0, 0, 0};
    std::vector<Voxel> voxels_;
    std::vector<std::int32_t> lookup_;  // dense grid -> voxel index
};

struct ConnEntry {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    double w = 0.0;

    friend bool operator==(const ConnEntry&, const ConnEntry&) = default;
};

/// Symmetric nonnegative sparse matrix stored once per unordered pair
/// (i <= j), sorted by (i, j). Self-loops are allowed.
class SparseConnectivity {
public:
    SparseConnectivity() = default;
    explicit SparseConnectivity(std::size_t n) : n_(n) {}

    /// Accepts entries in any orientation and order. A pair given in both
    /// orientations (or repeated) must agree to 1e-9 relative. Zero weights
    /// are dropped. Throws InputError on negative weights, out-of-range
    /// indices or conflicting duplicates.
    static SparseConnectivity from_triplets(std::size_t n, std::vector<ConnEntry> triplets);

    std::size_t size() const noexcept { return n_; }
    std::size_t nnz() const noexcept { return upper_.size(); }
    std::span<const ConnEntry> upper() const noexcept { return upper_; }

    /// conn(i, j) with symmetric expansion; O(log nnz).
    double at(std::size_t i, std::size_t j) const noexcept;

    /// Sum_j conn(i, j) for every i (self-loop counted once).
    std::vector<double> strengths() const;

    /// Sum over stored entries, i.e. each unordered pair once.
    double total_strength() const noexcept;

    friend bool operator==(const SparseConnectivity&, const SparseConnectivity&) = default;

private:
    std::size_t n_ = 0;
    std::vector<ConnEntry> upper_;
};

/// Label per voxel with labels in [1, k]. `degenerate` marks labelings in
/// which some value of [1, k] is unused.
class Parcellation {
public:
    Parcellation() = default;
    /// Throws InputError if k < 1 or a label is outside [1, k].
    Parcellation(std::vector<int> labels, int k);

    /// Relabels arbitrary integer labels to 1..m in order of first appearance.
    static Parcellation compact(std::span<const int> raw);

    std::size_t size() const noexcept { return labels_.size(); }
    int k() const noexcept { return k_; }
    bool degenerate() const noexcept { return degenerate_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    int operator[](std::size_t i) const { return labels_[i]; }

    /// Voxel count per label; index 0 is label 1.
    std::vector<std::size_t> region_sizes() const;

    friend bool operator==(const Parcellation& a, const Parcellation& b) {
        return a.k_ == b.k_ && a.labels_ == b.labels_;
    }

private:
    std::vector<int> labels_;
    int k_ = 0;
    bool degenerate_ = false;
};

/// A labeling used only to define connectivity profiles. Its region count m
/// is unrelated to the parcellation target k; the representation is shared.
using Segmentation = Parcellation;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n x m cumulative connectivity of each voxel to each segmentation region.
struct ProfileMatrix {
    RowMatrix values;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

// ---- text formats -------------------------------------------------------

/// "%.17g"; round-trips every finite double.
std::string format_double(double v);

BrainMask read_mask(std::istream& in);
BrainMask read_mask(const std::filesystem::path& path);
void write_mask(const BrainMask& mask, std::ostream& out);
void write_mask(const BrainMask& mask, const std::filesystem::path& path);

/// Reads the text format, or the binary twin when the file starts with its
/// magic bytes.
SparseConnectivity read_connectivity(std::istream& in, const BrainMask& mask);
SparseConnectivity read_connectivity(const std::filesystem::path& path, const BrainMask& mask);
void write_connectivity(const SparseConnectivity& conn, std::ostream& out);
void write_connectivity(const SparseConnectivity& conn, const std::filesystem::path& path);

/// Little-endian binary twin: "BPCONN01", u64 n, u64 nnz, nnz * (u32 i, u32 j, f64 w).
void write_connectivity_binary(const SparseConnectivity& conn, std::ostream& out);
void write_connectivity_binary(const SparseConnectivity& conn, const std::filesystem::path& path);

Parcellation read_parcellation(std::istream& in);
Parcellation read_parcellation(std::istream& in, const BrainMask& mask);
Parcellation read_parcellation(const std::filesystem::path& path, const BrainMask& mask);
/// Reads without a mask; the voxel count comes from the header.
Parcellation read_parcellation(const std::filesystem::path& path);
void write_parcellation(const Parcellation& parc, std::ostream& out);
void write_parcellation(const Parcellation& parc, const std::filesystem::path& path);

/// Dense TSV dump of a profile matrix (debugging aid).
void write_profiles_tsv(const ProfileMatrix& profiles, std::ostream& out);

}  // namespace brainparc
