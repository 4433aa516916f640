#include "brainparc/data_model.hpp"

#include "brainparc/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace brainparc {

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary connectivity format assumes a little-endian host");

constexpr char kConnMagic[8] = {'B', 'P', 'C', 'O', 'N', 'N', '0', '1'};

/// Line reader that skips blank and '#' comment lines and tracks the
/// physical line number for diagnostics.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::istringstream& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            fields.clear();
            fields.str(line);
            return true;
        }
        return false;
    }

    std::size_t line() const noexcept { return line_no_; }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

void expect_end(std::istringstream& fields, std::size_t line) {
    std::string extra;
    if (fields >> extra) throw ParseError("unexpected trailing field '" + extra + "'", line);
}

template <class T>
T read_field(std::istringstream& fields, std::size_t line, const char* what) {
    T value{};
    if (!(fields >> value)) throw ParseError(std::string("expected ") + what, line);
    return value;
}

void expect_keyword(std::istringstream& fields, std::size_t line, const std::string& keyword) {
    std::string word;
    if (!(fields >> word) || word != keyword) {
        throw ParseError("expected header '" + keyword + "'", line);
    }
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

bool same_weight(double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b));
}

}  // namespace

// ---- BrainMask ------------------------------------------------------------

BrainMask::BrainMask(Dims dims, std::vector<Voxel> voxels) : dims_(dims), voxels_(std::move(voxels)) {
    if (dims_[0] < 1 || dims_[1] < 1 || dims_[2] < 1) throw InputError("mask dims must be positive");
    if (voxels_.empty()) throw InputError("empty mask");
    const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    if (voxels_.size() > static_cast<std::size_t>(INT32_MAX)) throw InputError("mask too large");
    lookup_.assign(cells, -1);
    for (std::size_t i = 0; i < voxels_.size(); ++i) {
        const Voxel& v = voxels_[i];
        if (v.x < 0 || v.y < 0 || v.z < 0 || v.x >= dims_[0] || v.y >= dims_[1] || v.z >= dims_[2]) {
            throw InputError("coordinate out of bounds for voxel " + std::to_string(i));
        }
        auto& slot = lookup_[linear(v)];
        if (slot >= 0) throw InputError("duplicate coordinate for voxel " + std::to_string(i));
        slot = static_cast<std::int32_t>(i);
    }
}

BrainMask BrainMask::full_grid(Dims dims) {
    std::vector<Voxel> voxels;
    voxels.reserve(static_cast<std::size_t>(std::max(0, dims[0] * dims[1] * dims[2])));
    for (int x = 0; x < dims[0]; ++x)
        for (int y = 0; y < dims[1]; ++y)
            for (int z = 0; z < dims[2]; ++z) voxels.push_back({x, y, z});
    return BrainMask(dims, std::move(voxels));
}

std::int64_t BrainMask::index_of(const Voxel& v) const noexcept {
    if (v.x < 0 || v.y < 0 || v.z < 0 || v.x >= dims_[0] || v.y >= dims_[1] || v.z >= dims_[2]) return -1;
    return lookup_[linear(v)];
}

// ---- SparseConnectivity -----------------------------------------------------

SparseConnectivity SparseConnectivity::from_triplets(std::size_t n, std::vector<ConnEntry> triplets) {
    SparseConnectivity conn(n);
    for (auto& e : triplets) {
        if (e.i >= n || e.j >= n) {
            throw InputError("index out of range: (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                             ") with n=" + std::to_string(n));
        }
        if (!(e.w >= 0.0) || !std::isfinite(e.w)) {
            throw InputError("negative or non-finite weight at (" + std::to_string(e.i) + ", " +
                             std::to_string(e.j) + ")");
        }
        if (e.i > e.j) std::swap(e.i, e.j);
    }
    std::stable_sort(triplets.begin(), triplets.end(), [](const ConnEntry& a, const ConnEntry& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    conn.upper_.reserve(triplets.size());
    for (std::size_t t = 0; t < triplets.size(); ++t) {
        const ConnEntry& e = triplets[t];
        if (t > 0 && triplets[t - 1].i == e.i && triplets[t - 1].j == e.j) {
            if (!same_weight(triplets[t - 1].w, e.w)) {
                throw InputError("asymmetric entry (" + std::to_string(e.i) + ", " + std::to_string(e.j) + ")");
            }
            continue;
        }
        if (e.w > 0.0) conn.upper_.push_back(e);
    }
    return conn;
}

double SparseConnectivity::at(std::size_t i, std::size_t j) const noexcept {
    if (i > j) std::swap(i, j);
    const auto it = std::lower_bound(upper_.begin(), upper_.end(), std::pair{i, j},
                                     [](const ConnEntry& e, const std::pair<std::size_t, std::size_t>& key) {
                                         return e.i != key.first ? e.i < key.first : e.j < key.second;
                                     });
    return (it != upper_.end() && it->i == i && it->j == j) ? it->w : 0.0;
}

std::vector<double> SparseConnectivity::strengths() const {
    std::vector<double> s(n_, 0.0);
    for (const auto& e : upper_) {
        s[e.i] += e.w;
        if (e.j != e.i) s[e.j] += e.w;
    }
    return s;
}

double SparseConnectivity::total_strength() const noexcept {
    double total = 0.0;
    for (const auto& e : upper_) total += e.w;
    return total;
}

// ---- Parcellation ---------------------------------------------------------

Parcellation::Parcellation(std::vector<int> labels, int k) : labels_(std::move(labels)), k_(k) {
    if (k_ < 1) throw InputError("k must be >= 1");
    std::vector<char> used(static_cast<std::size_t>(k_) + 1, 0);
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        const int l = labels_[i];
        if (l < 1 || l > k_) {
            throw InputError("label " + std::to_string(l) + " outside [1, " + std::to_string(k_) + "] at voxel " +
                             std::to_string(i));
        }
        used[static_cast<std::size_t>(l)] = 1;
    }
    degenerate_ = std::count(used.begin() + 1, used.end(), 1) != k_;
}

Parcellation Parcellation::compact(std::span<const int> raw) {
    std::vector<std::pair<int, int>> seen;  // raw label -> compact label, sorted by raw
    std::vector<int> labels;
    labels.reserve(raw.size());
    int next = 0;
    for (const int r : raw) {
        auto it = std::lower_bound(seen.begin(), seen.end(), r,
                                   [](const std::pair<int, int>& p, int key) { return p.first < key; });
        if (it == seen.end() || it->first != r) it = seen.insert(it, {r, ++next});
        labels.push_back(it->second);
    }
    return Parcellation(std::move(labels), std::max(next, 1));
}

std::vector<std::size_t> Parcellation::region_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k_), 0);
    for (const int l : labels_) ++sizes[static_cast<std::size_t>(l - 1)];
    return sizes;
}

// ---- IO -----------------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

BrainMask read_mask(std::istream& in) {
    LineReader reader(in);
    std::istringstream f;
    if (!reader.next(f)) throw InputError("empty mask");
    expect_keyword(f, reader.line(), "MASK");
    Dims dims{};
    for (auto& d : dims) d = read_field<int>(f, reader.line(), "dimension");
    const auto n = read_field<long long>(f, reader.line(), "voxel count");
    expect_end(f, reader.line());
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw ParseError("dims must be positive", reader.line());
    if (n < 0) throw ParseError("negative voxel count", reader.line());
    if (n == 0) throw InputError("empty mask");

    const std::size_t cells = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<char> taken(cells, 0);
    std::vector<Voxel> voxels;
    voxels.reserve(static_cast<std::size_t>(n));
    while (reader.next(f)) {
        Voxel v;
        v.x = read_field<int>(f, reader.line(), "x");
        v.y = read_field<int>(f, reader.line(), "y");
        v.z = read_field<int>(f, reader.line(), "z");
        expect_end(f, reader.line());
        if (v.x < 0 || v.y < 0 || v.z < 0 || v.x >= dims[0] || v.y >= dims[1] || v.z >= dims[2]) {
            throw ParseError("coordinate out of bounds", reader.line());
        }
        auto& slot = taken[(static_cast<std::size_t>(v.x) * dims[1] + v.y) * dims[2] + v.z];
        if (slot) throw ParseError("duplicate coordinate", reader.line());
        slot = 1;
        voxels.push_back(v);
    }
    if (voxels.size() != static_cast<std::size_t>(n)) {
        throw InputError("mask header declares " + std::to_string(n) + " voxels but file has " +
                         std::to_string(voxels.size()));
    }
    return BrainMask(dims, std::move(voxels));
}

BrainMask read_mask(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_mask(in);
}

void write_mask(const BrainMask& mask, std::ostream& out) {
    const auto& d = mask.dims();
    out << "MASK " << d[0] << ' ' << d[1] << ' ' << d[2] << ' ' << mask.size() << '\n';
    for (const auto& v : mask.voxels()) out << v.x << ' ' << v.y << ' ' << v.z << '\n';
}

void write_mask(const BrainMask& mask, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_mask(mask, out);
}

namespace {

SparseConnectivity read_connectivity_binary(std::istream& in, const BrainMask& mask) {
    std::uint64_t n = 0, nnz = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    in.read(reinterpret_cast<char*>(&nnz), sizeof nnz);
    if (!in) throw InputError("truncated binary connectivity header");
    if (n != mask.size()) {
        throw InputError("connectivity size " + std::to_string(n) + " does not match mask size " +
                         std::to_string(mask.size()));
    }
    std::vector<ConnEntry> triplets(nnz);
    for (auto& e : triplets) {
        in.read(reinterpret_cast<char*>(&e.i), sizeof e.i);
        in.read(reinterpret_cast<char*>(&e.j), sizeof e.j);
        in.read(reinterpret_cast<char*>(&e.w), sizeof e.w);
        if (!in) throw InputError("truncated binary connectivity body");
    }
    return SparseConnectivity::from_triplets(n, std::move(triplets));
}

}  // namespace

SparseConnectivity read_connectivity(std::istream& in, const BrainMask& mask) {
    char magic[sizeof kConnMagic] = {};
    const auto start = in.tellg();
    in.read(magic, sizeof magic);
    if (in && std::memcmp(magic, kConnMagic, sizeof magic) == 0) return read_connectivity_binary(in, mask);
    in.clear();
    in.seekg(start);

    LineReader reader(in);
    std::istringstream f;
    if (!reader.next(f)) throw InputError("empty connectivity file");
    expect_keyword(f, reader.line(), "CONN");
    const auto n = read_field<long long>(f, reader.line(), "n");
    const auto nnz = read_field<long long>(f, reader.line(), "nnz");
    expect_end(f, reader.line());
    if (n < 0 || nnz < 0) throw ParseError("negative size", reader.line());
    if (static_cast<std::size_t>(n) != mask.size()) {
        throw InputError("connectivity size " + std::to_string(n) + " does not match mask size " +
                         std::to_string(mask.size()));
    }
    std::vector<ConnEntry> triplets;
    triplets.reserve(static_cast<std::size_t>(nnz));
    while (reader.next(f)) {
        const auto i = read_field<long long>(f, reader.line(), "i");
        const auto j = read_field<long long>(f, reader.line(), "j");
        const auto w = read_field<double>(f, reader.line(), "w");
        expect_end(f, reader.line());
        if (i < 0 || j < 0 || i >= n || j >= n) throw ParseError("index out of range", reader.line());
        if (w < 0.0) throw ParseError("negative weight", reader.line());
        triplets.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w});
    }
    if (triplets.size() != static_cast<std::size_t>(nnz)) {
        throw InputError("connectivity header declares " + std::to_string(nnz) + " entries but file has " +
                         std::to_string(triplets.size()));
    }
    return SparseConnectivity::from_triplets(static_cast<std::size_t>(n), std::move(triplets));
}

SparseConnectivity read_connectivity(const std::filesystem::path& path, const BrainMask& mask) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    return read_connectivity(in, mask);
}

void write_connectivity(const SparseConnectivity& conn, std::ostream& out) {
    out << "CONN " << conn.size() << ' ' << conn.nnz() << '\n';
    for (const auto& e : conn.upper()) out << e.i << ' ' << e.j << ' ' << format_double(e.w) << '\n';
}

void write_connectivity(const SparseConnectivity& conn, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_connectivity(conn, out);
}

void write_connectivity_binary(const SparseConnectivity& conn, std::ostream& out) {
    const std::uint64_t n = conn.size(), nnz = conn.nnz();
    out.write(kConnMagic, sizeof kConnMagic);
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    out.write(reinterpret_cast<const char*>(&nnz), sizeof nnz);
    for (const auto& e : conn.upper()) {
        out.write(reinterpret_cast<const char*>(&e.i), sizeof e.i);
        out.write(reinterpret_cast<const char*>(&e.j), sizeof e.j);
        out.write(reinterpret_cast<const char*>(&e.w), sizeof e.w);
    }
}

void write_connectivity_binary(const SparseConnectivity& conn, const std::filesystem::path& path) {
    auto out = open_out(path, std::ios::out | std::ios::binary);
    write_connectivity_binary(conn, out);
}

Parcellation read_parcellation(std::istream& in, const BrainMask& mask) {
    auto parc = read_parcellation(in);
    if (parc.size() != mask.size()) {
        throw InputError("parcellation has " + std::to_string(parc.size()) + " voxels but mask has " +
                         std::to_string(mask.size()));
    }
    return parc;
}

Parcellation read_parcellation(const std::filesystem::path& path, const BrainMask& mask) {
    auto in = open_in(path);
    return read_parcellation(in, mask);
}

Parcellation read_parcellation(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_parcellation(in);
}

Parcellation read_parcellation(std::istream& in) {
    LineReader reader(in);
    std::istringstream f;
    if (!reader.next(f)) throw InputError("empty parcellation file");
    expect_keyword(f, reader.line(), "PARC");
    const auto n = read_field<long long>(f, reader.line(), "n");
    const auto k = read_field<long long>(f, reader.line(), "k");
    expect_end(f, reader.line());
    if (n < 0) throw ParseError("negative voxel count", reader.line());
    if (k < 1 || k > INT32_MAX) throw ParseError("k must be >= 1", reader.line());
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    while (reader.next(f)) {
        const auto l = read_field<long long>(f, reader.line(), "label");
        expect_end(f, reader.line());
        if (l < 1 || l > k) {
            throw ParseError("label " + std::to_string(l) + " outside [1, " + std::to_string(k) + "]", reader.line());
        }
        labels.push_back(static_cast<int>(l));
    }
    if (labels.size() != static_cast<std::size_t>(n)) {
        throw InputError("parcellation header declares " + std::to_string(n) + " voxels but file has " +
                         std::to_string(labels.size()));
    }
    return Parcellation(std::move(labels), static_cast<int>(k));
}

void write_parcellation(const Parcellation& parc, std::ostream& out) {
    out << "PARC " << parc.size() << ' ' << parc.k() << '\n';
    for (const int l : parc.labels()) out << l << '\n';
}

void write_parcellation(const Parcellation& parc, const std::filesystem::path& path) {
    auto out = open_out(path);
    write_parcellation(parc, out);
}

void write_profiles_tsv(const ProfileMatrix& profiles, std::ostream& out) {
    for (Eigen::Index i = 0; i < profiles.values.rows(); ++i) {
        for (Eigen::Index c = 0; c < profiles.values.cols(); ++c) {
            if (c) out << '\t';
            out << format_double(profiles.values(i, c));
        }
        out << '\n';
    }
}

}  // namespace brainparc
