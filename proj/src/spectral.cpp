#include "brainparc/spectral.hpp"

#include "brainparc/error.hpp"
#include "brainparc/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace brainparc {

// ---- operator ---------------------------------------------------------------

namespace {

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t v) {
    while (parent[v] != v) {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    return v;
}

}  // namespace

NormalizedLaplacian::NormalizedLaplacian(const SimilarityGraph& graph) : n_(graph.n) {
    degree_.assign(n_, 0.0);
    std::vector<std::size_t> count(n_, 0);
    for (const auto& e : graph.edges) {
        if (!(e.w >= 0.0) || !std::isfinite(e.w)) {
            throw InputError("negative or non-finite edge weight (" + std::to_string(e.i) + ", " +
                             std::to_string(e.j) + ")");
        }
        if (e.i >= n_ || e.j >= n_ || e.i == e.j) throw InputError("invalid edge in similarity graph");
        if (e.w == 0.0) continue;
        ++count[e.i];
        ++count[e.j];
    }

    row_ptr_.assign(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i) row_ptr_[i + 1] = row_ptr_[i] + count[i];
    col_.resize(row_ptr_[n_]);
    val_.resize(row_ptr_[n_]);
    std::vector<std::size_t> fill(row_ptr_.begin(), row_ptr_.end() - 1);
    std::vector<double> raw(row_ptr_[n_]);
    // Scatter both directions, then sort each row by column.
    for (const auto& e : graph.edges) {
        if (e.w == 0.0) continue;
        col_[fill[e.i]] = e.j;
        raw[fill[e.i]++] = e.w;
    }
    for (const auto& e : graph.edges) {
        if (e.w == 0.0) continue;
        col_[fill[e.j]] = e.i;
        raw[fill[e.j]++] = e.w;
    }
    for (std::size_t i = 0; i < n_; ++i) {
        auto begin = row_ptr_[i], end = row_ptr_[i + 1];
        std::vector<std::size_t> perm(end - begin);
        std::iota(perm.begin(), perm.end(), begin);
        std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return col_[a] < col_[b]; });
        std::vector<std::uint32_t> c(perm.size());
        std::vector<double> w(perm.size());
        for (std::size_t t = 0; t < perm.size(); ++t) {
            c[t] = col_[perm[t]];
            w[t] = raw[perm[t]];
        }
        double d = 0.0;
        for (std::size_t t = 0; t < perm.size(); ++t) {
            col_[begin + t] = c[t];
            raw[begin + t] = w[t];
            d += w[t];
        }
        degree_[i] = d;
    }

    diag_.assign(n_, 0.0);
    std::vector<double> inv_sqrt(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        if (degree_[i] > 0.0) {
            diag_[i] = 1.0;
            inv_sqrt[i] = 1.0 / std::sqrt(degree_[i]);
        } else {
            ++isolated_;
        }
    }
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t t = row_ptr_[i]; t < row_ptr_[i + 1]; ++t) val_[t] = -raw[t] * inv_sqrt[i] * inv_sqrt[col_[t]];

    // Components of the positive-weight graph.
    std::vector<std::uint32_t> parent(n_);
    std::iota(parent.begin(), parent.end(), 0u);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t t = row_ptr_[i]; t < row_ptr_[i + 1]; ++t) {
            const auto a = find_root(parent, static_cast<std::uint32_t>(i));
            const auto b = find_root(parent, col_[t]);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
        }
    // Roots are the smallest member of each component.
    std::vector<std::uint32_t> root(n_);
    std::vector<std::size_t> size_by_root(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
        root[i] = find_root(parent, static_cast<std::uint32_t>(i));
        ++size_by_root[root[i]];
    }
    std::vector<std::uint32_t> roots;
    for (std::size_t i = 0; i < n_; ++i)
        if (root[i] == i) roots.push_back(static_cast<std::uint32_t>(i));
    std::stable_sort(roots.begin(), roots.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return size_by_root[a] > size_by_root[b]; });
    std::vector<std::uint32_t> number(n_, 0);
    for (std::size_t c = 0; c < roots.size(); ++c) {
        number[roots[c]] = static_cast<std::uint32_t>(c);
        component_sizes_.push_back(size_by_root[roots[c]]);
    }
    component_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) component_[i] = number[root[i]];
}

void NormalizedLaplacian::apply(const Eigen::MatrixXd& x, Eigen::MatrixXd& y) const {
    const Eigen::Index b = x.cols();
    y.resize(static_cast<Eigen::Index>(n_), b);

#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < static_cast<std::int64_t>(n_); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        for (Eigen::Index c = 0; c < b; ++c) {
            double s = diag_[i] * x(ii, c);
            for (std::size_t t = row_ptr_[i]; t < row_ptr_[i + 1]; ++t) s += val_[t] * x(col_[t], c);
            y(ii, c) = s;
        }
    }
}

Eigen::MatrixXd NormalizedLaplacian::apply(const Eigen::MatrixXd& x) const {
    Eigen::MatrixXd y;
    apply(x, y);
    return y;
}

Eigen::MatrixXd NormalizedLaplacian::kernel_basis(std::size_t count) const {
    count = std::min(count, component_count());
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < n_; ++i) {
        const auto c = component_[i];
        if (c >= count) continue;
        basis(static_cast<Eigen::Index>(i), c) = degree_[i] > 0.0 ? std::sqrt(degree_[i]) : 1.0;
    }
    for (Eigen::Index c = 0; c < basis.cols(); ++c) basis.col(c).normalize();
    return basis;
}

Eigen::SparseMatrix<double> unnormalized_laplacian(const SimilarityGraph& graph) {
    std::vector<Eigen::Triplet<double>> t;
    std::vector<double> degree(graph.n, 0.0);
    for (const auto& e : graph.edges) {
        t.emplace_back(e.i, e.j, -e.w);
        t.emplace_back(e.j, e.i, -e.w);
        degree[e.i] += e.w;
        degree[e.j] += e.w;
    }
    for (std::size_t i = 0; i < graph.n; ++i) t.emplace_back(i, i, degree[i]);
    const auto n = static_cast<Eigen::Index>(graph.n);
    Eigen::SparseMatrix<double> l(n, n);
    l.setFromTriplets(t.begin(), t.end());
    return l;
}

// ---- eigensolver ------------------------------------------------------------

namespace {

/// Projects vectors onto the orthogonal complement of the exact kernel.
/// Isolated vertices are handled by zeroing their coordinate.
class KernelProjector {
public:
    KernelProjector(const NormalizedLaplacian& op, const Eigen::MatrixXd& kernel) {
        std::vector<Eigen::Index> dense_cols;
        for (Eigen::Index c = 0; c < kernel.cols(); ++c) {
            if (op.component_sizes()[static_cast<std::size_t>(c)] > 1) dense_cols.push_back(c);
        }
        for (std::size_t i = 0; i < op.size(); ++i)
            if (op.degrees()[i] == 0.0) isolated_.push_back(static_cast<Eigen::Index>(i));
        dense_.resize(kernel.rows(), static_cast<Eigen::Index>(dense_cols.size()));
        for (std::size_t t = 0; t < dense_cols.size(); ++t) {
            dense_.col(static_cast<Eigen::Index>(t)) = kernel.col(dense_cols[t]);
        }
    }

    void project(Eigen::MatrixXd& x) const {
        for (const auto i : isolated_) x.row(i).setZero();
        if (dense_.cols() > 0) x.noalias() -= dense_ * (dense_.transpose() * x);
    }

    std::size_t dimension() const noexcept { return isolated_.size() + static_cast<std::size_t>(dense_.cols()); }

private:
    std::vector<Eigen::Index> isolated_;
    Eigen::MatrixXd dense_;
};

/// Block Krylov workspace: orthonormal basis V and its image A V.
class KrylovBasis {
public:
    KrylovBasis(Eigen::Index n, Eigen::Index capacity)
        : v_(n, capacity), av_(n, capacity), h_(capacity, capacity) {}

    Eigen::Index cols() const noexcept { return cols_; }
    Eigen::Index capacity() const noexcept { return v_.cols(); }
    auto basis() const { return v_.leftCols(cols_); }
    auto image() const { return av_.leftCols(cols_); }

    /// V^T A V for the current basis.
    auto projected() const { return h_.topLeftCorner(cols_, cols_); }

    /// Orthonormalizes `block` against the kernel and the basis (block
    /// classical Gram-Schmidt, two passes), then column by column within the
    /// block. Columns that collapse are replaced by fresh random directions;
    /// columns that cannot be completed are dropped. Returns the accepted
    /// orthonormal columns.
    Eigen::MatrixXd orthonormalize(Eigen::MatrixXd block, const KernelProjector& kernel, std::mt19937_64& rng,
                                   std::size_t space_dim) const {
        std::normal_distribution<double> normal;
        const Eigen::VectorXd norms0 = block.colwise().norm().transpose();
        for (int pass = 0; pass < 2; ++pass) project_out(block, kernel);

        Eigen::MatrixXd out(block.rows(), block.cols());
        Eigen::Index accepted = 0;
        for (Eigen::Index j = 0; j < block.cols(); ++j) {
            if (static_cast<std::size_t>(cols_ + accepted) >= space_dim) break;
            Eigen::MatrixXd z = block.col(j);
            double before = norms0(j);
            for (int attempt = 0; attempt < 4; ++attempt) {
                if (attempt > 0) {
                    for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, 0) = normal(rng);
                    before = z.norm();
                    for (int pass = 0; pass < 2; ++pass) project_out(z, kernel);
                }
                if (!(before > 0.0) || !std::isfinite(before)) continue;
                const double mid = z.norm();
                for (int pass = 0; pass < 2 && accepted > 0; ++pass) {
                    z.noalias() -= out.leftCols(accepted) * (out.leftCols(accepted).transpose() * z);
                }
                double after = z.norm();
                if (after < 1e-3 * mid) {
                    // Heavy cancellation inside the block: restore
                    // orthogonality to the basis as well.
                    project_out(z, kernel);
                    if (accepted > 0) z.noalias() -= out.leftCols(accepted) * (out.leftCols(accepted).transpose() * z);
                    after = z.norm();
                }
                if (after > 1e-10 * before && after > 1e-300) {
                    out.col(accepted++) = z / after;
                    break;
                }
            }
        }
        out.conservativeResize(Eigen::NoChange, accepted);
        return out;
    }

    void append(const Eigen::MatrixXd& q, const Eigen::MatrixXd& aq) {
        const Eigen::Index b = q.cols();
        v_.middleCols(cols_, b) = q;
        av_.middleCols(cols_, b) = aq;
        const Eigen::Index total = cols_ + b;
        const Eigen::MatrixXd cross = v_.leftCols(total).transpose() * aq;
        h_.block(0, cols_, total, b) = cross;
        h_.block(cols_, 0, b, total) = cross.transpose();
        // Symmetrize the new diagonal block.
        const Eigen::MatrixXd d = h_.block(cols_, cols_, b, b);
        h_.block(cols_, cols_, b, b) = 0.5 * (d + d.transpose());
        cols_ = total;
    }

    void reset(const Eigen::MatrixXd& q, const Eigen::MatrixXd& aq) {
        cols_ = 0;
        append(q, aq);
    }

private:
    void project_out(Eigen::MatrixXd& z, const KernelProjector& kernel) const {
        kernel.project(z);
        if (cols_ > 0) z.noalias() -= basis() * (basis().transpose() * z);
    }

    Eigen::MatrixXd v_;
    Eigen::MatrixXd av_;
    Eigen::MatrixXd h_;
    Eigen::Index cols_ = 0;
};

}  // namespace

SpectralEmbedding smallest_eigenvectors(const NormalizedLaplacian& op, std::size_t k,
                                        const EigenSolverOptions& options) {
    const std::size_t n = op.size();
    if (k < 1 || k > n) {
        throw InputError("number of eigenpairs must be in [1, " + std::to_string(n) + "], got " + std::to_string(k));
    }
    SpectralEmbedding out;
    const std::size_t kernel_dim = std::min(k, op.component_count());
    const Eigen::MatrixXd kernel = op.kernel_basis(kernel_dim);
    out.kernel_dim = kernel_dim;

    const std::size_t wanted = k - kernel_dim;
    const auto ni = static_cast<Eigen::Index>(n);
    out.vectors.resize(ni, static_cast<Eigen::Index>(k));
    out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    out.vectors.leftCols(static_cast<Eigen::Index>(kernel_dim)) = kernel;
    if (kernel_dim > 0) {
        const Eigen::MatrixXd lk = op.apply(kernel);
        for (Eigen::Index c = 0; c < lk.cols(); ++c) out.residuals.push_back(lk.col(c).norm());
        out.matvecs += kernel_dim;
    }
    if (wanted == 0) return out;

    const KernelProjector projector(op, kernel);
    const std::size_t space_dim = n - projector.dimension();
    const std::size_t block = std::min(
        space_dim, options.block_size > 0 ? options.block_size : std::max<std::size_t>(8, (wanted + 2) / 3));
    const std::size_t keep = std::min(space_dim, wanted + block);
    const std::size_t capacity = std::min(space_dim, std::max(keep + 3 * block, 2 * keep));
    const std::size_t budget = options.max_matvecs > 0 ? options.max_matvecs : 10 * n;

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd pending(ni, static_cast<Eigen::Index>(block));
    for (Eigen::Index c = 0; c < pending.cols(); ++c)
        for (Eigen::Index r = 0; r < ni; ++r) pending(r, c) = normal(rng);

    KrylovBasis krylov(ni, static_cast<Eigen::Index>(capacity));
    std::vector<double> best(wanted, std::numeric_limits<double>::infinity());
    Eigen::MatrixXd aq;

    while (true) {
        // Expand the basis block by block until it reaches capacity.
        while (static_cast<std::size_t>(krylov.cols()) < capacity) {
            const auto room = static_cast<Eigen::Index>(capacity) - krylov.cols();
            if (pending.cols() > room) pending.conservativeResize(Eigen::NoChange, room);
            const Eigen::MatrixXd q = krylov.orthonormalize(std::move(pending), projector, rng, space_dim);
            if (q.cols() == 0) break;
            op.apply(q, aq);
            projector.project(aq);
            out.matvecs += static_cast<std::size_t>(q.cols());
            krylov.append(q, aq);
            pending = aq;
        }

        // Rayleigh-Ritz on the current basis.
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(krylov.projected());
        if (eig.info() != Eigen::Success) throw NumericalError("Rayleigh-Ritz eigensolve failed", best);
        const auto nk = std::min<Eigen::Index>(static_cast<Eigen::Index>(keep), krylov.cols());
        const auto& s = eig.eigenvectors();
        const Eigen::VectorXd theta = eig.eigenvalues().head(nk);
        Eigen::MatrixXd y = krylov.basis() * s.leftCols(nk);
        Eigen::MatrixXd ay = krylov.image() * s.leftCols(nk);
        Eigen::MatrixXd r = ay - y * theta.asDiagonal();

        std::vector<double> res(static_cast<std::size_t>(nk));
        for (Eigen::Index c = 0; c < nk; ++c) res[static_cast<std::size_t>(c)] = r.col(c).norm();
        bool done = nk >= static_cast<Eigen::Index>(wanted);
        for (std::size_t c = 0; c < wanted && c < res.size(); ++c) {
            best[c] = std::min(best[c], res[c]);
            if (res[c] > options.tol) done = false;
        }
        if (done) {
            const auto w = static_cast<Eigen::Index>(wanted);
            out.vectors.rightCols(w) = y.leftCols(w);
            for (Eigen::Index c = 0; c < w; ++c) {
                out.values(static_cast<Eigen::Index>(kernel_dim) + c) = std::clamp(theta(c), 0.0, 2.0);
                out.residuals.push_back(res[static_cast<std::size_t>(c)]);
            }
            return out;
        }
        if (out.matvecs >= budget) {
            throw NumericalError("eigensolver did not reach tolerance within " + std::to_string(budget) +
                                     " matrix-vector products",
                                 best);
        }

        // Thick restart: keep the leading Ritz vectors, expand from the
        // residuals of the unconverged ones.
        const Eigen::MatrixXd gram = y.transpose() * y;
        if ((gram - Eigen::MatrixXd::Identity(nk, nk)).cwiseAbs().maxCoeff() > 1e-12) {
            const Eigen::LLT<Eigen::MatrixXd> llt(gram);
            const Eigen::MatrixXd rinv =
                llt.matrixU().solve(Eigen::MatrixXd::Identity(nk, nk));
            y = y * rinv;
            ay = ay * rinv;
        }
        krylov.reset(y, ay);
        std::vector<Eigen::Index> order;
        for (Eigen::Index c = 0; c < nk; ++c)
            if (res[static_cast<std::size_t>(c)] > options.tol) order.push_back(c);
        for (Eigen::Index c = 0; c < nk; ++c)
            if (res[static_cast<std::size_t>(c)] <= options.tol) order.push_back(c);
        const auto width = std::min<Eigen::Index>(static_cast<Eigen::Index>(block), static_cast<Eigen::Index>(order.size()));
        pending.resize(ni, width);
        for (Eigen::Index c = 0; c < width; ++c) pending.col(c) = r.col(order[static_cast<std::size_t>(c)]);
        if (capacity == static_cast<std::size_t>(krylov.cols())) {
            // Basis already spans the whole admissible space; a fresh
            // Rayleigh-Ritz pass after re-orthonormalization is all we can do.
            krylov.reset(Eigen::MatrixXd(ni, 0), Eigen::MatrixXd(ni, 0));
            Eigen::MatrixXd restart = y;
            const Eigen::MatrixXd q = krylov.orthonormalize(std::move(restart), projector, rng, space_dim);
            op.apply(q, aq);
            projector.project(aq);
            out.matvecs += static_cast<std::size_t>(q.cols());
            krylov.append(q, aq);
            pending.resize(ni, 0);
        }
    }
}

// ---- clustering -------------------------------------------------------------

RowMatrix normalize_rows(const Eigen::MatrixXd& embedding) {
    RowMatrix rows = embedding;
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        const double norm = rows.row(i).norm();
        if (norm > 0.0) rows.row(i) /= norm;
    }
    return rows;
}

SpectralResult spectral_cluster(const SimilarityGraph& graph, int k, const SpectralParams& params) {
    if (k < 1) throw InputError("k must be >= 1");
    if (static_cast<std::size_t>(k) > graph.n) {
        throw InputError("k = " + std::to_string(k) + " exceeds the number of vertices " + std::to_string(graph.n));
    }
    const NormalizedLaplacian op(graph);
    SpectralResult result;
    result.isolated = op.isolated_count();
    result.components = op.component_count();
    if (k == 1) {
        result.parcellation = Parcellation(std::vector<int>(graph.n, 1), 1);
        result.degenerate = op.isolated_count() == graph.n;
        return result;
    }
    EigenSolverOptions eig = params.eigen;
    eig.seed = derive_seed(params.seed, 0);
    result.embedding = smallest_eigenvectors(op, static_cast<std::size_t>(k), eig);
    const RowMatrix points = normalize_rows(result.embedding.vectors);
    const auto km = kmeans_multi(points, k, params.restarts, derive_seed(params.seed, 1), params.kmeans);
    result.parcellation = Parcellation(km.labels, k);
    result.degenerate = km.degenerate || result.parcellation.degenerate() ||
                        graph.n - op.isolated_count() < static_cast<std::size_t>(k);
    return result;
}

}  // namespace brainparc
