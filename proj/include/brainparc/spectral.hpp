#pragma once

#include "brainparc/data_model.hpp"
#include "brainparc/kmeans.hpp"
#include "brainparc/spatial_graph.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <vector>

namespace brainparc {

/// The operator v -> D^{-1/2} (D - W) D^{-1/2} v of a similarity graph, held
/// in CSR form. Vertices with zero degree get a zero row and column.
class NormalizedLaplacian {
public:
    /// Throws InputError on a negative or non-finite weight.
    explicit NormalizedLaplacian(const SimilarityGraph& graph);

    std::size_t size() const noexcept { return n_; }

    /// Y = L_sym X for an n x b block. Rows are computed independently in a
    /// fixed order, so the result does not depend on the thread count.
    void apply(const Eigen::MatrixXd& x, Eigen::MatrixXd& y) const;
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;

    /// D_ii = sum_j W_ij.
    const std::vector<double>& degrees() const noexcept { return degree_; }
    std::size_t isolated_count() const noexcept { return isolated_; }

    /// Connected components of the positive-weight graph, numbered 0.. in
    /// order of decreasing size (ties: smallest member vertex first).
    const std::vector<std::uint32_t>& component_of() const noexcept { return component_; }
    std::size_t component_count() const noexcept { return component_sizes_.size(); }
    const std::vector<std::size_t>& component_sizes() const noexcept { return component_sizes_; }

    /// Orthonormal basis of the kernel: D^{1/2} 1_C for each component C,
    /// e_i for an isolated vertex. Column order follows component numbering.
    Eigen::MatrixXd kernel_basis(std::size_t count) const;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::uint32_t> col_;
    std::vector<double> val_;       // -w_ij / sqrt(d_i d_j)
    std::vector<double> diag_;      // 1, or 0 for isolated vertices
    std::vector<double> degree_;
    std::size_t isolated_ = 0;
    std::vector<std::uint32_t> component_;
    std::vector<std::size_t> component_sizes_;
};

/// D - W as a sparse matrix (diagnostics and tests).
Eigen::SparseMatrix<double> unnormalized_laplacian(const SimilarityGraph& graph);

struct EigenSolverOptions {
    double tol = 1e-8;
    /// Budget in single-vector operator applications; 0 means 10 * n.
    std::size_t max_matvecs = 0;
    std::uint64_t seed = 0;
    /// Krylov block width; 0 picks max(8, ceil(k / 3)).
    std::size_t block_size = 0;
};

struct SpectralEmbedding {
    Eigen::MatrixXd vectors;   // n x k, orthonormal columns
    Eigen::VectorXd values;    // ascending, in [0, 2]
    std::vector<double> residuals;  // ||L v - lambda v|| per pair
    std::size_t matvecs = 0;
    std::size_t kernel_dim = 0;     // pairs taken from the exact kernel
};

/// The k smallest eigenpairs of L_sym. The kernel is deflated exactly from the
/// component structure; the remaining pairs come from a thick-restart block
/// Krylov iteration with full reorthogonalization and Rayleigh-Ritz
/// extraction. Throws NumericalError (carrying the best residuals) when the
/// budget runs out before every residual is <= tol.
SpectralEmbedding smallest_eigenvectors(const NormalizedLaplacian& op, std::size_t k,
                                        const EigenSolverOptions& options = {});

struct SpectralParams {
    EigenSolverOptions eigen;
    int restarts = 10;
    KMeansOptions kmeans;
    std::uint64_t seed = 0;
};

struct SpectralResult {
    Parcellation parcellation;
    SpectralEmbedding embedding;
    std::size_t isolated = 0;
    std::size_t components = 0;
    /// Fewer than k labels used, or fewer than k vertices carry any weight.
    bool degenerate = false;
};

/// Embedding rows scaled to unit length; zero rows stay zero.
RowMatrix normalize_rows(const Eigen::MatrixXd& embedding);

/// Normalized spectral clustering: smallest-k embedding, row normalization,
/// multi-restart k-means++ on the rows.
SpectralResult spectral_cluster(const SimilarityGraph& graph, int k, const SpectralParams& params = {});

}  // namespace brainparc
