#pragma once

#include "brainparc/data_model.hpp"
#include "brainparc/metrics.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace brainparc {

// ---- atlas ------------------------------------------------------------------

struct RelabelResult {
    Parcellation parcellation;
    std::vector<int> mapping;  // mapping[r-1] = reference label of region r
    bool degenerate = false;   // mapping is not a bijection
};

/// Each region of `parc` takes the reference label it overlaps most
/// (ties: smaller reference label). Throws InputError on a k or size mismatch.
RelabelResult relabel_to_reference(const Parcellation& parc, const Parcellation& ref);

struct Atlas {
    Parcellation labels;
    std::vector<double> confidence;  // modal count / N
};

/// Per-voxel modal label (ties: smallest label) over relabeled parcellations.
Atlas majority_atlas(std::span<const Parcellation> parcs);

/// `CONF n` then one confidence per line.
void write_confidence(const Atlas& atlas, std::ostream& out);

// ---- connectomes --------------------------------------------------------------

struct Connectome {
    Eigen::MatrixXd weights;  // k x k symmetric
    int k() const noexcept { return static_cast<int>(weights.rows()); }
};

/// (a, b) = sum of conn(i, j) over unordered voxel pairs with one end in a and
/// the other in b; the diagonal holds within-region pairs and self-loops.
Connectome build_connectome(const SparseConnectivity& conn, const Parcellation& parc);

Connectome read_connectome(std::istream& in);
Connectome read_connectome(const std::filesystem::path& path);
void write_connectome(const Connectome& c, std::ostream& out);

// ---- t-tests ----------------------------------------------------------------

enum class TTestKind { pooled, welch };

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    bool infinite = false;  // zero variance with unequal means
};

/// Two-sample t-test; positive t means mean(xs) > mean(ys). Two-sided p from
/// the regularized incomplete beta function. Throws InputError when a sample
/// has fewer than two values.
TTestResult two_sample_ttest(std::span<const double> xs, std::span<const double> ys,
                             TTestKind kind = TTestKind::pooled);

/// Two-sided tail probability of |t| under Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct EdgewiseResult {
    Eigen::MatrixXd t;
    Eigen::MatrixXd p;
    std::vector<double> thresholds;
    /// maps[m](a, b) = p(a, b) < thresholds[m]
    std::vector<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> maps;
};

EdgewiseResult edgewise_ttests(std::span<const Connectome> group_a, std::span<const Connectome> group_b,
                               std::vector<double> thresholds = {0.05, 0.00005},
                               TTestKind kind = TTestKind::pooled);

/// TSV `a b t p sig@<thr>...`, one row per upper-triangle entry (a <= b, 1-based).
void write_edgewise_report(const EdgewiseResult& r, std::ostream& out);

struct GroupTestResult {
    std::vector<double> within_a;
    std::vector<double> within_b;
    std::vector<double> across;
    TTestResult a_vs_across;
    TTestResult b_vs_across;
    TTestResult a_vs_b;
};

/// Within-A, within-B and across-group pairwise similarities and the three
/// t-tests between them. Each group needs at least three members.
GroupTestResult similarity_group_test(std::span<const Parcellation> group_a, std::span<const Parcellation> group_b,
                                      Metric metric, TTestKind kind = TTestKind::pooled);

/// Three-row table `comparison t p df`.
void write_group_test(const GroupTestResult& r, std::ostream& out);

/// The `count` upper-triangle entries (a <= b, 0-based) with the smallest p;
/// ties in lexicographic (a, b) order.
std::vector<std::pair<int, int>> select_top_edges(const Eigen::MatrixXd& p, std::size_t count);

// ---- classifier ---------------------------------------------------------------

struct ClassifierParams {
    double c = 1.0;       // weight of the mean hinge loss against 0.5 ||w||^2
    int epochs = 200;
    double step = 1.0;    // step at epoch t is step / sqrt(t)
};

struct LinearClassifier {
    Eigen::VectorXd w;
    double b = 0.0;
    /// Training objective after each epoch, on centered features.
    std::vector<double> loss_history;

    double decision(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return x.dot(w) + b; }
    int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const { return decision(x) >= 0.0 ? 1 : -1; }
};

/// Linear max-margin classifier: features are centered on the training mean,
/// then 0.5 ||w||^2 + c * mean hinge is minimized by full-batch subgradient
/// descent with a diminishing step; a step is halved until it does not
/// increase the objective. Labels must be +1/-1 with both classes present.
LinearClassifier train_linear_classifier(const Eigen::MatrixXd& features, std::span<const int> labels,
                                         const ClassifierParams& params = {});

/// Stratified, seeded fold assignment; fold index per sample.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

/// Mean per-fold test accuracy.
double cross_validate(const Eigen::MatrixXd& features, std::span<const int> labels, int folds, std::uint64_t seed,
                      const ClassifierParams& params = {});

/// Edge values of each connectome at the given (a, b) positions, one row per subject.
Eigen::MatrixXd edge_features(std::span<const Connectome> subjects, std::span<const std::pair<int, int>> edges);

}  // namespace brainparc
