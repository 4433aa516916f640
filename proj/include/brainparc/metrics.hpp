#pragma once

#include "brainparc/data_model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace brainparc {

/// Sparse contingency table of two labelings over the same voxels.
struct ContingencyTable {
    struct Cell {
        int a = 0;  // label in A
        int b = 0;  // label in B
        std::uint64_t count = 0;
    };
    std::vector<Cell> cells;                 // nonzero cells sorted by (a, b)
    std::vector<std::uint64_t> row_totals;   // index a-1
    std::vector<std::uint64_t> col_totals;   // index b-1
    std::uint64_t total = 0;
};

/// Throws InputError on length mismatch.
ContingencyTable contingency(const Parcellation& a, const Parcellation& b);

/// MI / ((H(A) + H(B)) / 2) with natural logs and 0 log 0 = 0. Two
/// single-cluster labelings score 1.
double nmi(const Parcellation& a, const Parcellation& b);

/// Dice overlap of the co-membership matrices (diagonal included), computed
/// as 2 sum n_ab^2 / (sum a_i^2 + sum b_j^2) without forming n x n matrices.
double dice(const Parcellation& a, const Parcellation& b);

enum class Metric { nmi, dice };

double similarity(const Parcellation& a, const Parcellation& b, Metric metric);

/// M(s, t) = metric(parcs[s], parcs[t]); diagonal 1.
Eigen::MatrixXd pairwise_similarity(std::span<const Parcellation> parcs, Metric metric);

/// TSV, one row per input, 17 significant digits.
void write_similarity_tsv(const Eigen::MatrixXd& m, std::ostream& out);

}  // namespace brainparc
