#pragma once

#include "brainparc/data_model.hpp"

namespace brainparc {

/// P(i, c) = sum of conn(i, j) over voxels j in region c of `seg`. A self-loop
/// conn(i, i) lands in the column of i's own region. Entries are accumulated
/// in stored (i, j) order so the result is reproducible bit for bit.
ProfileMatrix aggregate_profiles(const SparseConnectivity& conn, const Segmentation& seg);

}  // namespace brainparc
