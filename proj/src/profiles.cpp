#include "brainparc/profiles.hpp"

#include "brainparc/error.hpp"

namespace brainparc {

ProfileMatrix aggregate_profiles(const SparseConnectivity& conn, const Segmentation& seg) {
    if (seg.size() != conn.size()) {
        throw InputError("segmentation covers " + std::to_string(seg.size()) + " voxels but connectivity has " +
                         std::to_string(conn.size()));
    }
    ProfileMatrix p{RowMatrix::Zero(static_cast<Eigen::Index>(conn.size()), seg.k())};
    const auto& labels = seg.labels();
    for (const auto& e : conn.upper()) {
        p.values(e.i, labels[e.j] - 1) += e.w;
        if (e.i != e.j) p.values(e.j, labels[e.i] - 1) += e.w;
    }
    return p;
}

}  // namespace brainparc
