#pragma once

#include "brainparc/data_model.hpp"

#include <cstdint>
#include <vector>

namespace brainparc {

struct SynthSpec {
    Dims dims{20, 20, 10};
    int k_true = 5;
    double mu_in = 1.0;
    double mu_out = 0.1;
    double sigma = 0.1;
    double density = 0.3;  // probability that a voxel pair carries an entry
    std::uint64_t seed = 0;

    /// Throws InputError on an invalid spec.
    void validate() const;
};

struct SynthInstance {
    BrainMask mask;
    SparseConnectivity conn;
    Parcellation truth;
};

/// Planted label per voxel: the grid box is split recursively along its
/// longest axis, k/2 regions to the lower side and the rest above, until each
/// box holds one region. Labels follow depth-first leaf order.
std::vector<int> planted_regions(const BrainMask& mask, int k_true);

/// Whether planted regions a and b (1-based) share a profile target. Identity
/// for k_true <= 3; otherwise a region also targets its two cyclic
/// neighbours.
bool signature_affinity(int a, int b, int k_true);

/// Full-grid instance with box-shaped planted regions. Each voxel pair i < j
/// is present with probability `density`; its strength is mu_in when the
/// regions' signatures agree, mu_out otherwise, plus N(0, sigma^2) noise,
/// clamped at 0. All randomness is a function of (seed, i, j).
SynthInstance generate(const SynthSpec& spec);

/// Reassigns exactly floor(flip_fraction * n) voxels, chosen without
/// replacement, to a uniformly chosen different label.
Parcellation perturb_parcellation(const Parcellation& parc, double flip_fraction, std::uint64_t seed);

}  // namespace brainparc
