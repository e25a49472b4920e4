#pragma once

#include <cstdint>

#include "prunelab/data.hpp"
#include "prunelab/network.hpp"

namespace prunelab {

struct AttackConfig {
    double epsilon = 0.1;    // l-inf budget in [0,1] pixel units
    double step_size = 0.025;
    std::size_t iterations = 10;
    bool random_start = false;

    void validate() const;
};

// Signed PGD, untargeted. Output stays within the eps ball around batch and
// inside [0,1]. Deterministic given (net, batch, cfg, seed).
Tensor pgd_attack(const Network& net, const Tensor& batch, const std::vector<int>& labels,
                  const AttackConfig& cfg, std::uint64_t seed = 0);

// Fraction of samples still classified correctly after attack.
double era(const Network& net, const Dataset& ds, const AttackConfig& cfg,
           std::uint64_t seed = 0);

}  // namespace prunelab
