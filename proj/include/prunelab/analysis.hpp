#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prunelab/attack.hpp"
#include "prunelab/train.hpp"
#include "prunelab/verify.hpp"

namespace prunelab {

struct EvalReport {
    double benign_acc = 0.0;
    double era = 0.0;
    double vra = 0.0;
    double pruning_ratio = 0.0;
    std::size_t nonzero_params = 0;
    std::size_t total_params = 0;
    std::size_t step = 0;
    std::string objective_tag;

    void check_ordering() const;  // vra <= era <= benign_acc (same epsilon)
};

struct Curve {
    std::string metric;
    // (pruning_ratio, value), ratios strictly increasing
    std::vector<std::pair<double, double>> points;
};

// Smallest ratio where value < (1 - relative_drop) * value_at_zero, linearly
// interpolated; nullopt if never crossed. Requires a ratio-0 point.
std::optional<double> degradation_threshold(const Curve& curve, double relative_drop);

// Fraction of unmasked weight coordinates where the two gradients have
// strictly opposite signs; zero-gradient coordinates never conflict.
double conflict_fraction(const Network& net, const GradientSet& ga, const GradientSet& gb);

// Same, with the dataset-mean gradients of the two objectives.
double gradient_conflict(const Network& net, const Dataset& ds, const Objective& obj_a,
                         const Objective& obj_b, std::size_t batch_size = 128,
                         std::uint64_t seed = 0);

EvalReport evaluate(const Network& net, const Dataset& ds, const AttackConfig& attack_cfg,
                    double verify_epsilon, std::uint64_t seed = 0);

void write_curves_csv(const std::string& path, const std::vector<Curve>& curves);

}  // namespace prunelab
