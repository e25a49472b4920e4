#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prunelab/attack.hpp"
#include "prunelab/data.hpp"
#include "prunelab/network.hpp"

namespace prunelab {

struct MixTrainConfig {
    std::size_t k = 10;     // samples per batch given verified-loss treatment
    double alpha = 0.7;     // weight on the verified loss
    double epsilon = 0.05;  // training perturbation budget
    // linear 0 -> epsilon warmup over this fraction of total epochs
    double rampup_frac = 0.25;

    void validate(std::size_t batch_size) const;
};

enum class ObjectiveKind { Natural, Adversarial, VerifiedRobust };

struct Objective {
    ObjectiveKind kind = ObjectiveKind::Natural;
    AttackConfig attack;     // Adversarial
    MixTrainConfig mixtrain;  // VerifiedRobust

    static Objective natural() { return {}; }
    static Objective adversarial(AttackConfig cfg) {
        return {ObjectiveKind::Adversarial, cfg, {}};
    }
    static Objective verified(MixTrainConfig cfg) {
        return {ObjectiveKind::VerifiedRobust, {}, cfg};
    }
    std::string tag() const;
};

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 128;
    double lr = 0.1;
    // step-wise /10 decay at these fractions of total epochs
    std::vector<double> milestones = {0.5, 0.75, 0.9};
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    bool constant_lr = false;  // fine-tuning preset: keep lr fixed

    void validate() const;
};

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch);

struct OptState {
    std::vector<Tensor> vel_w;
    std::vector<Tensor> vel_b;

    static OptState zeros_like(const Network& net);
};

// velocity <- momentum*velocity + grad + weight_decay*theta; theta -= lr*velocity.
// Masked weights stay exactly zero.
void sgd_step(Network& net, const GradientSet& grads, OptState& state, double lr,
              double momentum, double weight_decay);

struct EpochStats {
    std::size_t epoch;
    double loss;
    double train_acc;
    double lr;
};

using TrainHistory = std::vector<EpochStats>;

// Instrumentation hook: called with each input batch the loss is computed on,
// after any adversarial substitution.
using BatchHook = std::function<void(const Tensor& inputs, std::size_t epoch)>;

TrainHistory train(Network& net, const Dataset& ds, const Objective& objective,
                   const TrainConfig& cfg, OptState* state = nullptr,
                   const BatchHook& hook = nullptr);

// Mean parameter gradient of the objective's loss over the whole dataset.
GradientSet objective_gradient(const Network& net, const Dataset& ds,
                               const Objective& objective, std::size_t batch_size,
                               std::uint64_t seed);

}  // namespace prunelab
