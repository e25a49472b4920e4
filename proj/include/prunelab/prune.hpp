#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prunelab/analysis.hpp"
#include "prunelab/train.hpp"

namespace prunelab {

enum class PruneMode { Unstructured, Structured };
enum class PruneScope { Global, PerLayer };
enum class StepSchedule { Linear, Geometric };

struct PruneSchedule {
    double target_ratio = 0.5;  // t in [0,1)
    PruneMode mode = PruneMode::Unstructured;
    std::size_t steps = 40;
    std::size_t finetune_epochs_per_step = 5;
    Objective finetune_objective = Objective::natural();
    double finetune_lr = 0.001;
    StepSchedule step_schedule = StepSchedule::Linear;
    PruneScope unstructured_scope = PruneScope::Global;

    void validate() const;
    // cumulative ratio targeted after step j (1-based); reaches target_ratio at j==steps
    double cumulative_target(std::size_t j) const;
};

// 1 - (mask ones) / (prunable weight count)
double pruning_ratio(const Network& net);

// Zero the smallest-|w| unmasked weights until the cumulative ratio is met.
// Ranking is global across layers by default. Ties break toward the lower flat
// index. Throws "layer emptied" if a layer would lose all weights.
void magnitude_prune(Network& net, double cumulative_ratio,
                     PruneScope scope = PruneScope::Global);

// Per layer, zero whole filters (conv output channels) / neurons (dense output
// units) by ascending l1-norm until the removed-unit fraction reaches
// cumulative_ratio. Also zeroes the matching input slices of the next
// parameterized layer. The output layer is never structurally pruned.
void l1_filter_prune(Network& net, double cumulative_ratio);

struct EvalSettings {
    AttackConfig attack;
    double verify_epsilon = 0.05;
    std::uint64_t seed = 0;
};

// Alternating prune / fine-tune pipeline. One EvalReport per step.
struct PipelineResult {
    Network net;
    std::vector<EvalReport> reports;
};
PipelineResult prune_finetune(const Network& net, const Dataset& train_ds,
                              const Dataset& eval_ds, const PruneSchedule& sched,
                              const TrainConfig& finetune_cfg, const EvalSettings& eval);

// Ablation: apply the selector at each ratio to a fresh copy, evaluate, never train.
std::vector<EvalReport> prune_no_finetune(const Network& net, const Dataset& eval_ds,
                                          const std::vector<double>& ratios,
                                          PruneMode mode, const EvalSettings& eval);

// Compact architecture with floor(units*keep_fraction) units in every hidden
// layer (uniform random choice is irrelevant for a fresh initialization, but
// the seed also drives the new init). Output layer width is preserved.
Network scratch_compact(const ArchSpec& arch, double keep_fraction, std::uint64_t seed);

}  // namespace prunelab
