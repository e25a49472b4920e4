#include "prunelab/prune.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prunelab/kernels.hpp"
#include "prunelab/rng.hpp"

namespace prunelab {

void PruneSchedule::validate() const {
    if (target_ratio < 0.0 || target_ratio >= 1.0)
        throw std::invalid_argument("prune target ratio must be in [0,1)");
    if (steps < 1) throw std::invalid_argument("prune steps must be >= 1");
}

double PruneSchedule::cumulative_target(std::size_t j) const {
    const double frac = double(j) / double(steps);
    if (step_schedule == StepSchedule::Linear) return target_ratio * frac;
    // geometric: the kept fraction decays by a constant factor per step
    return 1.0 - std::pow(1.0 - target_ratio, frac);
}

double pruning_ratio(const Network& net) {
    const std::size_t total = net.prunable_count();
    if (total == 0) throw std::invalid_argument("network has no prunable weights");
    std::size_t ones = 0;
    for (const auto& l : net.layers)
        for (double m : l.mask.data) ones += m != 0.0 ? 1 : 0;
    return 1.0 - double(ones) / double(total);
}

namespace {

void apply_mask_to_weights(Network& net) {
    for (auto& l : net.layers)
        if (l.has_params())
            kern::ops().hadamard(l.weights.data.data(), l.mask.data.data(),
                                 l.weights.numel());
}

struct Candidate {
    double magnitude;
    std::size_t layer;
    std::size_t index;
};

void prune_candidates_to(Network& net, std::vector<Candidate>& cands,
                         std::size_t to_zero) {
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.index < b.index;
    });
    std::vector<std::size_t> alive(net.layers.size(), 0);
    for (std::size_t li = 0; li < net.layers.size(); ++li)
        for (double m : net.layers[li].mask.data) alive[li] += m != 0.0 ? 1 : 0;
    // every layer keeps at least one weight; protected candidates are skipped
    std::size_t zeroed = 0;
    for (const Candidate& c : cands) {
        if (zeroed == to_zero) break;
        if (alive[c.layer] <= 1) continue;
        net.layers[c.layer].mask.data[c.index] = 0.0;
        --alive[c.layer];
        ++zeroed;
    }
    if (zeroed < to_zero)
        throw std::runtime_error("layer emptied: cannot reach the requested ratio "
                                 "without removing some layer entirely");
}

}  // namespace

void magnitude_prune(Network& net, double cumulative_ratio, PruneScope scope) {
    if (cumulative_ratio < 0.0 || cumulative_ratio >= 1.0)
        throw std::invalid_argument("cumulative ratio must be in [0,1)");
    const double current = pruning_ratio(net);
    if (cumulative_ratio < current - 1e-12)
        throw std::invalid_argument("cumulative ratio below current pruning ratio");

    if (scope == PruneScope::Global) {
        const std::size_t total = net.prunable_count();
        const std::size_t target_zeros =
            std::size_t(std::floor(cumulative_ratio * double(total)));
        std::size_t zeros = 0;
        for (const auto& l : net.layers)
            for (double m : l.mask.data) zeros += m == 0.0 ? 1 : 0;
        if (target_zeros <= zeros) return;

        std::vector<Candidate> cands;
        cands.reserve(total - zeros);
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            const Layer& l = net.layers[li];
            for (std::size_t i = 0; i < l.weights.numel(); ++i)
                if (l.mask.data[i] != 0.0)
                    cands.push_back({std::abs(l.weights.data[i]), li, i});
        }
        prune_candidates_to(net, cands, target_zeros - zeros);
    } else {
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            Layer& l = net.layers[li];
            if (!l.has_params()) continue;
            const std::size_t total = l.weights.numel();
            const std::size_t target_zeros =
                std::size_t(std::floor(cumulative_ratio * double(total)));
            std::size_t zeros = 0;
            for (double m : l.mask.data) zeros += m == 0.0 ? 1 : 0;
            if (target_zeros <= zeros) continue;
            std::vector<Candidate> cands;
            for (std::size_t i = 0; i < total; ++i)
                if (l.mask.data[i] != 0.0)
                    cands.push_back({std::abs(l.weights.data[i]), li, i});
            prune_candidates_to(net, cands, target_zeros - zeros);
        }
    }
    apply_mask_to_weights(net);
}

namespace {

struct UnitView {
    std::size_t layer;       // parameterized layer index
    std::size_t units;       // output units/channels
    std::size_t slice;       // weights per unit
};

// Zero the mask over output unit u of layer li, and the matching input slice
// of the next parameterized layer.
void zero_unit(Network& net, std::size_t li, std::size_t u) {
    Layer& l = net.layers[li];
    const std::size_t slice = l.weights.numel() / l.weights.shape[0];
    std::fill_n(l.mask.data.begin() + u * slice, slice, 0.0);

    // walk forward to the next parameterized layer, tracking the per-channel
    // spatial extent at its input
    std::size_t j = li + 1;
    for (; j < net.layers.size(); ++j)
        if (net.layers[j].has_params()) break;
    if (j == net.layers.size()) return;
    Layer& next = net.layers[j];
    if (next.kind == LayerKind::Conv2d) {
        // kernel [oc, ic, k, k]: zero input channel u
        const std::size_t oc = next.weights.shape[0], ic = next.weights.shape[1];
        const std::size_t kk = next.kernel * next.kernel;
        for (std::size_t o = 0; o < oc; ++o)
            std::fill_n(next.mask.data.begin() + (o * ic + u) * kk, kk, 0.0);
    } else {
        // dense after (possibly pool+flatten): unit u owns a contiguous block
        // of input columns
        const std::size_t in_dim = next.weights.shape[1];
        const std::size_t out_units = l.weights.shape[0];
        const std::size_t block = in_dim / out_units;
        const std::size_t out_dim = next.weights.shape[0];
        for (std::size_t o = 0; o < out_dim; ++o)
            std::fill_n(next.mask.data.begin() + o * in_dim + u * block, block, 0.0);
    }
}

}  // namespace

void l1_filter_prune(Network& net, double cumulative_ratio) {
    if (cumulative_ratio < 0.0 || cumulative_ratio >= 1.0)
        throw std::invalid_argument("cumulative ratio must be in [0,1)");

    // last parameterized layer is the classifier and keeps all units
    std::size_t last_param = net.layers.size();
    for (std::size_t i = net.layers.size(); i-- > 0;)
        if (net.layers[i].has_params()) {
            last_param = i;
            break;
        }

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& l = net.layers[li];
        if (!l.has_params() || li == last_param) continue;
        const std::size_t units = l.weights.shape[0];
        const std::size_t slice = l.weights.numel() / units;
        const std::size_t target_removed =
            std::size_t(std::floor(cumulative_ratio * double(units)));
        if (target_removed >= units)
            throw std::runtime_error("layer emptied: layer " + std::to_string(li) +
                                     " would lose all units");

        // a unit is alive if any mask entry in its slice is nonzero
        std::vector<std::size_t> alive;
        std::vector<std::pair<double, std::size_t>> norms;  // (l1, unit)
        for (std::size_t u = 0; u < units; ++u) {
            bool any = false;
            double l1 = 0.0;
            for (std::size_t i = 0; i < slice; ++i) {
                const std::size_t idx = u * slice + i;
                if (l.mask.data[idx] != 0.0) {
                    any = true;
                    l1 += std::abs(l.weights.data[idx]);
                }
            }
            if (any) norms.push_back({l1, u});
        }
        const std::size_t removed = units - norms.size();
        if (target_removed <= removed) continue;
        std::stable_sort(norms.begin(), norms.end(),
                         [](const auto& a, const auto& b) {
                             if (a.first != b.first) return a.first < b.first;
                             return a.second < b.second;
                         });
        for (std::size_t i = 0; i < target_removed - removed; ++i)
            zero_unit(net, li, norms[i].second);
    }
    apply_mask_to_weights(net);
}

PipelineResult prune_finetune(const Network& net, const Dataset& train_ds,
                              const Dataset& eval_ds, const PruneSchedule& sched,
                              const TrainConfig& finetune_cfg, const EvalSettings& eval) {
    sched.validate();
    PipelineResult result;
    result.net = net;
    OptState opt = OptState::zeros_like(result.net);

    TrainConfig ft = finetune_cfg;
    ft.epochs = sched.finetune_epochs_per_step;
    ft.lr = sched.finetune_lr;
    ft.constant_lr = true;

    for (std::size_t j = 1; j <= sched.steps; ++j) {
        const double ratio = sched.cumulative_target(j);
        if (sched.mode == PruneMode::Unstructured)
            magnitude_prune(result.net, ratio, sched.unstructured_scope);
        else
            l1_filter_prune(result.net, ratio);

        if (ft.epochs > 0) {
            ft.seed = mix_seed(finetune_cfg.seed, 0xf1e + j);
            train(result.net, train_ds, sched.finetune_objective, ft, &opt);
        }
        EvalReport rep = evaluate(result.net, eval_ds, eval.attack, eval.verify_epsilon,
                                  mix_seed(eval.seed, j));
        rep.step = j;
        rep.objective_tag = sched.finetune_objective.tag();
        result.reports.push_back(rep);
    }
    return result;
}

std::vector<EvalReport> prune_no_finetune(const Network& net, const Dataset& eval_ds,
                                          const std::vector<double>& ratios,
                                          PruneMode mode, const EvalSettings& eval) {
    double prev = -1.0;
    for (double r : ratios) {
        if (r <= prev || r < 0.0 || r >= 1.0)
            throw std::invalid_argument("ratios must be ascending in [0,1)");
        prev = r;
    }
    std::vector<EvalReport> reports;
    std::size_t step = 0;
    for (double r : ratios) {
        Network copy = net;
        if (mode == PruneMode::Unstructured)
            magnitude_prune(copy, r);
        else
            l1_filter_prune(copy, r);
        EvalReport rep = evaluate(copy, eval_ds, eval.attack, eval.verify_epsilon,
                                  mix_seed(eval.seed, step));
        rep.step = step++;
        rep.objective_tag = "none";
        reports.push_back(rep);
    }
    return reports;
}

Network scratch_compact(const ArchSpec& arch, double keep_fraction, std::uint64_t seed) {
    if (keep_fraction <= 0.0 || keep_fraction > 1.0)
        throw std::invalid_argument("keep fraction must be in (0,1]");
    ArchSpec compact = arch;
    std::size_t last_dense = compact.layers.size();
    for (std::size_t i = compact.layers.size(); i-- > 0;)
        if (compact.layers[i].kind == LayerKind::Dense ||
            compact.layers[i].kind == LayerKind::Conv2d) {
            last_dense = i;
            break;
        }
    for (std::size_t i = 0; i < compact.layers.size(); ++i) {
        LayerSpec& ls = compact.layers[i];
        if (i == last_dense) continue;
        if (ls.kind == LayerKind::Dense || ls.kind == LayerKind::Conv2d) {
            const std::size_t kept =
                std::size_t(std::floor(double(ls.units) * keep_fraction));
            if (kept == 0)
                throw std::invalid_argument("keep fraction empties layer " +
                                            std::to_string(i));
            ls.units = kept;
        }
    }
    return build_network(compact, mix_seed(seed, 0x5c7a));
}

}  // namespace prunelab
