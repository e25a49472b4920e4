#include "prunelab/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prunelab/kernels.hpp"
#include "prunelab/rng.hpp"
#include "prunelab/verify.hpp"

namespace prunelab {

void MixTrainConfig::validate(std::size_t batch_size) const {
    if (k < 1) throw std::invalid_argument("mixtrain k must be >= 1");
    if (batch_size > 0 && k > batch_size)
        throw std::invalid_argument("mixtrain k exceeds batch size");
    if (alpha < 0.0 || alpha > 1.0)
        throw std::invalid_argument("mixtrain alpha must be in [0,1]");
    if (epsilon < 0.0) throw std::invalid_argument("mixtrain epsilon must be >= 0");
}

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("lr must be > 0");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    double prev = 0.0;
    for (double m : milestones) {
        if (m <= prev || m > 1.0)
            throw std::invalid_argument("lr milestones must be strictly increasing in (0,1]");
        prev = m;
    }
}

std::string Objective::tag() const {
    switch (kind) {
        case ObjectiveKind::Natural: return "natural";
        case ObjectiveKind::Adversarial: return "adversarial";
        case ObjectiveKind::VerifiedRobust: return "verified";
    }
    return "?";
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.constant_lr) return cfg.lr;
    const double frac = cfg.epochs == 0 ? 0.0 : double(epoch) / double(cfg.epochs);
    double lr = cfg.lr;
    for (double m : cfg.milestones)
        if (frac >= m) lr *= 0.1;
    return lr;
}

OptState OptState::zeros_like(const Network& net) {
    OptState s;
    for (const auto& l : net.layers) {
        s.vel_w.emplace_back(l.weights.shape);
        s.vel_b.emplace_back(l.bias.shape);
    }
    return s;
}

void sgd_step(Network& net, const GradientSet& grads, OptState& state, double lr,
              double momentum, double weight_decay) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& l = net.layers[i];
        if (!l.has_params()) continue;
        auto step = [&](Tensor& theta, Tensor& vel, const Tensor& g) {
            for (std::size_t j = 0; j < theta.numel(); ++j) {
                vel.data[j] = momentum * vel.data[j] + g.data[j] +
                              weight_decay * theta.data[j];
                theta.data[j] -= lr * vel.data[j];
            }
        };
        step(l.weights, state.vel_w[i], grads.dweights[i]);
        step(l.bias, state.vel_b[i], grads.dbias[i]);
        // pruned weights stay exactly zero
        kern::ops().hadamard(l.weights.data.data(), l.mask.data.data(), l.weights.numel());
    }
}

namespace {

// Combined loss gradient for one batch under the given objective. Returns the
// loss value. eps_scale scales the verified-training epsilon (warmup).
double batch_objective_grad(const Network& net, const Tensor& images,
                            const std::vector<int>& labels, const Objective& obj,
                            double eps_scale, std::uint64_t seed, GradientSet& grads,
                            const BatchHook& hook, std::size_t epoch) {
    switch (obj.kind) {
        case ObjectiveKind::Natural: {
            if (hook) hook(images, epoch);
            return loss_and_grad(net, images, labels, grads);
        }
        case ObjectiveKind::Adversarial: {
            Tensor adv = pgd_attack(net, images, labels, obj.attack, seed);
            if (hook) hook(adv, epoch);
            return loss_and_grad(net, adv, labels, grads);
        }
        case ObjectiveKind::VerifiedRobust: {
            const MixTrainConfig& mt = obj.mixtrain;
            if (hook) hook(images, epoch);
            if (mt.alpha == 0.0) return loss_and_grad(net, images, labels, grads);

            const std::size_t batch = images.shape[0];
            const std::size_t k = std::min(mt.k, batch);
            // verified loss on k randomly chosen samples of the batch
            std::vector<std::size_t> idx(batch);
            for (std::size_t i = 0; i < batch; ++i) idx[i] = i;
            auto rng = make_rng(mix_seed(seed, 0x5e1ec7));
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(k);

            const std::size_t sample = images.numel() / batch;
            std::vector<std::size_t> s{k};
            s.insert(s.end(), images.shape.begin() + 1, images.shape.end());
            Tensor vimages(s);
            std::vector<int> vlabels(k);
            for (std::size_t i = 0; i < k; ++i) {
                std::copy_n(images.data.begin() + idx[i] * sample, sample,
                            vimages.data.begin() + i * sample);
                vlabels[i] = labels[idx[i]];
            }

            GradientSet vgrads;
            const double eps = mt.epsilon * eps_scale;
            double vloss = robust_loss_ibp(net, vimages, vlabels, eps, &vgrads);
            double nloss;
            if (mt.alpha == 1.0) {
                grads = std::move(vgrads);
                return vloss;
            }
            nloss = loss_and_grad(net, images, labels, grads);
            grads.scale(1.0 - mt.alpha);
            grads.add_scaled(vgrads, mt.alpha);
            return mt.alpha * vloss + (1.0 - mt.alpha) * nloss;
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace

TrainHistory train(Network& net, const Dataset& ds, const Objective& objective,
                   const TrainConfig& cfg, OptState* state, const BatchHook& hook) {
    cfg.validate();
    if (objective.kind == ObjectiveKind::VerifiedRobust)
        objective.mixtrain.validate(cfg.batch_size);
    if (objective.kind == ObjectiveKind::Adversarial) objective.attack.validate();

    TrainHistory history;
    if (cfg.epochs == 0) return history;

    OptState local = OptState::zeros_like(net);
    OptState& opt = state ? *state : local;
    BatchIterator it(ds, cfg.batch_size, mix_seed(cfg.seed, 0x17e7));

    const std::size_t ramp_epochs =
        objective.kind == ObjectiveKind::VerifiedRobust
            ? std::max<std::size_t>(
                  1, std::size_t(std::lround(objective.mixtrain.rampup_frac *
                                             double(cfg.epochs))))
            : 1;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        const double eps_scale =
            std::min(1.0, double(epoch + 1) / double(ramp_epochs));
        double loss_sum = 0.0;
        std::size_t batches = it.batches_per_epoch();
        for (std::size_t b = 0; b < batches; ++b) {
            auto batch = it.get(epoch, b);
            GradientSet grads;
            double loss = batch_objective_grad(net, batch.images, batch.labels, objective,
                                               eps_scale,
                                               mix_seed(cfg.seed, epoch * 131071 + b),
                                               grads, hook, epoch);
            loss_sum += loss;
            sgd_step(net, grads, opt, lr, cfg.momentum, cfg.weight_decay);
        }
        double acc = accuracy(net, ds.images, ds.labels);
        history.push_back({epoch, loss_sum / double(batches), acc, lr});
    }
    return history;
}

GradientSet objective_gradient(const Network& net, const Dataset& ds,
                               const Objective& objective, std::size_t batch_size,
                               std::uint64_t seed) {
    GradientSet total = GradientSet::zeros_like(net);
    const std::size_t n = ds.size();
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t count = std::min(batch_size, n - start);
        Tensor images = ds.batch_images(start, count);
        auto labels = ds.batch_labels(start, count);
        GradientSet g;
        switch (objective.kind) {
            case ObjectiveKind::Natural:
                loss_and_grad(net, images, labels, g);
                break;
            case ObjectiveKind::Adversarial: {
                Tensor adv = pgd_attack(net, images, labels, objective.attack,
                                        mix_seed(seed, start));
                loss_and_grad(net, adv, labels, g);
                break;
            }
            case ObjectiveKind::VerifiedRobust: {
                // deterministic full-batch verified loss, alpha-mixed
                const MixTrainConfig& mt = objective.mixtrain;
                GradientSet vg;
                robust_loss_ibp(net, images, labels, mt.epsilon, &vg);
                loss_and_grad(net, images, labels, g);
                g.scale(1.0 - mt.alpha);
                g.add_scaled(vg, mt.alpha);
                break;
            }
        }
        total.add_scaled(g, double(count) / double(n));
    }
    return total;
}

}  // namespace prunelab
