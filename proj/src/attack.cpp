#include "prunelab/attack.hpp"

#include <algorithm>
#include <stdexcept>

#include "prunelab/kernels.hpp"
#include "prunelab/parallel.hpp"
#include "prunelab/rng.hpp"

namespace prunelab {

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw std::invalid_argument("attack epsilon must be >= 0");
    if (step_size < 0.0) throw std::invalid_argument("attack step_size must be >= 0");
    if (epsilon > 0.0 && iterations > 0 && step_size == 0.0)
        throw std::invalid_argument("attack step_size must be > 0 for a live attack");
}

Tensor pgd_attack(const Network& net, const Tensor& batch, const std::vector<int>& labels,
                  const AttackConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (cfg.epsilon == 0.0 || cfg.iterations == 0) return batch;

    Tensor adv = batch;
    const std::size_t n = adv.numel();
    if (cfg.random_start) {
        auto rng = make_rng(mix_seed(seed, 0xadf));
        std::uniform_real_distribution<double> u(-cfg.epsilon, cfg.epsilon);
        for (std::size_t i = 0; i < n; ++i) adv.data[i] += u(rng);
        kern::ops().clamp(adv.data.data(), 0.0, 1.0, n);
    }
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        Tensor g = input_grad(net, adv, labels);
        kern::ops().pgd_step(adv.data.data(), g.data.data(), cfg.step_size,
                             batch.data.data(), cfg.epsilon, n);
    }
    return adv;
}

double era(const Network& net, const Dataset& ds, const AttackConfig& cfg,
           std::uint64_t seed) {
    if (ds.size() == 0) throw std::invalid_argument("empty dataset");
    const std::size_t batch_size = 128;
    const std::size_t nb = (ds.size() + batch_size - 1) / batch_size;
    std::vector<std::size_t> counts(nb, 0);
    parallel_ranges(nb, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t b = b0; b < b1; ++b) {
            const std::size_t start = b * batch_size;
            const std::size_t count = std::min(batch_size, ds.size() - start);
            Tensor batch = ds.batch_images(start, count);
            auto labels = ds.batch_labels(start, count);
            Tensor adv = pgd_attack(net, batch, labels, cfg, mix_seed(seed, start));
            auto preds = predict(net, adv);
            for (std::size_t i = 0; i < count; ++i)
                if (preds[i] == labels[i]) ++counts[b];
        }
    });
    std::size_t robust = 0;
    for (std::size_t c : counts) robust += c;
    return double(robust) / double(ds.size());
}

}  // namespace prunelab
