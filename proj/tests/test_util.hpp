#pragma once

// Shared helpers for the test suites: tiny random networks and the central
// finite-difference oracle used to check analytic gradients.

#include <cmath>
#include <functional>
#include <random>

#include "prunelab/network.hpp"
#include "prunelab/rng.hpp"

namespace testutil {

using namespace prunelab;

inline Network tiny_dense_net(std::size_t in, std::size_t hidden, std::size_t out,
                              std::uint64_t seed) {
    ArchSpec spec = ArchSpec::parse("input:" + std::to_string(in) + ",dense:" +
                                    std::to_string(hidden) + ",relu,dense:" +
                                    std::to_string(out));
    return build_network(spec, seed);
}

// Random small net drawn from a few shapes (dense and conv), <= 3 param layers.
inline Network random_small_net(std::uint64_t seed) {
    static const char* shapes[] = {
        "input:3,dense:4,relu,dense:2",
        "input:4,dense:3,relu,dense:3",
        "input:1x4x4,conv:2x2s1,relu,flatten,dense:2",
        "input:1x4x4,conv:2x3s1,relu,avgpool:2,flatten,dense:3",
        "input:2,dense:5,relu,dense:4,relu,dense:2",
        "input:1x5x5,conv:2x2s2,relu,flatten,dense:2",
    };
    auto rng = make_rng(mix_seed(seed, 0x7e57));
    std::uniform_int_distribution<std::size_t> pick(0, std::size(shapes) - 1);
    return build_network(ArchSpec::parse(shapes[pick(rng)]), mix_seed(seed, 1));
}

inline Tensor random_batch(const Network& net, std::size_t batch, std::uint64_t seed) {
    std::vector<std::size_t> s{batch};
    s.insert(s.end(), net.input_shape.begin(), net.input_shape.end());
    Tensor t(s);
    auto rng = make_rng(mix_seed(seed, 0xba7c4));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : t.data) v = u(rng);
    return t;
}

inline std::vector<int> random_labels(const Network& net, std::size_t batch,
                                      std::uint64_t seed) {
    std::vector<int> labels(batch);
    auto rng = make_rng(mix_seed(seed, 0x1abe1));
    std::uniform_int_distribution<int> u(0, int(net.num_classes) - 1);
    for (auto& l : labels) l = u(rng);
    return labels;
}

// Central finite difference d loss / d theta for every parameter; returns the
// max relative error against the provided analytic gradient.
inline double max_param_grad_rel_error(Network net, const Tensor& batch,
                                       const std::vector<int>& labels,
                                       const GradientSet& analytic,
                                       const std::function<double(const Network&)>& loss,
                                       double h = 1e-5) {
    double worst = 0.0;
    auto probe = [&](Tensor& theta, const Tensor& grad, const Tensor* mask) {
        for (std::size_t i = 0; i < theta.numel(); ++i) {
            if (mask && mask->data[i] == 0.0) continue;
            const double orig = theta.data[i];
            theta.data[i] = orig + h;
            const double lp = loss(net);
            theta.data[i] = orig - h;
            const double lm = loss(net);
            theta.data[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad.data[i]), 1e-6});
            worst = std::max(worst, std::abs(fd - grad.data[i]) / denom);
        }
    };
    (void)batch;
    (void)labels;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (!net.layers[li].has_params()) continue;
        probe(net.layers[li].weights, analytic.dweights[li], &net.layers[li].mask);
        probe(net.layers[li].bias, analytic.dbias[li], nullptr);
    }
    return worst;
}

inline double max_input_grad_rel_error(const Network& net, Tensor batch,
                                       const std::vector<int>& labels,
                                       const Tensor& analytic, double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < batch.numel(); ++i) {
        const double orig = batch.data[i];
        batch.data[i] = orig + h;
        const double lp = loss_value(net, batch, labels);
        batch.data[i] = orig - h;
        const double lm = loss_value(net, batch, labels);
        batch.data[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic.data[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - analytic.data[i]) / denom);
    }
    return worst;
}

}  // namespace testutil
