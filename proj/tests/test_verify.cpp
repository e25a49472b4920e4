#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prunelab/attack.hpp"
#include "prunelab/verify.hpp"
#include "test_util.hpp"

using namespace prunelab;
using namespace testutil;

TEST_CASE("eps=0 bounds collapse to the forward pass") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        Network net = random_small_net(seed);
        Tensor batch = random_batch(net, 3, seed);
        Tensor out = forward(net, batch);
        IntervalBounds b = ibp_bounds(net, batch, 0.0);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            CHECK(b.lower.data[i] == doctest::Approx(out.data[i]).epsilon(1e-12));
            CHECK(b.upper.data[i] == doctest::Approx(out.data[i]).epsilon(1e-12));
            CHECK(b.lower.data[i] <= b.upper.data[i]);
        }
    }
}

TEST_CASE("single dense layer bounds match the hand-worked interval") {
    // W = [[1,-2],[3,4]], b = [0.5,-1], x = [0.5,0.5], eps = 0.2
    // box [0.3,0.7]^2; worked out per row with the pos/neg weight split
    Network net = build_network(ArchSpec::parse("input:2,dense:2"), 0);
    net.layers[0].weights.data = {1, -2, 3, 4};
    net.layers[0].bias.data = {0.5, -1.0};
    Tensor x({1, 2}, {0.5, 0.5});
    IntervalBounds b = ibp_bounds(net, x, 0.2);
    CHECK(b.lower.data[0] == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(b.upper.data[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(b.lower.data[1] == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(b.upper.data[1] == doctest::Approx(3.9).epsilon(1e-12));
}

TEST_CASE("input box is clipped to [0,1]") {
    // x = 0.05, eps = 0.1: reachable inputs are [0, 0.15], not [-0.05, 0.15]
    Network net = build_network(ArchSpec::parse("input:1,dense:1"), 0);
    net.layers[0].weights.data = {1.0};
    net.layers[0].bias.data = {0.0};
    Tensor x({1, 1}, {0.05});
    IntervalBounds b = ibp_bounds(net, x, 0.1);
    CHECK(b.lower.data[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.upper.data[0] == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("bounds are sound for sampled perturbations") {
    auto rng = make_rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::uint64_t seed = 20; seed < 26; ++seed) {
        Network net = random_small_net(seed);
        Tensor x = random_batch(net, 1, seed);
        const double eps = 0.07;
        IntervalBounds b = ibp_bounds(net, x, eps);
        for (int trial = 0; trial < 50; ++trial) {
            Tensor xp = x;
            for (auto& v : xp.data)
                v = std::clamp(v + eps * u(rng), 0.0, 1.0);
            Tensor out = forward(net, xp);
            for (std::size_t i = 0; i < out.numel(); ++i) {
                CHECK(out.data[i] >= b.lower.data[i] - 1e-9);
                CHECK(out.data[i] <= b.upper.data[i] + 1e-9);
            }
        }
    }
}

TEST_CASE("bounds nest as the budget grows") {
    for (std::uint64_t seed = 40; seed < 44; ++seed) {
        Network net = random_small_net(seed);
        Tensor x = random_batch(net, 2, seed);
        IntervalBounds narrow = ibp_bounds(net, x, 0.02);
        IntervalBounds wide = ibp_bounds(net, x, 0.1);
        for (std::size_t i = 0; i < narrow.lower.numel(); ++i) {
            CHECK(wide.lower.data[i] <= narrow.lower.data[i] + 1e-12);
            CHECK(wide.upper.data[i] >= narrow.upper.data[i] - 1e-12);
        }
    }
}

TEST_CASE("verify_sample: clear margins verify, ties do not") {
    Network net = build_network(ArchSpec::parse("input:2,dense:2"), 0);
    net.layers[0].weights.data = {1, 0, 0, 1};
    net.layers[0].bias.fill(0.0);
    Tensor x({2}, {1.0, 0.0});
    CHECK(verify_sample(net, x, 0, 0.2) == VerifyResult::VerifiedRobust);
    CHECK(verify_sample(net, x, 1, 0.2) == VerifyResult::Unknown);
    // eps = 0.5 makes l_true == u_rival == 0.5: a tie must stay Unknown
    CHECK(verify_sample(net, x, 0, 0.5) == VerifyResult::Unknown);
}

TEST_CASE("vra at eps=0 equals benign accuracy") {
    Dataset ds = synth_blobs(3, 25, 6, 50);
    Network net = build_network(
        ArchSpec::parse("input:1x6x6,flatten,dense:12,relu,dense:3"), 4);
    CHECK(vra(net, ds, 0.0) ==
          doctest::Approx(accuracy(net, ds.images, ds.labels)).epsilon(1e-12));
}

TEST_CASE("vra shrinks (weakly) as eps grows and never exceeds era") {
    Dataset ds = synth_blobs(3, 30, 6, 51);
    Network net = build_network(
        ArchSpec::parse("input:1x6x6,flatten,dense:12,relu,dense:3"), 5);
    double prev = 2.0;
    for (double eps : {0.0, 0.01, 0.03, 0.08}) {
        const double v = vra(net, ds, eps);
        CHECK(v <= prev + 1e-12);
        prev = v;
        AttackConfig atk;
        atk.epsilon = eps;
        atk.step_size = eps > 0 ? eps / 4.0 : 0.0;
        atk.iterations = eps > 0 ? 10 : 0;
        CHECK(v <= era(net, ds, atk) + 1e-12);
    }
}

TEST_CASE("verified samples cannot be attacked at the same budget") {
    Dataset ds = synth_blobs(3, 20, 6, 52);
    Network net = build_network(
        ArchSpec::parse("input:1x6x6,flatten,dense:10,relu,dense:3"), 6);
    AttackConfig atk;
    atk.epsilon = 0.03;
    atk.step_size = 0.0075;
    atk.iterations = 30;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        Tensor x = ds.batch_images(i, 1);
        Tensor x1(std::vector<std::size_t>(x.shape.begin() + 1, x.shape.end()),
                  x.data);
        if (verify_sample(net, x1, ds.labels[i], atk.epsilon) !=
            VerifyResult::VerifiedRobust)
            continue;
        Tensor adv = pgd_attack(net, x, {ds.labels[i]}, atk, i);
        CHECK(predict(net, adv)[0] == ds.labels[i]);
    }
}

TEST_CASE("robust loss at eps=0 matches the natural loss") {
    for (std::uint64_t seed = 60; seed < 64; ++seed) {
        Network net = random_small_net(seed);
        Tensor batch = random_batch(net, 3, seed);
        auto labels = random_labels(net, 3, seed);
        CHECK(robust_loss_ibp(net, batch, labels, 0.0) ==
              doctest::Approx(loss_value(net, batch, labels)).epsilon(1e-12));
    }
}

TEST_CASE("robust loss dominates the natural loss") {
    for (std::uint64_t seed = 70; seed < 74; ++seed) {
        Network net = random_small_net(seed);
        Tensor batch = random_batch(net, 3, seed);
        auto labels = random_labels(net, 3, seed);
        CHECK(robust_loss_ibp(net, batch, labels, 0.05) >=
              loss_value(net, batch, labels) - 1e-12);
    }
}

TEST_CASE("robust loss gradients match central finite differences") {
    const double eps = 0.04;
    for (std::uint64_t seed = 80; seed < 90; ++seed) {
        Network net = random_small_net(seed);
        Tensor batch = random_batch(net, 2, seed);
        auto labels = random_labels(net, 2, seed);
        GradientSet grads;
        robust_loss_ibp(net, batch, labels, eps, &grads);
        const double err = max_param_grad_rel_error(
            net, batch, labels, grads, [&](const Network& n) {
                return robust_loss_ibp(n, batch, labels, eps);
            });
        CHECK(err < 1e-4);
    }
}

TEST_CASE("robust loss gradients vanish at masked weights") {
    Network net = random_small_net(91);
    auto rng = make_rng(91);
    std::bernoulli_distribution coin(0.5);
    for (auto& l : net.layers)
        for (auto& m : l.mask.data) m = coin(rng) ? 0.0 : 1.0;
    Tensor batch = random_batch(net, 2, 91);
    auto labels = random_labels(net, 2, 91);
    GradientSet grads;
    robust_loss_ibp(net, batch, labels, 0.05, &grads);
    for (std::size_t li = 0; li < net.layers.size(); ++li)
        for (std::size_t i = 0; i < net.layers[li].mask.numel(); ++i)
            if (net.layers[li].mask.data[i] == 0.0)
                CHECK(grads.dweights[li].data[i] == 0.0);
}
