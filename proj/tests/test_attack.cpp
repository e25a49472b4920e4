#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prunelab/attack.hpp"
#include "prunelab/train.hpp"
#include "test_util.hpp"

using namespace prunelab;
using namespace testutil;

namespace {

Network trained_blob_net(const Dataset& train_set, std::uint64_t seed) {
    Network net = build_network(
        ArchSpec::parse("input:1x6x6,flatten,dense:16,relu,dense:3"), seed);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch_size = 32;
    cfg.lr = 0.1;
    cfg.seed = seed;
    train(net, train_set, Objective::natural(), cfg);
    return net;
}

}  // namespace

TEST_CASE("attack config validation") {
    AttackConfig bad;
    bad.epsilon = -0.1;
    CHECK_THROWS(bad.validate());
    bad = AttackConfig{};
    bad.step_size = 0.0;
    bad.iterations = 3;
    CHECK_THROWS(bad.validate());
    AttackConfig ok;
    CHECK_NOTHROW(ok.validate());
    ok.epsilon = 0.0;  // degenerate but legal
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("zero budget or zero iterations return the batch unchanged") {
    Network net = random_small_net(1);
    Tensor batch = random_batch(net, 3, 1);
    auto labels = random_labels(net, 3, 1);

    AttackConfig cfg;
    cfg.epsilon = 0.0;
    CHECK(pgd_attack(net, batch, labels, cfg).data == batch.data);

    cfg = AttackConfig{};
    cfg.iterations = 0;
    CHECK(pgd_attack(net, batch, labels, cfg).data == batch.data);
}

TEST_CASE("pgd output stays inside the ball and in [0,1]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Network net = random_small_net(seed);
        Tensor batch = random_batch(net, 4, seed);
        auto labels = random_labels(net, 4, seed);
        AttackConfig cfg;
        cfg.epsilon = 0.08;
        cfg.step_size = 0.02;
        cfg.iterations = 7;
        cfg.random_start = (seed % 2 == 0);
        Tensor adv = pgd_attack(net, batch, labels, cfg, seed);
        for (std::size_t i = 0; i < adv.numel(); ++i) {
            CHECK(std::abs(adv.data[i] - batch.data[i]) <= cfg.epsilon + 1e-12);
            CHECK(adv.data[i] >= 0.0);
            CHECK(adv.data[i] <= 1.0);
        }
    }
}

TEST_CASE("pgd is deterministic in its seed") {
    Network net = random_small_net(9);
    Tensor batch = random_batch(net, 4, 9);
    auto labels = random_labels(net, 4, 9);
    AttackConfig cfg;
    cfg.random_start = true;
    cfg.iterations = 1;  // keep the random start visible in the output
    Tensor a = pgd_attack(net, batch, labels, cfg, 5);
    Tensor b = pgd_attack(net, batch, labels, cfg, 5);
    CHECK(a.data == b.data);
    Tensor c = pgd_attack(net, batch, labels, cfg, 6);
    CHECK(a.data != c.data);
}

TEST_CASE("pgd does not decrease the loss on a trained net") {
    Dataset train_set = synth_blobs(3, 50, 6, 21);
    Network net = trained_blob_net(train_set, 2);
    Tensor batch = train_set.batch_images(0, 16);
    auto labels = train_set.batch_labels(0, 16);
    const double clean = loss_value(net, batch, labels);
    AttackConfig cfg;
    cfg.epsilon = 0.1;
    cfg.step_size = 0.025;
    cfg.iterations = 10;
    Tensor adv = pgd_attack(net, batch, labels, cfg);
    CHECK(loss_value(net, adv, labels) >= clean - 1e-12);
}

TEST_CASE("attack loss is monotone in the budget") {
    Dataset train_set = synth_blobs(3, 50, 6, 22);
    Network net = trained_blob_net(train_set, 3);
    Tensor batch = train_set.batch_images(0, 32);
    auto labels = train_set.batch_labels(0, 32);
    double prev = -1.0;
    for (double eps : {0.0, 0.02, 0.05, 0.1, 0.2}) {
        AttackConfig cfg;
        cfg.epsilon = eps;
        cfg.step_size = eps / 4.0 + 1e-9;
        cfg.iterations = 10;
        Tensor adv = pgd_attack(net, batch, labels, cfg);
        const double l = loss_value(net, adv, labels);
        CHECK(l >= prev - 1e-9);
        prev = l;
    }
}

TEST_CASE("era equals benign accuracy when the budget is zero") {
    Dataset ds = synth_blobs(3, 20, 6, 30);
    Network net = trained_blob_net(ds, 4);
    AttackConfig cfg;
    cfg.epsilon = 0.0;
    CHECK(era(net, ds, cfg) ==
          doctest::Approx(accuracy(net, ds.images, ds.labels)).epsilon(1e-12));
}

TEST_CASE("era is bounded by benign accuracy and deterministic") {
    Dataset train_set = synth_blobs(3, 60, 6, 31);
    Dataset test_set = synth_blobs(3, 25, 6, 32);
    Network net = trained_blob_net(train_set, 5);
    AttackConfig cfg;
    cfg.epsilon = 0.1;
    cfg.step_size = 0.025;
    cfg.iterations = 10;
    cfg.random_start = true;
    const double r1 = era(net, test_set, cfg, 17);
    const double r2 = era(net, test_set, cfg, 17);
    CHECK(r1 == r2);
    CHECK(r1 >= 0.0);
    CHECK(r1 <= accuracy(net, test_set.images, test_set.labels) + 1e-12);
}
