#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prunelab/prune.hpp"
#include "test_util.hpp"

using namespace prunelab;
using namespace testutil;

namespace {

std::vector<double> flat_weights(const Network& net) {
    std::vector<double> out;
    for (const auto& l : net.layers) {
        if (!l.has_params()) continue;
        out.insert(out.end(), l.weights.data.begin(), l.weights.data.end());
    }
    return out;
}

std::vector<double> flat_mask(const Network& net) {
    std::vector<double> out;
    for (const auto& l : net.layers) {
        if (!l.has_params()) continue;
        out.insert(out.end(), l.mask.data.begin(), l.mask.data.end());
    }
    return out;
}

}  // namespace

TEST_CASE("schedule validation and cumulative targets") {
    PruneSchedule s;
    s.target_ratio = 1.0;
    CHECK_THROWS(s.validate());
    s = PruneSchedule{};
    s.steps = 0;
    CHECK_THROWS(s.validate());
    s = PruneSchedule{};
    CHECK_NOTHROW(s.validate());

    s.target_ratio = 0.8;
    s.steps = 4;
    s.step_schedule = StepSchedule::Linear;
    CHECK(s.cumulative_target(1) == doctest::Approx(0.2));
    CHECK(s.cumulative_target(2) == doctest::Approx(0.4));
    CHECK(s.cumulative_target(4) == doctest::Approx(0.8));

    s.step_schedule = StepSchedule::Geometric;
    // 1 - (1-t)^(j/steps): keeps the same per-step survival factor
    CHECK(s.cumulative_target(4) == doctest::Approx(0.8));
    CHECK(s.cumulative_target(2) == doctest::Approx(1.0 - std::sqrt(0.2)).epsilon(1e-12));
    CHECK(s.cumulative_target(1) > 0.2);  // constant survival factor front-loads
}

TEST_CASE("magnitude selector zeroes exactly the smallest weights") {
    // weights [0.5, -0.1, 0.3, -0.9], ratio 0.5 -> drop |.1| and |.3|
    Network net = build_network(ArchSpec::parse("input:2,dense:2"), 0);
    net.layers[0].weights.data = {0.5, -0.1, 0.3, -0.9};
    magnitude_prune(net, 0.5);
    CHECK(net.layers[0].mask.data == std::vector<double>{1, 0, 0, 1});
    CHECK(net.layers[0].weights.data == std::vector<double>{0.5, 0, 0, -0.9});
    CHECK(pruning_ratio(net) == doctest::Approx(0.5));
}

TEST_CASE("magnitude selector breaks ties toward the lower index") {
    Network net = build_network(ArchSpec::parse("input:2,dense:2"), 0);
    net.layers[0].weights.data = {0.2, -0.2, 0.2, 0.7};
    magnitude_prune(net, 0.25);  // one weight goes: the first 0.2
    CHECK(net.layers[0].mask.data == std::vector<double>{0, 1, 1, 1});
}

TEST_CASE("ratio zero is a no-op; masks are monotone across steps") {
    Network net = random_small_net(1);
    const auto before = flat_mask(net);
    magnitude_prune(net, 0.0);
    CHECK(flat_mask(net) == before);

    auto prev = flat_mask(net);
    for (double r : {0.2, 0.4, 0.6, 0.8}) {
        magnitude_prune(net, r);
        auto cur = flat_mask(net);
        for (std::size_t i = 0; i < cur.size(); ++i)
            CHECK(cur[i] <= prev[i]);  // once pruned, stays pruned
        prev = cur;
    }
}

TEST_CASE("global magnitude ratio hits floor(ratio * total)") {
    for (std::uint64_t seed = 5; seed < 10; ++seed) {
        Network net = random_small_net(seed);
        const double total = double(net.prunable_count());
        for (double r : {0.3, 0.55, 0.9}) {
            Network copy = net;
            magnitude_prune(copy, r);
            double zeros = 0;
            for (const auto& l : copy.layers)
                for (double m : l.mask.data) zeros += m == 0.0 ? 1.0 : 0.0;
            CHECK(zeros == doctest::Approx(std::floor(r * total)));
        }
    }
}

TEST_CASE("per-layer scope prunes each layer at the ratio") {
    Network net = tiny_dense_net(4, 6, 3, 2);
    magnitude_prune(net, 0.5, PruneScope::PerLayer);
    for (const auto& l : net.layers) {
        if (!l.has_params()) continue;
        double ones = 0;
        for (double m : l.mask.data) ones += m;
        const double total = double(l.mask.numel());
        CHECK(total - ones == doctest::Approx(std::floor(0.5 * total)));
    }
}

TEST_CASE("every layer keeps at least one weight") {
    // single layer: floor(0.99 * 4) = 3 zeros still leaves one survivor
    Network net = build_network(ArchSpec::parse("input:2,dense:2"), 0);
    magnitude_prune(net, 0.99);
    double ones = 0;
    for (double m : net.layers[0].mask.data) ones += m;
    CHECK(ones == 1.0);

    // infeasible: 5 of 6 zeros would have to empty one of the two layers
    Network deep = build_network(ArchSpec::parse("input:1,dense:2,relu,dense:2"), 0);
    CHECK_THROWS_WITH(magnitude_prune(deep, 0.9), doctest::Contains("layer emptied"));
}

TEST_CASE("l1 filter selector drops the low-norm rows") {
    // rows with l1 norms [3.0, 0.2, 1.1, 2.4]; ratio 0.5 -> rows 1 and 2 go
    Network net = build_network(ArchSpec::parse("input:2,dense:4,relu,dense:2"), 0);
    net.layers[0].weights.data = {1.5, -1.5,   // 3.0
                                  0.1, -0.1,   // 0.2
                                  1.0, 0.1,    // 1.1
                                  -2.0, 0.4};  // 2.4
    l1_filter_prune(net, 0.5);
    CHECK(net.layers[0].mask.data == std::vector<double>{1, 1, 0, 0, 0, 0, 1, 1});
    // matching columns of the next dense layer are zeroed too
    for (std::size_t r = 0; r < 2; ++r) {
        CHECK(net.layers[2].mask.data[r * 4 + 0] == 1.0);
        CHECK(net.layers[2].mask.data[r * 4 + 1] == 0.0);
        CHECK(net.layers[2].mask.data[r * 4 + 2] == 0.0);
        CHECK(net.layers[2].mask.data[r * 4 + 3] == 1.0);
    }
}

TEST_CASE("l1 filter pruning never touches the classifier layer") {
    Network net = tiny_dense_net(4, 8, 3, 3);
    l1_filter_prune(net, 0.5);
    const Layer& out = net.layers.back();
    double dropped_rows = 0;
    for (std::size_t u = 0; u < 3; ++u) {
        bool all_zero = true;
        for (std::size_t j = 0; j < 8; ++j)
            if (out.mask.data[u * 8 + j] != 0.0 &&
                net.layers[0].mask.data[j * 4] != 0.0)
                all_zero = false;
        if (all_zero) dropped_rows += 1;
    }
    CHECK(dropped_rows == 0);
}

TEST_CASE("structurally pruned net equals the shrunken dense net") {
    // drop units, then compare against a net rebuilt without them
    Network net = build_network(ArchSpec::parse("input:3,dense:4,relu,dense:2"), 11);
    l1_filter_prune(net, 0.5);

    // find surviving hidden units
    std::vector<std::size_t> alive;
    for (std::size_t u = 0; u < 4; ++u)
        if (net.layers[0].mask.data[u * 3] != 0.0) alive.push_back(u);
    REQUIRE(alive.size() == 2);

    Network small = build_network(ArchSpec::parse("input:3,dense:2,relu,dense:2"), 0);
    for (std::size_t i = 0; i < alive.size(); ++i) {
        for (std::size_t j = 0; j < 3; ++j)
            small.layers[0].weights.data[i * 3 + j] =
                net.layers[0].weights.data[alive[i] * 3 + j];
        small.layers[0].bias.data[i] = net.layers[0].bias.data[alive[i]];
        for (std::size_t r = 0; r < 2; ++r)
            small.layers[2].weights.data[r * 2 + i] =
                net.layers[2].weights.data[r * 4 + alive[i]];
    }
    small.layers[2].bias = net.layers[2].bias;

    auto rng = make_rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor x({4, 3});
    for (auto& v : x.data) v = u(rng);
    Tensor big_out = forward(net, x);
    Tensor small_out = forward(small, x);
    for (std::size_t i = 0; i < big_out.numel(); ++i)
        CHECK(big_out.data[i] == doctest::Approx(small_out.data[i]).epsilon(1e-9));
}

TEST_CASE("structured pruning of a conv layer zeroes next-layer input channels") {
    Network net = build_network(
        ArchSpec::parse("input:1x5x5,conv:4x3s1,relu,conv:2x2s1,relu,flatten,dense:2"), 13);
    l1_filter_prune(net, 0.5);
    // find dropped conv-0 output channels; conv-1 drops its own units too
    const std::size_t k0 = 9;  // 1x3x3
    std::vector<bool> unit_alive(2);
    for (std::size_t o = 0; o < 2; ++o)
        for (std::size_t i = 0; i < 16; ++i)
            if (net.layers[2].mask.data[o * 16 + i] != 0.0) unit_alive[o] = true;
    CHECK((unit_alive[0] || unit_alive[1]));
    for (std::size_t c = 0; c < 4; ++c) {
        const bool dropped = net.layers[0].mask.data[c * k0] == 0.0;
        // conv-1 weights are [2, 4, 2, 2]; input-channel slice c must match
        for (std::size_t o = 0; o < 2; ++o) {
            const double expect = (dropped || !unit_alive[o]) ? 0.0 : 1.0;
            for (std::size_t i = 0; i < 4; ++i)
                CHECK(net.layers[2].mask.data[(o * 4 + c) * 4 + i] == expect);
        }
    }
}

TEST_CASE("prune_finetune runs the full loop and reports each step") {
    Dataset train_ds = synth_blobs(3, 40, 6, 20);
    Dataset eval_ds = synth_blobs(3, 15, 6, 21);
    Network net = build_network(
        ArchSpec::parse("input:1x6x6,flatten,dense:12,relu,dense:3"), 5);
    TrainConfig pre;
    pre.epochs = 8;
    pre.batch_size = 32;
    train(net, train_ds, Objective::natural(), pre);

    PruneSchedule sched;
    sched.target_ratio = 0.6;
    sched.steps = 3;
    sched.finetune_epochs_per_step = 2;
    sched.finetune_lr = 0.01;
    TrainConfig ft;
    ft.batch_size = 32;
    EvalSettings ev;
    ev.attack.epsilon = 0.05;
    ev.attack.step_size = 0.0125;
    ev.attack.iterations = 5;
    ev.verify_epsilon = 0.05;  // same budget so vra <= era <= acc must hold

    PipelineResult res = prune_finetune(net, train_ds, eval_ds, sched, ft, ev);
    REQUIRE(res.reports.size() == 3);
    for (std::size_t j = 0; j < 3; ++j) {
        const EvalReport& r = res.reports[j];
        CHECK(r.step == j + 1);
        CHECK(r.pruning_ratio == doctest::Approx(0.6 * double(j + 1) / 3.0).epsilon(0.02));
        CHECK(r.total_params == net.param_count());
        r.check_ordering();
    }
    CHECK(pruning_ratio(res.net) == doctest::Approx(0.6).epsilon(0.02));
    // fine-tuning happened: surviving weights moved
    CHECK(flat_weights(res.net) != flat_weights(net));
}

TEST_CASE("zero-epoch fine-tuning leaves surviving weights bitwise intact") {
    Dataset ds = synth_blobs(2, 10, 4, 22);
    Network net = build_network(ArchSpec::parse("input:1x4x4,flatten,dense:6,relu,dense:2"), 6);
    PruneSchedule sched;
    sched.target_ratio = 0.5;
    sched.steps = 1;
    sched.finetune_epochs_per_step = 0;
    TrainConfig ft;
    ft.batch_size = 8;
    EvalSettings ev;
    ev.attack.epsilon = 0.0;
    ev.attack.iterations = 0;

    PipelineResult res = prune_finetune(net, ds, ds, sched, ft, ev);
    Network manual = net;
    magnitude_prune(manual, 0.5);
    CHECK(flat_weights(res.net) == flat_weights(manual));
    CHECK(flat_mask(res.net) == flat_mask(manual));
}

TEST_CASE("prune_no_finetune requires ascending ratios and never trains") {
    Dataset ds = synth_blobs(2, 10, 4, 23);
    Network net = build_network(ArchSpec::parse("input:1x4x4,flatten,dense:6,relu,dense:2"), 7);
    EvalSettings ev;
    ev.attack.epsilon = 0.0;
    ev.attack.iterations = 0;
    CHECK_THROWS((void)prune_no_finetune(net, ds, {0.4, 0.2}, PruneMode::Unstructured, ev));

    auto reports = prune_no_finetune(net, ds, {0.0, 0.3, 0.6}, PruneMode::Unstructured, ev);
    REQUIRE(reports.size() == 3);
    CHECK(reports[0].pruning_ratio == 0.0);
    CHECK(reports[2].pruning_ratio == doctest::Approx(0.6).epsilon(0.02));
    // the input net is untouched
    CHECK(pruning_ratio(net) == 0.0);
}

TEST_CASE("scratch_compact shrinks hidden layers, keeps the head") {
    Network small = scratch_compact(
        ArchSpec::parse("input:1x6x6,conv:8x3s1,relu,flatten,dense:20,relu,dense:3"), 0.5, 3);
    CHECK(small.layers[0].units == 4);     // conv filters halved
    CHECK(small.layers.back().units == 3);  // classifier width preserved
    bool found_dense10 = false;
    for (const auto& l : small.layers)
        if (l.kind == LayerKind::Dense && l.units == 10) found_dense10 = true;
    CHECK(found_dense10);
    CHECK(pruning_ratio(small) == 0.0);
    CHECK_THROWS((void)scratch_compact(ArchSpec::parse("input:2,dense:2"), 0.0, 0));
}
