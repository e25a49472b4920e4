#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "prunelab/analysis.hpp"
#include "prunelab/checkpoint.hpp"
#include "prunelab/config.hpp"
#include "prunelab/prune.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prunelab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitShape = 3;
constexpr int kExitMissing = 4;

struct CliError {
    int code;
    std::string message;
};

// One experiment process per run directory.
class RunLock {
  public:
    explicit RunLock(const fs::path& dir) : path_(dir / ".lock") {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (fs::exists(path_))
            throw CliError{kExitConfig, "run directory is locked: " + path_.string()};
        std::ofstream lock(path_);
        lock << "pid " << ::getpid() << "\n";
    }
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

  private:
    fs::path path_;
};

ExperimentConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                             const std::string& out_override, bool paper_momentum) {
    KVConfig kv = [&] {
        try {
            return KVConfig::parse_file(path);
        } catch (const std::exception& e) {
            throw CliError{kExitConfig, e.what()};
        }
    }();
    if (seed) kv.set("seed", std::to_string(*seed));
    if (!out_override.empty()) kv.set("out", out_override);
    if (paper_momentum) kv.set("train.momentum", "0.0001");
    try {
        return ExperimentConfig::from_kv(kv);
    } catch (const std::exception& e) {
        throw CliError{kExitConfig, e.what()};
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    if (path.empty() || !fs::exists(path))
        throw CliError{kExitMissing, "missing checkpoint: " + path};
    try {
        return Checkpoint::load(path);
    } catch (const std::exception& e) {
        throw CliError{kExitMissing, e.what()};
    }
}

void write_manifest(const fs::path& dir, const ExperimentConfig& cfg,
                    const std::string& command, double wall_seconds) {
    json m;
    m["format_version"] = Checkpoint::kFormatVersion;
    m["command"] = command;
    m["config_hash"] = cfg.hash();
    m["seed"] = cfg.seed;
    m["wall_seconds"] = wall_seconds;
    m["config"] = cfg.echo();
    std::ofstream out(dir / "manifest.json");
    out << m.dump(2) << "\n";
}

void write_reports_csv(const fs::path& path, const std::vector<EvalReport>& reports) {
    std::ofstream out(path);
    out << "step,pruning_ratio,benign_acc,era,vra,nonzero_params,total_params,objective\n";
    char buf[256];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,%.6f,%zu,%zu,%s\n", r.step,
                      r.pruning_ratio, r.benign_acc, r.era, r.vra, r.nonzero_params,
                      r.total_params, r.objective_tag.c_str());
        out << buf;
    }
}

AttackConfig eval_attack(const ExperimentConfig& cfg) {
    AttackConfig a = cfg.attack;
    a.random_start = false;  // deterministic evaluation
    return a;
}

EvalSettings eval_settings(const ExperimentConfig& cfg) {
    return {eval_attack(cfg), cfg.verify_epsilon, cfg.seed};
}

int cmd_pretrain(const ExperimentConfig& cfg) {
    RunLock lock(cfg.out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    Dataset train_ds = cfg.make_train_dataset();
    Network net = build_network(ArchSpec::parse(cfg.arch), cfg.seed);

    TrainConfig tc = cfg.train_cfg;
    tc.seed = cfg.seed;
    OptState opt = OptState::zeros_like(net);
    TrainHistory hist = train(net, train_ds, cfg.make_objective(cfg.pretrain_objective),
                              tc, &opt);

    Checkpoint ck = Checkpoint::from_network(net, opt, hist, cfg.hash());
    ck.save((fs::path(cfg.out_dir) / "checkpoint.ckpt").string());
    write_history_csv((fs::path(cfg.out_dir) / "history.csv").string(), hist);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(cfg.out_dir, cfg, "pretrain", wall);
    std::cout << "pretrain done: " << hist.size() << " epochs, checkpoint at "
              << cfg.out_dir << "/checkpoint.ckpt\n";
    return 0;
}

int cmd_prune(const ExperimentConfig& cfg, const std::string& ckpt_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    if (ck.arch != cfg.arch)
        throw CliError{kExitShape, "checkpoint architecture '" + ck.arch +
                                       "' does not match config arch '" + cfg.arch + "'"};
    RunLock lock(cfg.out_dir);
    const auto t0 = std::chrono::steady_clock::now();
    Dataset train_ds = cfg.make_train_dataset();
    Dataset test_ds = cfg.make_test_dataset();

    TrainConfig ft = cfg.train_cfg;
    ft.seed = cfg.seed;
    PipelineResult res =
        prune_finetune(ck.net, train_ds, test_ds, cfg.prune_sched, ft, eval_settings(cfg));

    Checkpoint out_ck =
        Checkpoint::from_network(res.net, OptState::zeros_like(res.net), {}, cfg.hash());
    out_ck.save((fs::path(cfg.out_dir) / "pruned.ckpt").string());
    write_reports_csv(fs::path(cfg.out_dir) / "steps.csv", res.reports);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(cfg.out_dir, cfg, "prune", wall);
    std::cout << "prune done: " << res.reports.size() << " steps, final ratio "
              << pruning_ratio(res.net) << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& ckpt_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    RunLock lock(cfg.out_dir);
    Dataset test_ds = cfg.make_test_dataset();
    EvalReport rep = evaluate(ck.net, test_ds, eval_attack(cfg), cfg.verify_epsilon, cfg.seed);
    rep.objective_tag = "eval";
    write_reports_csv(fs::path(cfg.out_dir) / "eval.csv", {rep});
    write_manifest(cfg.out_dir, cfg, "eval", 0.0);
    std::printf("acc=%.4f era=%.4f vra=%.4f ratio=%.4f nonzero=%zu/%zu\n", rep.benign_acc,
                rep.era, rep.vra, rep.pruning_ratio, rep.nonzero_params, rep.total_params);
    return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const std::string& ckpt_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    RunLock lock(cfg.out_dir);
    Dataset test_ds = cfg.make_test_dataset();
    const double e = era(ck.net, test_ds, eval_attack(cfg), cfg.seed);
    std::ofstream out(fs::path(cfg.out_dir) / "attack.csv");
    char buf[128];
    out << "epsilon,step,iters,era\n";
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%zu,%.6f\n", cfg.attack.epsilon,
                  cfg.attack.step_size, cfg.attack.iterations, e);
    out << buf;
    write_manifest(cfg.out_dir, cfg, "attack", 0.0);
    std::printf("era=%.4f at epsilon=%.4f\n", e, cfg.attack.epsilon);
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const std::string& ckpt_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    RunLock lock(cfg.out_dir);
    Dataset test_ds = cfg.make_test_dataset();
    const double v = vra(ck.net, test_ds, cfg.verify_epsilon);
    std::ofstream out(fs::path(cfg.out_dir) / "verify.csv");
    char buf[64];
    out << "epsilon,vra\n";
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", cfg.verify_epsilon, v);
    out << buf;
    write_manifest(cfg.out_dir, cfg, "verify", 0.0);
    std::printf("vra=%.4f at epsilon=%.4f\n", v, cfg.verify_epsilon);
    return 0;
}

int cmd_conflict(const ExperimentConfig& cfg, const std::string& ckpt_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    RunLock lock(cfg.out_dir);
    Dataset train_ds = cfg.make_train_dataset();
    const double frac =
        gradient_conflict(ck.net, train_ds, cfg.make_objective(cfg.conflict_obj_a),
                          cfg.make_objective(cfg.conflict_obj_b),
                          cfg.train_cfg.batch_size, cfg.seed);
    std::ofstream out(fs::path(cfg.out_dir) / "conflict.csv");
    char buf[128];
    out << "objective_a,objective_b,conflict_fraction\n";
    std::snprintf(buf, sizeof buf, "%s,%s,%.6f\n", cfg.conflict_obj_a.c_str(),
                  cfg.conflict_obj_b.c_str(), frac);
    out << buf;
    write_manifest(cfg.out_dir, cfg, "conflict", 0.0);
    std::printf("%.6f\n", frac);
    return 0;
}

int cmd_stability(const ExperimentConfig& cfg, const std::string& ckpt_path) {
    Checkpoint ck = load_checkpoint(ckpt_path);
    RunLock lock(cfg.out_dir);
    Dataset test_ds = cfg.make_test_dataset();
    auto reports = prune_no_finetune(ck.net, test_ds, cfg.stability_ratios,
                                     cfg.prune_sched.mode, eval_settings(cfg));
    write_reports_csv(fs::path(cfg.out_dir) / "stability.csv", reports);

    Curve acc{"benign_acc", {}}, er{"era", {}}, vr{"vra", {}};
    for (std::size_t i = 0; i < reports.size(); ++i) {
        acc.points.emplace_back(cfg.stability_ratios[i], reports[i].benign_acc);
        er.points.emplace_back(cfg.stability_ratios[i], reports[i].era);
        vr.points.emplace_back(cfg.stability_ratios[i], reports[i].vra);
    }
    write_curves_csv((fs::path(cfg.out_dir) / "curves.csv").string(), {acc, er, vr});
    write_manifest(cfg.out_dir, cfg, "stability", 0.0);
    std::cout << "stability: " << reports.size() << " ratios evaluated\n";
    return 0;
}

int cmd_scratch(const ExperimentConfig& cfg, const std::string& ckpt_path) {
    Checkpoint pruned = load_checkpoint(ckpt_path);
    RunLock lock(cfg.out_dir);
    Dataset train_ds = cfg.make_train_dataset();
    Dataset test_ds = cfg.make_test_dataset();

    const double keep = 1.0 - cfg.prune_sched.target_ratio;
    Network scratch = scratch_compact(ArchSpec::parse(cfg.arch), keep, cfg.seed);
    TrainConfig tc = cfg.train_cfg;
    tc.seed = cfg.seed;
    train(scratch, train_ds, cfg.make_objective(cfg.pretrain_objective), tc);

    EvalReport rs = evaluate(scratch, test_ds, eval_attack(cfg), cfg.verify_epsilon, cfg.seed);
    EvalReport rf =
        evaluate(pruned.net, test_ds, eval_attack(cfg), cfg.verify_epsilon, cfg.seed);

    std::ofstream out(fs::path(cfg.out_dir) / "comparison.csv");
    char buf[256];
    out << "pruning_ratio,acc_scratch,acc_finetuned,era_scratch,era_finetuned\n";
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  cfg.prune_sched.target_ratio, rs.benign_acc, rf.benign_acc, rs.era,
                  rf.era);
    out << buf;
    write_manifest(cfg.out_dir, cfg, "scratch", 0.0);
    std::printf("scratch acc=%.4f era=%.4f | fine-tuned acc=%.4f era=%.4f\n",
                rs.benign_acc, rs.era, rf.benign_acc, rf.era);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compact-and-robust network pruning experiments"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, out_dir;
    std::optional<std::uint64_t> seed;
    bool paper_momentum = false;

    auto add_common = [&](CLI::App* sub, bool needs_ckpt) {
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--out", out_dir, "output run directory");
        sub->add_option("--seed", seed, "seed override");
        sub->add_flag("--paper-momentum", paper_momentum,
                      "use momentum 0.0001 as reported in the reference setup");
        if (needs_ckpt) sub->add_option("--checkpoint", ckpt_path, "checkpoint path");
    };

    auto* pretrain = app.add_subcommand("pretrain", "train a network from scratch");
    add_common(pretrain, false);
    auto* prune = app.add_subcommand("prune", "iterative prune + fine-tune pipeline");
    add_common(prune, true);
    auto* evalc = app.add_subcommand("eval", "full metric report for a checkpoint");
    add_common(evalc, true);
    auto* attack = app.add_subcommand("attack", "empirical robust accuracy (PGD)");
    add_common(attack, true);
    auto* verify = app.add_subcommand("verify", "verifiable robust accuracy (IBP)");
    add_common(verify, true);
    auto* conflict = app.add_subcommand("conflict", "gradient conflict between objectives");
    add_common(conflict, true);
    auto* stability = app.add_subcommand("stability", "pruning without fine-tuning");
    add_common(stability, true);
    auto* scratch = app.add_subcommand("scratch", "train-compact-from-scratch baseline");
    add_common(scratch, true);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = load_config(config_path, seed, out_dir, paper_momentum);
        if (pretrain->parsed()) return cmd_pretrain(cfg);
        if (prune->parsed()) return cmd_prune(cfg, ckpt_path);
        if (evalc->parsed()) return cmd_eval(cfg, ckpt_path);
        if (attack->parsed()) return cmd_attack(cfg, ckpt_path);
        if (verify->parsed()) return cmd_verify(cfg, ckpt_path);
        if (conflict->parsed()) return cmd_conflict(cfg, ckpt_path);
        if (stability->parsed()) return cmd_stability(cfg, ckpt_path);
        if (scratch->parsed()) return cmd_scratch(cfg, ckpt_path);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
