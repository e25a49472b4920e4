#include "prunelab/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prunelab {

namespace {

std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

KVConfig KVConfig::parse_string(const std::string& text) {
    KVConfig cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            cfg.errors_.push_back("line " + std::to_string(lineno) + ": expected key=value");
            continue;
        }
        cfg.entries_[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KVConfig KVConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

bool KVConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KVConfig::get(const std::string& key, const std::string& def) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? def : it->second;
}

double KVConfig::get_double(const std::string& key, double def) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
        std::size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        errors_.push_back(key + ": not a number ('" + it->second + "')");
        return def;
    }
}

std::size_t KVConfig::get_size(const std::string& key, std::size_t def) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    try {
        std::size_t pos = 0;
        long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size() || v < 0) throw std::invalid_argument("");
        return std::size_t(v);
    } catch (...) {
        errors_.push_back(key + ": not a non-negative integer ('" + it->second + "')");
        return def;
    }
}

bool KVConfig::get_bool(const std::string& key, bool def) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return def;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    errors_.push_back(key + ": not a boolean ('" + it->second + "')");
    return def;
}

void KVConfig::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

ExperimentConfig ExperimentConfig::from_kv(KVConfig& kv) {
    ExperimentConfig c;
    std::vector<std::string> errors;

    c.arch = kv.get("arch", "");
    if (c.arch.empty()) {
        errors.push_back("arch: required");
    } else {
        try {
            ArchSpec::parse(c.arch);
        } catch (const std::exception& e) {
            errors.push_back("arch: " + std::string(e.what()));
        }
    }

    c.data_source = kv.get("data.source", "synth");
    if (c.data_source != "synth" && c.data_source != "idx")
        errors.push_back("data.source: must be synth or idx");
    c.synth_classes = kv.get_size("data.synth.classes", c.synth_classes);
    c.synth_per_class = kv.get_size("data.synth.per_class", c.synth_per_class);
    c.synth_test_per_class = kv.get_size("data.synth.test_per_class", c.synth_test_per_class);
    c.synth_side = kv.get_size("data.synth.side", c.synth_side);
    c.idx_train_images = kv.get("data.idx.train_images", "");
    c.idx_train_labels = kv.get("data.idx.train_labels", "");
    c.idx_test_images = kv.get("data.idx.test_images", "");
    c.idx_test_labels = kv.get("data.idx.test_labels", "");
    if (c.data_source == "idx" &&
        (c.idx_train_images.empty() || c.idx_train_labels.empty()))
        errors.push_back("data.idx.train_images/train_labels: required for idx source");

    c.train_cfg.epochs = kv.get_size("train.epochs", 10);
    c.train_cfg.batch_size = kv.get_size("train.batch_size", 128);
    c.train_cfg.lr = kv.get_double("train.lr", 0.1);
    c.train_cfg.momentum = kv.get_double("train.momentum", 0.9);
    c.train_cfg.weight_decay = kv.get_double("train.weight_decay", 1e-4);
    try {
        c.train_cfg.validate();
    } catch (const std::exception& e) {
        errors.push_back(std::string("train: ") + e.what());
    }

    c.pretrain_objective = kv.get("pretrain.objective", "natural");
    c.finetune_objective = kv.get("prune.objective", "natural");
    for (const auto* s : {&c.pretrain_objective, &c.finetune_objective})
        if (*s != "natural" && *s != "adversarial" && *s != "verified")
            errors.push_back("objective '" + *s + "': must be natural, adversarial or verified");

    c.attack.epsilon = kv.get_double("attack.epsilon", 0.1);
    c.attack.step_size = kv.get_double("attack.step", 0.025);
    c.attack.iterations = kv.get_size("attack.iters", 10);
    c.train_attack_random_start = kv.get_bool("attack.random_start", true);
    try {
        c.attack.validate();
    } catch (const std::exception& e) {
        errors.push_back(std::string("attack: ") + e.what());
    }

    c.verify_epsilon = kv.get_double("verify.epsilon", 0.05);
    if (c.verify_epsilon < 0.0) errors.push_back("verify.epsilon: must be >= 0");

    c.mixtrain.k = kv.get_size("mixtrain.k", 10);
    c.mixtrain.alpha = kv.get_double("mixtrain.alpha", 0.7);
    c.mixtrain.epsilon = kv.get_double("mixtrain.epsilon", c.verify_epsilon);
    c.mixtrain.rampup_frac = kv.get_double("mixtrain.rampup", 0.25);
    try {
        c.mixtrain.validate(c.train_cfg.batch_size);
    } catch (const std::exception& e) {
        errors.push_back(std::string("mixtrain: ") + e.what());
    }

    c.prune_sched.target_ratio = kv.get_double("prune.target", 0.5);
    const std::string mode = kv.get("prune.mode", "unstructured");
    if (mode == "unstructured")
        c.prune_sched.mode = PruneMode::Unstructured;
    else if (mode == "structured")
        c.prune_sched.mode = PruneMode::Structured;
    else
        errors.push_back("prune.mode: must be unstructured or structured");
    c.prune_sched.steps = kv.get_size("prune.steps", 40);
    c.prune_sched.finetune_epochs_per_step = kv.get_size("prune.finetune_epochs", 5);
    c.prune_sched.finetune_lr = kv.get_double("finetune.lr", 0.001);
    const std::string sched = kv.get("prune.schedule", "linear");
    if (sched == "linear")
        c.prune_sched.step_schedule = StepSchedule::Linear;
    else if (sched == "geometric")
        c.prune_sched.step_schedule = StepSchedule::Geometric;
    else
        errors.push_back("prune.schedule: must be linear or geometric");
    const std::string scope = kv.get("prune.scope", "global");
    if (scope == "global")
        c.prune_sched.unstructured_scope = PruneScope::Global;
    else if (scope == "layer")
        c.prune_sched.unstructured_scope = PruneScope::PerLayer;
    else
        errors.push_back("prune.scope: must be global or layer");
    try {
        c.prune_sched.validate();
    } catch (const std::exception& e) {
        errors.push_back(std::string("prune: ") + e.what());
    }

    c.conflict_obj_a = kv.get("conflict.objective_a", "natural");
    c.conflict_obj_b = kv.get("conflict.objective_b", "verified");

    {
        std::string grid = kv.get("stability.ratios", "0,0.1,0.2,0.3,0.5,0.7,0.9,0.95");
        std::stringstream ss(grid);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                c.stability_ratios.push_back(std::stod(tok));
            } catch (...) {
                errors.push_back("stability.ratios: bad entry '" + tok + "'");
            }
        }
    }

    c.seed = kv.get_size("seed", 0);
    c.out_dir = kv.get("out", "run");

    for (const auto& e : kv.errors()) errors.push_back(e);
    if (!errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : errors) msg += "\n  " + e;
        throw std::invalid_argument(msg);
    }

    // fine-tuning objective is attached to the schedule once objectives parse
    c.prune_sched.finetune_objective = c.make_objective(c.finetune_objective);
    return c;
}

Objective ExperimentConfig::make_objective(const std::string& name) const {
    if (name == "natural") return Objective::natural();
    if (name == "adversarial") {
        AttackConfig a = attack;
        a.random_start = train_attack_random_start;
        return Objective::adversarial(a);
    }
    if (name == "verified") return Objective::verified(mixtrain);
    throw std::invalid_argument("unknown objective '" + name + "'");
}

Dataset ExperimentConfig::make_train_dataset() const {
    if (data_source == "synth") {
        Dataset ds = synth_blobs(synth_classes, synth_per_class, synth_side, seed);
        ds.split = "train";
        return ds;
    }
    Dataset ds = load_idx(idx_train_images, idx_train_labels);
    ds.split = "train";
    return ds;
}

Dataset ExperimentConfig::make_test_dataset() const {
    if (data_source == "synth") {
        Dataset ds = synth_blobs(synth_classes, synth_test_per_class, synth_side,
                                 seed + 0x7e57);
        ds.split = "test";
        return ds;
    }
    if (idx_test_images.empty()) {
        Dataset ds = load_idx(idx_train_images, idx_train_labels);
        ds.split = "test";
        return ds;
    }
    Dataset ds = load_idx(idx_test_images, idx_test_labels);
    ds.split = "test";
    return ds;
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
    std::map<std::string, std::string> m;
    m["arch"] = arch;
    m["data.source"] = data_source;
    m["data.synth.classes"] = std::to_string(synth_classes);
    m["data.synth.per_class"] = std::to_string(synth_per_class);
    m["data.synth.test_per_class"] = std::to_string(synth_test_per_class);
    m["data.synth.side"] = std::to_string(synth_side);
    m["data.idx.train_images"] = idx_train_images;
    m["data.idx.train_labels"] = idx_train_labels;
    m["data.idx.test_images"] = idx_test_images;
    m["data.idx.test_labels"] = idx_test_labels;
    m["train.epochs"] = std::to_string(train_cfg.epochs);
    m["train.batch_size"] = std::to_string(train_cfg.batch_size);
    m["train.lr"] = fmt_double(train_cfg.lr);
    m["train.momentum"] = fmt_double(train_cfg.momentum);
    m["train.weight_decay"] = fmt_double(train_cfg.weight_decay);
    m["pretrain.objective"] = pretrain_objective;
    m["attack.epsilon"] = fmt_double(attack.epsilon);
    m["attack.step"] = fmt_double(attack.step_size);
    m["attack.iters"] = std::to_string(attack.iterations);
    m["attack.random_start"] = train_attack_random_start ? "true" : "false";
    m["verify.epsilon"] = fmt_double(verify_epsilon);
    m["mixtrain.k"] = std::to_string(mixtrain.k);
    m["mixtrain.alpha"] = fmt_double(mixtrain.alpha);
    m["mixtrain.epsilon"] = fmt_double(mixtrain.epsilon);
    m["mixtrain.rampup"] = fmt_double(mixtrain.rampup_frac);
    m["prune.target"] = fmt_double(prune_sched.target_ratio);
    m["prune.mode"] =
        prune_sched.mode == PruneMode::Unstructured ? "unstructured" : "structured";
    m["prune.steps"] = std::to_string(prune_sched.steps);
    m["prune.finetune_epochs"] = std::to_string(prune_sched.finetune_epochs_per_step);
    m["prune.objective"] = finetune_objective;
    m["prune.schedule"] =
        prune_sched.step_schedule == StepSchedule::Linear ? "linear" : "geometric";
    m["prune.scope"] =
        prune_sched.unstructured_scope == PruneScope::Global ? "global" : "layer";
    m["finetune.lr"] = fmt_double(prune_sched.finetune_lr);
    m["conflict.objective_a"] = conflict_obj_a;
    m["conflict.objective_b"] = conflict_obj_b;
    {
        std::string grid;
        for (std::size_t i = 0; i < stability_ratios.size(); ++i) {
            if (i) grid += ",";
            grid += fmt_double(stability_ratios[i]);
        }
        m["stability.ratios"] = grid;
    }
    m["seed"] = std::to_string(seed);
    return m;
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [k, v] : echo()) {
        feed(k);
        feed("=");
        feed(v);
        feed("\n");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace prunelab
