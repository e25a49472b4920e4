#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prunelab/prune.hpp"

namespace prunelab {

// Flat line-oriented key=value config with dotted keys. '#' starts a comment.
class KVConfig {
  public:
    static KVConfig parse_file(const std::string& path);
    static KVConfig parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def);
    std::size_t get_size(const std::string& key, std::size_t def);
    bool get_bool(const std::string& key, bool def);

    void set(const std::string& key, const std::string& value);
    const std::map<std::string, std::string>& entries() const { return entries_; }
    const std::vector<std::string>& errors() const { return errors_; }

  private:
    std::map<std::string, std::string> entries_;
    std::vector<std::string> errors_;
};

struct ExperimentConfig {
    std::string arch;

    // data
    std::string data_source = "synth";  // synth | idx
    std::size_t synth_classes = 4;
    std::size_t synth_per_class = 150;
    std::size_t synth_test_per_class = 50;
    std::size_t synth_side = 8;
    std::string idx_train_images, idx_train_labels, idx_test_images, idx_test_labels;

    TrainConfig train_cfg;
    std::string pretrain_objective = "natural";
    AttackConfig attack;
    bool train_attack_random_start = true;
    double verify_epsilon = 0.05;
    MixTrainConfig mixtrain;

    PruneSchedule prune_sched;
    std::string finetune_objective = "natural";

    std::string conflict_obj_a = "natural";
    std::string conflict_obj_b = "verified";
    std::vector<double> stability_ratios;

    std::uint64_t seed = 0;
    std::string out_dir = "run";

    // Throws std::invalid_argument listing every bad field.
    static ExperimentConfig from_kv(KVConfig& kv);

    Objective make_objective(const std::string& name) const;
    Dataset make_train_dataset() const;
    Dataset make_test_dataset() const;
    // Canonical echo of every effective field, for the manifest and hash.
    std::map<std::string, std::string> echo() const;
    std::string hash() const;  // FNV-1a over the canonical echo
};

}  // namespace prunelab
