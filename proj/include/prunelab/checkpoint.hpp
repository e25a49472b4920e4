#pragma once

#include <string>

#include "prunelab/train.hpp"

namespace prunelab {

// Self-describing container: text header (version, architecture, array table
// of contents, history) followed by little-endian 64-bit float arrays.
// save -> load -> save is byte-identical.
struct Checkpoint {
    static constexpr int kFormatVersion = 1;

    std::string arch;
    std::string config_hash;
    Network net;               // parameters + masks
    OptState opt;              // SGD velocity buffers
    TrainHistory history;

    static Checkpoint from_network(const Network& net, const OptState& opt,
                                   TrainHistory history, std::string config_hash);

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

void write_history_csv(const std::string& path, const TrainHistory& history);

}  // namespace prunelab
