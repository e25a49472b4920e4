#include "prunelab/analysis.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "prunelab/prune.hpp"
#include "prunelab/rng.hpp"

namespace prunelab {

void EvalReport::check_ordering() const {
    if (!(vra <= era + 1e-12 && era <= benign_acc + 1e-12))
        throw std::runtime_error("report ordering violated: vra > era or era > acc");
}

std::optional<double> degradation_threshold(const Curve& curve, double relative_drop) {
    if (curve.points.empty()) throw std::invalid_argument("empty curve");
    if (relative_drop <= 0.0 || relative_drop >= 1.0)
        throw std::invalid_argument("relative_drop must be in (0,1)");
    if (curve.points.front().first != 0.0)
        throw std::invalid_argument("curve lacks ratio-0 point");
    const double base = curve.points.front().second;
    const double threshold = (1.0 - relative_drop) * base;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const auto [r0, v0] = curve.points[i - 1];
        const auto [r1, v1] = curve.points[i];
        if (v1 <= threshold + 1e-12) {
            if (v1 >= threshold - 1e-12) return r1;  // boundary counts
            if (v0 <= threshold) return r0;
            const double frac = (v0 - threshold) / (v0 - v1);
            return r0 + frac * (r1 - r0);
        }
    }
    return std::nullopt;
}

double conflict_fraction(const Network& net, const GradientSet& ga, const GradientSet& gb) {
    std::size_t conflicting = 0, considered = 0;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const Layer& l = net.layers[li];
        if (!l.has_params()) continue;
        for (std::size_t i = 0; i < l.weights.numel(); ++i) {
            if (l.mask.data[i] == 0.0) continue;
            ++considered;
            const double a = ga.dweights[li].data[i];
            const double b = gb.dweights[li].data[i];
            if ((a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)) ++conflicting;
        }
    }
    if (considered == 0) throw std::runtime_error("no unmasked weights");
    return double(conflicting) / double(considered);
}

double gradient_conflict(const Network& net, const Dataset& ds, const Objective& obj_a,
                         const Objective& obj_b, std::size_t batch_size,
                         std::uint64_t seed) {
    GradientSet ga = objective_gradient(net, ds, obj_a, batch_size, mix_seed(seed, 1));
    GradientSet gb = objective_gradient(net, ds, obj_b, batch_size, mix_seed(seed, 2));
    return conflict_fraction(net, ga, gb);
}

EvalReport evaluate(const Network& net, const Dataset& ds, const AttackConfig& attack_cfg,
                    double verify_epsilon, std::uint64_t seed) {
    if (ds.size() == 0) throw std::invalid_argument("empty dataset");
    EvalReport rep;
    rep.benign_acc = accuracy(net, ds.images, ds.labels);
    rep.era = era(net, ds, attack_cfg, seed);
    rep.vra = vra(net, ds, verify_epsilon);
    rep.pruning_ratio = pruning_ratio(net);
    rep.nonzero_params = net.nonzero_count();
    rep.total_params = net.param_count();
    return rep;
}

void write_curves_csv(const std::string& path, const std::vector<Curve>& curves) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "pruning_ratio,metric,value\n";
    char buf[64];
    for (const auto& c : curves)
        for (const auto& [r, v] : c.points) {
            std::snprintf(buf, sizeof buf, "%.6f,%s,%.6f\n", r, c.metric.c_str(), v);
            out << buf;
        }
}

}  // namespace prunelab
