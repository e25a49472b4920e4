#pragma once

#include "prunelab/data.hpp"
#include "prunelab/network.hpp"

namespace prunelab {

struct IntervalBounds {
    Tensor lower;
    Tensor upper;
};

// Sound logit bounds over the input box [clip(x-eps), clip(x+eps)] by interval
// bound propagation. eps=0 collapses to the exact forward pass.
IntervalBounds ibp_bounds(const Network& net, const Tensor& batch, double epsilon);

enum class VerifyResult { VerifiedRobust, Unknown };

// VerifiedRobust iff the true-class lower bound strictly exceeds every rival
// upper bound. x is a single sample (no batch axis).
VerifyResult verify_sample(const Network& net, const Tensor& x, int label, double epsilon);

// Fraction of samples returning VerifiedRobust.
double vra(const Network& net, const Dataset& ds, double epsilon);

// Cross-entropy of the worst-case logit vector (true-class lower bound, rival
// upper bounds). Fills grads (overwrites) when non-null; gradients at masked
// weights are exactly zero.
double robust_loss_ibp(const Network& net, const Tensor& batch,
                       const std::vector<int>& labels, double epsilon,
                       GradientSet* grads = nullptr);

}  // namespace prunelab
