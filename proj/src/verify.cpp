#include "prunelab/verify.hpp"

#include <algorithm>
#include <stdexcept>

#include "prunelab/engine_detail.hpp"
#include "prunelab/kernels.hpp"
#include "prunelab/parallel.hpp"

namespace prunelab {

namespace {

using detail::masked;
using detail::split_pos_neg;

struct IbpTrace {
    // bounds[i] is the input of layer i; bounds[L] the logit bounds
    std::vector<IntervalBounds> bounds;
};

Tensor reshape_to(const Tensor& t, std::vector<std::size_t> shape) {
    Tensor out = t;
    out.shape = std::move(shape);
    return out;
}

IntervalBounds ibp_forward(const Network& net, const Tensor& batch, double epsilon,
                           IbpTrace* trace) {
    if (batch.shape.empty() || batch.shape[0] == 0)
        throw std::invalid_argument("empty batch");
    if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");

    IntervalBounds cur{batch, batch};
    if (epsilon > 0.0) {
        for (auto& v : cur.lower.data) v = std::max(v - epsilon, 0.0);
        for (auto& v : cur.upper.data) v = std::min(v + epsilon, 1.0);
    }
    if (trace) trace->bounds.push_back(cur);

    for (const Layer& l : net.layers) {
        IntervalBounds next;
        switch (l.kind) {
            case LayerKind::Dense: {
                Tensor w = masked(l.weights, l.mask), wp, wn;
                split_pos_neg(w, wp, wn);
                Tensor zero_bias(l.bias.shape);
                next.lower = detail::dense_forward(wp, l.bias, cur.lower);
                Tensor t = detail::dense_forward(wn, zero_bias, cur.upper);
                kern::ops().add(next.lower.data.data(), t.data.data(), t.numel());
                next.upper = detail::dense_forward(wp, l.bias, cur.upper);
                t = detail::dense_forward(wn, zero_bias, cur.lower);
                kern::ops().add(next.upper.data.data(), t.data.data(), t.numel());
                break;
            }
            case LayerKind::Conv2d: {
                Tensor w = masked(l.weights, l.mask), wp, wn;
                split_pos_neg(w, wp, wn);
                Tensor zero_bias(l.bias.shape);
                next.lower = detail::conv_forward(wp, l.bias, cur.lower, l.stride);
                Tensor t = detail::conv_forward(wn, zero_bias, cur.upper, l.stride);
                kern::ops().add(next.lower.data.data(), t.data.data(), t.numel());
                next.upper = detail::conv_forward(wp, l.bias, cur.upper, l.stride);
                t = detail::conv_forward(wn, zero_bias, cur.lower, l.stride);
                kern::ops().add(next.upper.data.data(), t.data.data(), t.numel());
                break;
            }
            case LayerKind::ReLU:
                next.lower = detail::relu_forward(cur.lower);
                next.upper = detail::relu_forward(cur.upper);
                break;
            case LayerKind::Flatten: {
                std::vector<std::size_t> s{cur.lower.shape[0]};
                s.insert(s.end(), l.out_shape.begin(), l.out_shape.end());
                next.lower = reshape_to(cur.lower, s);
                next.upper = reshape_to(cur.upper, s);
                break;
            }
            case LayerKind::AvgPool:
                next.lower = detail::avgpool_forward(cur.lower, l.units);
                next.upper = detail::avgpool_forward(cur.upper, l.units);
                break;
        }
        cur = std::move(next);
        if (trace) trace->bounds.push_back(cur);
    }
    return cur;
}

// Reverse pass through the interval propagation. gl/gu are gradients on the
// output bounds of the last layer.
void ibp_backward(const Network& net, const IbpTrace& trace, Tensor gl, Tensor gu,
                  GradientSet& grads) {
    for (std::size_t ri = net.layers.size(); ri-- > 0;) {
        const Layer& l = net.layers[ri];
        const IntervalBounds& in = trace.bounds[ri];
        switch (l.kind) {
            case LayerKind::Dense: {
                Tensor w = masked(l.weights, l.mask), wp, wn;
                split_pos_neg(w, wp, wn);
                const std::size_t in_dim = in.lower.shape[1];
                // parameter grads: entries >= 0 pair (gl,l)+(gu,u); negative
                // entries pair (gl,u)+(gu,l); bias feeds both bound streams
                Tensor g1(l.weights.shape), g2(l.weights.shape);
                Tensor gb1(l.bias.shape), gb2(l.bias.shape), scrap(l.bias.shape);
                detail::dense_backward_params(in.lower, gl, g1, gb1);
                detail::dense_backward_params(in.upper, gu, g1, gb2);
                detail::dense_backward_params(in.upper, gl, g2, scrap);
                detail::dense_backward_params(in.lower, gu, g2, scrap);
                kern::ops().add(grads.dbias[ri].data.data(), gb1.data.data(), gb1.numel());
                kern::ops().add(grads.dbias[ri].data.data(), gb2.data.data(), gb2.numel());
                for (std::size_t i = 0; i < l.weights.numel(); ++i)
                    grads.dweights[ri].data[i] +=
                        l.weights.data[i] >= 0.0 ? g1.data[i] : g2.data[i];
                Tensor gl_in = detail::dense_backward_input(wp, gl, in_dim);
                Tensor t = detail::dense_backward_input(wn, gu, in_dim);
                kern::ops().add(gl_in.data.data(), t.data.data(), t.numel());
                Tensor gu_in = detail::dense_backward_input(wp, gu, in_dim);
                t = detail::dense_backward_input(wn, gl, in_dim);
                kern::ops().add(gu_in.data.data(), t.data.data(), t.numel());
                gl = std::move(gl_in);
                gu = std::move(gu_in);
                break;
            }
            case LayerKind::Conv2d: {
                Tensor w = masked(l.weights, l.mask), wp, wn;
                split_pos_neg(w, wp, wn);
                Tensor g1(l.weights.shape), g2(l.weights.shape);
                Tensor gb1(l.bias.shape), gb2(l.bias.shape);
                detail::conv_backward_params(in.lower, gl, l.kernel, l.stride, g1, gb1);
                detail::conv_backward_params(in.upper, gu, l.kernel, l.stride, g1, gb2);
                Tensor scrap(l.bias.shape);
                detail::conv_backward_params(in.upper, gl, l.kernel, l.stride, g2, scrap);
                detail::conv_backward_params(in.lower, gu, l.kernel, l.stride, g2, scrap);
                kern::ops().add(grads.dbias[ri].data.data(), gb1.data.data(), gb1.numel());
                kern::ops().add(grads.dbias[ri].data.data(), gb2.data.data(), gb2.numel());
                for (std::size_t i = 0; i < l.weights.numel(); ++i)
                    grads.dweights[ri].data[i] +=
                        l.weights.data[i] >= 0.0 ? g1.data[i] : g2.data[i];
                Tensor gl_in = detail::conv_backward_input(wp, gl, in.lower.shape, l.stride);
                Tensor t = detail::conv_backward_input(wn, gu, in.lower.shape, l.stride);
                kern::ops().add(gl_in.data.data(), t.data.data(), t.numel());
                Tensor gu_in = detail::conv_backward_input(wp, gu, in.lower.shape, l.stride);
                t = detail::conv_backward_input(wn, gl, in.lower.shape, l.stride);
                kern::ops().add(gu_in.data.data(), t.data.data(), t.numel());
                gl = std::move(gl_in);
                gu = std::move(gu_in);
                break;
            }
            case LayerKind::ReLU:
                gl = detail::relu_backward(in.lower, gl);
                gu = detail::relu_backward(in.upper, gu);
                break;
            case LayerKind::Flatten:
                gl.shape = in.lower.shape;
                gu.shape = in.upper.shape;
                break;
            case LayerKind::AvgPool:
                gl = detail::avgpool_backward(gl, in.lower.shape, l.units);
                gu = detail::avgpool_backward(gu, in.upper.shape, l.units);
                break;
        }
    }
}

}  // namespace

IntervalBounds ibp_bounds(const Network& net, const Tensor& batch, double epsilon) {
    return ibp_forward(net, batch, epsilon, nullptr);
}

VerifyResult verify_sample(const Network& net, const Tensor& x, int label, double epsilon) {
    std::vector<std::size_t> s{1};
    s.insert(s.end(), x.shape.begin(), x.shape.end());
    Tensor batch = x;
    batch.shape = s;
    IntervalBounds b = ibp_bounds(net, batch, epsilon);
    const std::size_t c = net.num_classes;
    const double own_lower = b.lower.data[std::size_t(label)];
    for (std::size_t j = 0; j < c; ++j) {
        if (int(j) == label) continue;
        if (!(own_lower > b.upper.data[j])) return VerifyResult::Unknown;
    }
    return VerifyResult::VerifiedRobust;
}

double vra(const Network& net, const Dataset& ds, double epsilon) {
    if (ds.size() == 0) throw std::invalid_argument("empty dataset");
    const std::size_t batch_size = 256;
    const std::size_t c = net.num_classes;
    const std::size_t nb = (ds.size() + batch_size - 1) / batch_size;
    std::vector<std::size_t> counts(nb, 0);
    parallel_ranges(nb, [&](std::size_t b0, std::size_t b1) {
        for (std::size_t bi = b0; bi < b1; ++bi) {
            const std::size_t start = bi * batch_size;
            const std::size_t count = std::min(batch_size, ds.size() - start);
            Tensor batch = ds.batch_images(start, count);
            IntervalBounds b = ibp_bounds(net, batch, epsilon);
            for (std::size_t i = 0; i < count; ++i) {
                const int y = ds.labels[start + i];
                const double own_lower = b.lower.data[i * c + std::size_t(y)];
                bool ok = true;
                for (std::size_t j = 0; j < c && ok; ++j) {
                    if (int(j) == y) continue;
                    if (!(own_lower > b.upper.data[i * c + j])) ok = false;
                }
                if (ok) ++counts[bi];
            }
        }
    });
    std::size_t verified = 0;
    for (std::size_t v : counts) verified += v;
    return double(verified) / double(ds.size());
}

double robust_loss_ibp(const Network& net, const Tensor& batch,
                       const std::vector<int>& labels, double epsilon,
                       GradientSet* grads) {
    IbpTrace trace;
    IntervalBounds out = ibp_forward(net, batch, epsilon, &trace);
    const std::size_t b = out.lower.shape[0], c = out.lower.shape[1];

    // worst-case logits: own lower bound, rival upper bounds
    Tensor worst({b, c});
    for (std::size_t i = 0; i < b; ++i) {
        const int y = labels[i];
        for (std::size_t j = 0; j < c; ++j)
            worst.data[i * c + j] =
                int(j) == y ? out.lower.data[i * c + j] : out.upper.data[i * c + j];
    }
    Tensor dworst;
    double loss = softmax_xent(worst, labels, grads ? &dworst : nullptr);
    if (grads) {
        Tensor gl({b, c}), gu({b, c});
        for (std::size_t i = 0; i < b; ++i) {
            const int y = labels[i];
            for (std::size_t j = 0; j < c; ++j) {
                if (int(j) == y)
                    gl.data[i * c + j] = dworst.data[i * c + j];
                else
                    gu.data[i * c + j] = dworst.data[i * c + j];
            }
        }
        *grads = GradientSet::zeros_like(net);
        ibp_backward(net, trace, std::move(gl), std::move(gu), *grads);
        for (std::size_t i = 0; i < net.layers.size(); ++i)
            if (net.layers[i].has_params())
                kern::ops().hadamard(grads->dweights[i].data.data(),
                                     net.layers[i].mask.data.data(),
                                     grads->dweights[i].numel());
    }
    return loss;
}

}  // namespace prunelab
