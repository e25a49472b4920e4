#include "prunelab/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "prunelab/engine_detail.hpp"
#include "prunelab/kernels.hpp"
#include "prunelab/rng.hpp"

namespace prunelab {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, sep))
        if (!tok.empty()) out.push_back(tok);
    return out;
}

std::size_t to_size(const std::string& s, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(s, &pos);
        if (pos != s.size() || v <= 0) throw std::invalid_argument("bad");
        return static_cast<std::size_t>(v);
    } catch (...) {
        throw std::invalid_argument("bad integer '" + s + "' in " + ctx);
    }
}

}  // namespace

ArchSpec ArchSpec::parse(const std::string& text) {
    ArchSpec spec;
    for (const std::string& tok : split(text, ',')) {
        auto colon = tok.find(':');
        std::string name = tok.substr(0, colon);
        std::string arg = colon == std::string::npos ? "" : tok.substr(colon + 1);
        if (name == "input") {
            auto dims = split(arg, 'x');
            if (dims.empty()) throw std::invalid_argument("input needs dimensions");
            for (auto& d : dims) spec.input_shape.push_back(to_size(d, "input"));
        } else if (name == "dense") {
            spec.layers.push_back({LayerKind::Dense, to_size(arg, "dense"), 0, 1});
        } else if (name == "conv") {
            // conv:<outC>x<k>[s<stride>]
            std::size_t stride = 1;
            auto spos = arg.find('s');
            if (spos != std::string::npos) {
                stride = to_size(arg.substr(spos + 1), "conv stride");
                arg = arg.substr(0, spos);
            }
            auto parts = split(arg, 'x');
            if (parts.size() != 2) throw std::invalid_argument("conv needs <outC>x<k>");
            spec.layers.push_back(
                {LayerKind::Conv2d, to_size(parts[0], "conv"), to_size(parts[1], "conv"), stride});
        } else if (name == "relu") {
            spec.layers.push_back({LayerKind::ReLU, 0, 0, 1});
        } else if (name == "flatten") {
            spec.layers.push_back({LayerKind::Flatten, 0, 0, 1});
        } else if (name == "avgpool") {
            spec.layers.push_back({LayerKind::AvgPool, to_size(arg, "avgpool"), 0, 1});
        } else {
            throw std::invalid_argument("unknown layer '" + name + "'");
        }
    }
    if (spec.input_shape.empty()) throw std::invalid_argument("architecture lacks input: entry");
    if (spec.layers.empty() || spec.layers.back().kind != LayerKind::Dense)
        throw std::invalid_argument("architecture must end with a dense layer");
    return spec;
}

std::string ArchSpec::str() const {
    std::string out = "input:";
    for (std::size_t i = 0; i < input_shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(input_shape[i]);
    }
    for (const auto& l : layers) {
        out += ",";
        switch (l.kind) {
            case LayerKind::Dense: out += "dense:" + std::to_string(l.units); break;
            case LayerKind::Conv2d:
                out += "conv:" + std::to_string(l.units) + "x" + std::to_string(l.kernel) +
                       "s" + std::to_string(l.stride);
                break;
            case LayerKind::ReLU: out += "relu"; break;
            case LayerKind::Flatten: out += "flatten"; break;
            case LayerKind::AvgPool: out += "avgpool:" + std::to_string(l.units); break;
        }
    }
    return out;
}

std::size_t ArchSpec::num_classes() const { return layers.back().units; }

void infer_shapes(Network& net) {
    std::vector<std::size_t> cur = net.input_shape;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        Layer& l = net.layers[i];
        l.in_shape = cur;
        const std::string where = "layer " + std::to_string(i);
        switch (l.kind) {
            case LayerKind::Dense: {
                if (cur.size() != 1)
                    throw std::runtime_error(where + ": dense expects flat input, got " +
                                             shape_str(cur));
                if (l.weights.shape != std::vector<std::size_t>{l.units, cur[0]})
                    throw std::runtime_error(where + ": dense weight shape mismatch");
                cur = {l.units};
                break;
            }
            case LayerKind::Conv2d: {
                if (cur.size() != 3)
                    throw std::runtime_error(where + ": conv expects CxHxW input, got " +
                                             shape_str(cur));
                if (cur[1] < l.kernel || cur[2] < l.kernel)
                    throw std::runtime_error(where + ": kernel larger than input");
                std::size_t oh = (cur[1] - l.kernel) / l.stride + 1;
                std::size_t ow = (cur[2] - l.kernel) / l.stride + 1;
                if (l.weights.shape != std::vector<std::size_t>{l.units, cur[0], l.kernel, l.kernel})
                    throw std::runtime_error(where + ": conv weight shape mismatch");
                cur = {l.units, oh, ow};
                break;
            }
            case LayerKind::ReLU:
                break;
            case LayerKind::Flatten: {
                std::size_t n = 1;
                for (auto e : cur) n *= e;
                cur = {n};
                break;
            }
            case LayerKind::AvgPool: {
                if (cur.size() != 3)
                    throw std::runtime_error(where + ": avgpool expects CxHxW input");
                if (cur[1] < l.units || cur[2] < l.units)
                    throw std::runtime_error(where + ": pool window larger than input");
                cur = {cur[0], cur[1] / l.units, cur[2] / l.units};
                break;
            }
        }
        l.out_shape = cur;
    }
    if (cur != std::vector<std::size_t>{net.num_classes})
        throw std::runtime_error("network output shape " + shape_str(cur) +
                                 " does not match class count");
}

Network build_network(const ArchSpec& spec, std::uint64_t seed) {
    Network net;
    net.spec = spec;
    net.input_shape = spec.input_shape;
    net.num_classes = spec.num_classes();

    auto rng = make_rng(mix_seed(seed, 0x1a2b));
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<std::size_t> cur = spec.input_shape;
    for (const auto& ls : spec.layers) {
        Layer l;
        l.kind = ls.kind;
        l.units = ls.units;
        l.kernel = ls.kernel;
        l.stride = ls.stride;
        switch (ls.kind) {
            case LayerKind::Dense: {
                std::size_t in = 1;
                for (auto e : cur) in *= e;
                cur = {ls.units};
                l.weights = Tensor({ls.units, in});
                l.bias = Tensor({ls.units});
                double scale = std::sqrt(2.0 / double(in));
                for (auto& v : l.weights.data) v = normal(rng) * scale;
                break;
            }
            case LayerKind::Conv2d: {
                std::size_t ic = cur[0];
                std::size_t oh = (cur[1] - ls.kernel) / ls.stride + 1;
                std::size_t ow = (cur[2] - ls.kernel) / ls.stride + 1;
                cur = {ls.units, oh, ow};
                l.weights = Tensor({ls.units, ic, ls.kernel, ls.kernel});
                l.bias = Tensor({ls.units});
                double scale = std::sqrt(2.0 / double(ic * ls.kernel * ls.kernel));
                for (auto& v : l.weights.data) v = normal(rng) * scale;
                break;
            }
            case LayerKind::ReLU:
                break;
            case LayerKind::Flatten: {
                std::size_t n = 1;
                for (auto e : cur) n *= e;
                cur = {n};
                break;
            }
            case LayerKind::AvgPool:
                cur = {cur[0], cur[1] / ls.units, cur[2] / ls.units};
                break;
        }
        if (l.has_params()) {
            l.mask = Tensor(l.weights.shape);
            l.mask.fill(1.0);
        }
        net.layers.push_back(std::move(l));
    }
    infer_shapes(net);
    return net;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.numel() + l.bias.numel();
    return n;
}

std::size_t Network::prunable_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.numel();
    return n;
}

std::size_t Network::nonzero_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        for (double m : l.mask.data) n += m != 0.0 ? 1 : 0;
        n += l.bias.numel();
    }
    return n;
}

GradientSet GradientSet::zeros_like(const Network& net) {
    GradientSet g;
    for (const auto& l : net.layers) {
        g.dweights.emplace_back(l.weights.shape);
        g.dbias.emplace_back(l.bias.shape);
    }
    return g;
}

void GradientSet::add_scaled(const GradientSet& other, double a) {
    for (std::size_t i = 0; i < dweights.size(); ++i) {
        kern::ops().axpy(dweights[i].data.data(), a, other.dweights[i].data.data(),
                         dweights[i].numel());
        kern::ops().axpy(dbias[i].data.data(), a, other.dbias[i].data.data(),
                         dbias[i].numel());
    }
}

void GradientSet::scale(double a) {
    for (auto& t : dweights) kern::ops().scale(t.data.data(), a, t.numel());
    for (auto& t : dbias) kern::ops().scale(t.data.data(), a, t.numel());
}

namespace {

void check_batch_shape(const Network& net, const Tensor& batch) {
    if (batch.shape.empty() || batch.shape[0] == 0)
        throw std::invalid_argument("empty batch");
    std::vector<std::size_t> rest(batch.shape.begin() + 1, batch.shape.end());
    if (rest != net.input_shape)
        throw std::invalid_argument("batch shape " + shape_str(batch.shape) +
                                    " does not match network input " +
                                    shape_str(net.input_shape));
}

Tensor reshape_batch(const Tensor& t, const std::vector<std::size_t>& per_sample) {
    std::vector<std::size_t> s{t.shape[0]};
    s.insert(s.end(), per_sample.begin(), per_sample.end());
    Tensor out = t;
    out.shape = s;
    return out;
}

}  // namespace

Tensor forward_trace(const Network& net, const Tensor& batch, ForwardTrace& trace) {
    check_batch_shape(net, batch);
    trace.acts.clear();
    trace.acts.reserve(net.layers.size() + 1);
    trace.acts.push_back(batch);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& l = net.layers[i];
        const Tensor& x = trace.acts.back();
        Tensor y;
        switch (l.kind) {
            case LayerKind::Dense:
                y = detail::dense_forward(detail::masked(l.weights, l.mask), l.bias, x);
                break;
            case LayerKind::Conv2d:
                y = detail::conv_forward(detail::masked(l.weights, l.mask), l.bias, x, l.stride);
                break;
            case LayerKind::ReLU:
                y = detail::relu_forward(x);
                break;
            case LayerKind::Flatten:
                y = reshape_batch(x, l.out_shape);
                break;
            case LayerKind::AvgPool:
                y = detail::avgpool_forward(x, l.units);
                break;
        }
        trace.acts.push_back(std::move(y));
    }
    return trace.acts.back();
}

Tensor forward(const Network& net, const Tensor& batch) {
    ForwardTrace trace;
    return forward_trace(net, batch, trace);
}

double softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
    const std::size_t batch = logits.shape[0], classes = logits.shape[1];
    if (batch == 0) throw std::invalid_argument("empty batch");
    if (labels.size() != batch) throw std::invalid_argument("label count mismatch");
    if (dlogits) *dlogits = Tensor(logits.shape);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch; ++i) {
        const double* row = logits.data.data() + i * classes;
        const int y = labels[i];
        if (y < 0 || std::size_t(y) >= classes)
            throw std::invalid_argument("label out of range");
        double mx = row[0];
        for (std::size_t c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
        loss += std::log(z) - (row[y] - mx);
        if (dlogits) {
            double* drow = dlogits->data.data() + i * classes;
            for (std::size_t c = 0; c < classes; ++c)
                drow[c] = std::exp(row[c] - mx) / z / double(batch);
            drow[y] -= 1.0 / double(batch);
        }
    }
    return loss / double(batch);
}

namespace {

// Shared backward pass; returns input gradient, fills grads when non-null.
Tensor backward(const Network& net, const ForwardTrace& trace, const Tensor& dlogits,
                GradientSet* grads) {
    Tensor g = dlogits;
    for (std::size_t ri = net.layers.size(); ri-- > 0;) {
        const Layer& l = net.layers[ri];
        const Tensor& x = trace.acts[ri];
        switch (l.kind) {
            case LayerKind::Dense: {
                Tensor weff = detail::masked(l.weights, l.mask);
                if (grads)
                    detail::dense_backward_params(x, g, grads->dweights[ri], grads->dbias[ri]);
                g = detail::dense_backward_input(weff, g, x.shape[1]);
                break;
            }
            case LayerKind::Conv2d: {
                Tensor weff = detail::masked(l.weights, l.mask);
                if (grads)
                    detail::conv_backward_params(x, g, l.kernel, l.stride,
                                                 grads->dweights[ri], grads->dbias[ri]);
                g = detail::conv_backward_input(weff, g, x.shape, l.stride);
                break;
            }
            case LayerKind::ReLU:
                g = detail::relu_backward(x, g);
                break;
            case LayerKind::Flatten:
                g.shape = x.shape;
                break;
            case LayerKind::AvgPool:
                g = detail::avgpool_backward(g, x.shape, l.units);
                break;
        }
    }
    if (grads) {
        // gradients of masked-out weights are forced to exactly zero
        for (std::size_t i = 0; i < net.layers.size(); ++i)
            if (net.layers[i].has_params())
                kern::ops().hadamard(grads->dweights[i].data.data(),
                                     net.layers[i].mask.data.data(),
                                     grads->dweights[i].numel());
    }
    return g;
}

}  // namespace

double loss_and_grad(const Network& net, const Tensor& batch,
                     const std::vector<int>& labels, GradientSet& grads) {
    ForwardTrace trace;
    Tensor logits = forward_trace(net, batch, trace);
    Tensor dlogits;
    double loss = softmax_xent(logits, labels, &dlogits);
    grads = GradientSet::zeros_like(net);
    backward(net, trace, dlogits, &grads);
    return loss;
}

Tensor input_grad(const Network& net, const Tensor& batch, const std::vector<int>& labels) {
    ForwardTrace trace;
    Tensor logits = forward_trace(net, batch, trace);
    Tensor dlogits;
    softmax_xent(logits, labels, &dlogits);
    return backward(net, trace, dlogits, nullptr);
}

double loss_value(const Network& net, const Tensor& batch, const std::vector<int>& labels) {
    Tensor logits = forward(net, batch);
    return softmax_xent(logits, labels, nullptr);
}

std::vector<int> predict(const Network& net, const Tensor& batch) {
    Tensor logits = forward(net, batch);
    const std::size_t b = logits.shape[0], c = logits.shape[1];
    std::vector<int> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = logits.data.data() + i * c;
        out[i] = int(std::max_element(row, row + c) - row);
    }
    return out;
}

double accuracy(const Network& net, const Tensor& images, const std::vector<int>& labels,
                std::size_t batch_size) {
    const std::size_t n = images.shape[0];
    const std::size_t sample = images.numel() / n;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
        std::size_t count = std::min(batch_size, n - start);
        std::vector<std::size_t> s{count};
        s.insert(s.end(), images.shape.begin() + 1, images.shape.end());
        Tensor b(s, std::vector<double>(images.data.begin() + start * sample,
                                        images.data.begin() + (start + count) * sample));
        auto preds = predict(net, b);
        for (std::size_t i = 0; i < count; ++i)
            if (preds[i] == labels[start + i]) ++correct;
    }
    return double(correct) / double(n);
}

}  // namespace prunelab
