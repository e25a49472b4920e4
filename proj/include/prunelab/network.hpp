#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prunelab/tensor.hpp"

namespace prunelab {

enum class LayerKind { Dense, Conv2d, ReLU, Flatten, AvgPool };

struct LayerSpec {
    LayerKind kind;
    std::size_t units = 0;     // dense: output units; conv: output channels; avgpool: window
    std::size_t kernel = 0;    // conv only
    std::size_t stride = 1;    // conv only
};

// Textual architecture description, e.g.
//   "input:1x8x8,conv:8x3s1,relu,avgpool:2,flatten,dense:32,relu,dense:10"
struct ArchSpec {
    std::vector<std::size_t> input_shape;
    std::vector<LayerSpec> layers;

    static ArchSpec parse(const std::string& text);
    std::string str() const;
    std::size_t num_classes() const;  // units of the final dense layer
};

struct Layer {
    LayerKind kind;
    Tensor weights;  // Dense: [out,in]; Conv2d: [outC,inC,k,k]; else empty
    Tensor bias;     // Dense: [out]; Conv2d: [outC]
    Tensor mask;     // binary, same shape as weights
    std::size_t units = 0, kernel = 0, stride = 1;  // spec metadata
    std::vector<std::size_t> in_shape, out_shape;   // per-sample, set by infer_shapes

    bool has_params() const { return kind == LayerKind::Dense || kind == LayerKind::Conv2d; }
};

struct Network {
    ArchSpec spec;
    std::vector<Layer> layers;
    std::vector<std::size_t> input_shape;
    std::size_t num_classes = 0;

    std::size_t param_count() const;     // weight + bias elements
    std::size_t prunable_count() const;  // weight elements only (biases are never pruned)
    std::size_t nonzero_count() const;   // mask ones + bias elements
};

// Per-layer gradients, shape-aligned with the network parameters.
struct GradientSet {
    std::vector<Tensor> dweights;
    std::vector<Tensor> dbias;

    static GradientSet zeros_like(const Network& net);
    void add_scaled(const GradientSet& other, double a);
    void scale(double a);
};

// Build a network with He-normal initial weights and all-ones masks.
Network build_network(const ArchSpec& spec, std::uint64_t seed);

// Validates layer composition and fills in/out shapes. Throws on mismatch,
// naming the offending layer index.
void infer_shapes(Network& net);

struct ForwardTrace {
    std::vector<Tensor> acts;  // acts[0] = input, acts[i+1] = output of layer i
};

Tensor forward(const Network& net, const Tensor& batch);
Tensor forward_trace(const Network& net, const Tensor& batch, ForwardTrace& trace);

// Mean softmax cross-entropy over the batch plus parameter gradients.
// Gradients at masked-out weights are exactly zero.
double loss_and_grad(const Network& net, const Tensor& batch,
                     const std::vector<int>& labels, GradientSet& grads);

// Gradient of the mean loss w.r.t. the input batch.
Tensor input_grad(const Network& net, const Tensor& batch, const std::vector<int>& labels);

// Loss only (no gradients).
double loss_value(const Network& net, const Tensor& batch, const std::vector<int>& labels);

// Mean softmax cross-entropy of given logits [B,C]; fills dlogits (d mean-loss)
// when non-null.
double softmax_xent(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits);

std::vector<int> predict(const Network& net, const Tensor& batch);
double accuracy(const Network& net, const Tensor& images, const std::vector<int>& labels,
                std::size_t batch_size = 256);

}  // namespace prunelab
