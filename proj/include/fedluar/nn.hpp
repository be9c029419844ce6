#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedluar/matrix.hpp"
#include "fedluar/rng.hpp"

namespace fedluar {

// Dense row-major matrix. Small enough models that no BLAS is warranted.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

enum class LayerKind { dense, conv2d };

// One logical layer: weights and bias share a single flat buffer so that the
// recycling machinery treats them as one unit.
struct LayerSpec {
    int layer_id = 0;
    LayerKind kind = LayerKind::dense;

    // dense
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;

    // conv2d, valid padding, stride 1, HWC layout
    std::size_t in_h = 0, in_w = 0, in_c = 0;
    std::size_t kernel = 0;
    std::size_t out_channels = 0;

    std::size_t param_count = 0;

    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t out_h() const { return in_h - kernel + 1; }
    std::size_t out_w() const { return in_w - kernel + 1; }
    // Receptive-field size used for initialization scaling.
    std::size_t init_fan_in() const {
        return kind == LayerKind::dense ? fan_in : kernel * kernel * in_c;
    }
};

LayerSpec make_dense_spec(int id, std::size_t fan_in, std::size_t fan_out);
LayerSpec make_conv_spec(int id, std::size_t in_h, std::size_t in_w, std::size_t in_c,
                         std::size_t kernel, std::size_t out_channels);

// Activation record produced by forward. Holds a pointer to the parameter
// vector it was evaluated with; the cache is valid only while that vector is
// alive and unmodified.
struct ForwardCache {
    const LayerKeyedVector* params = nullptr;
    std::vector<Matrix> inputs;    // activation entering each layer
    std::vector<Matrix> preacts;   // pre-activation output of each layer
    Matrix logits;                 // alias of preacts.back(), kept for clarity
};

struct BackwardResult {
    double loss = 0.0;
    LayerKeyedVector grad;
};

struct EvalMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

// Feed-forward net: ReLU between layers, no activation after the last, mean
// softmax cross-entropy loss. Gradients are derived by hand; evaluation is
// pure, so one Model may serve many clients concurrently.
class Model {
public:
    explicit Model(std::vector<LayerSpec> specs);

    const std::vector<LayerSpec>& specs() const { return specs_; }
    std::size_t num_layers() const { return specs_.size(); }
    std::size_t total_params() const { return total_params_; }
    std::size_t input_dim() const { return specs_.front().input_dim(); }
    std::size_t num_classes() const { return specs_.back().output_dim(); }

    // He-style uniform weights with limit sqrt(6/fan_in), zero bias. Each
    // layer draws from its own derived stream, so layer order of evaluation
    // cannot change the result.
    LayerKeyedVector init_params(std::uint64_t seed) const;

    ForwardCache forward(const LayerKeyedVector& params, const Matrix& batch_inputs) const;
    BackwardResult backward(const ForwardCache& cache, const std::vector<int>& labels) const;

    // Mean loss and accuracy over the given rows; argmax ties resolve to the
    // lowest class index.
    EvalMetrics evaluate(const LayerKeyedVector& params, const Matrix& inputs,
                         const std::vector<int>& labels) const;

private:
    void check_params(const LayerKeyedVector& params) const;

    std::vector<LayerSpec> specs_;
    std::size_t total_params_ = 0;
};

}  // namespace fedluar
