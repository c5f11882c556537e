#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pointcolor/common.hpp"

namespace pointcolor {

// Per-point feature rows (N x D) and per-point output rows (N x K logits,
// or N x 3 for the regression head).
using FeatureMatrix = Eigen::MatrixXd;
using LogitMatrix = Eigen::MatrixXd;

struct ModelConfig {
    int num_classes = 128;                   // K
    int feature_dim = 128;                   // D
    std::vector<int> encoder_widths = {3, 64, 128};
    int global_width = 128;
    std::vector<int> decoder_widths = {256, 128, 128}; // (D + hint_dim) -> ... -> output
    int hint_dim = 128;                      // K, or 0 for the regression head
    int output_dim = 128;                    // K, or 3 for the regression head

    void validate() const;
};

// Classification head: decoder input D + K, output K.
ModelConfig make_classification_config(int num_classes, int feature_dim = 128,
                                       std::vector<int> encoder_widths = {3, 64, 128},
                                       int global_width = 128,
                                       std::vector<int> decoder_hidden = {128});

// Regression head: no hints, 3-channel linear output.
ModelConfig make_regression_config(int num_classes, int feature_dim = 128,
                                   std::vector<int> encoder_widths = {3, 64, 128},
                                   int global_width = 128,
                                   std::vector<int> decoder_hidden = {128});

struct TensorShape {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0; // 1 for bias vectors

    std::size_t count() const { return static_cast<std::size_t>(rows) * cols; }
};

// All weights of the encoder, global layer, mix layer, and decoder in one
// flat array, with a parallel gradient store of identical layout.
class ModelParams {
public:
    ModelParams() = default;
    explicit ModelParams(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const std::vector<TensorShape>& layout() const { return layout_; }
    std::size_t parameter_count() const { return values_.size(); }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& grads() { return grads_; }
    const std::vector<double>& grads() const { return grads_; }

    Eigen::Map<Eigen::MatrixXd> tensor(std::size_t index);
    Eigen::Map<const Eigen::MatrixXd> tensor(std::size_t index) const;
    Eigen::Map<Eigen::MatrixXd> grad(std::size_t index);
    Eigen::Map<const Eigen::MatrixXd> grad(std::size_t index) const;

    void zero_grads();
    void check_finite() const;

private:
    ModelConfig config_;
    std::vector<TensorShape> layout_;
    std::vector<double> values_;
    std::vector<double> grads_;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero,
// deterministic per seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t rng_seed);

// Activations cached by a forward pass, consumed by the backward pass.
struct ForwardTrace {
    Eigen::MatrixXd encoder_input;             // 3 x N point matrix
    std::vector<Eigen::MatrixXd> encoder_pre;  // pre-activation, width x N
    std::vector<Eigen::MatrixXd> encoder_act;  // post-ReLU, width x N
    std::vector<int> pool_argmax;              // argmax point per channel
    Eigen::VectorXd pooled;                    // channel-wise max
    Eigen::VectorXd global_pre;
    Eigen::VectorXd global_act;
    Eigen::MatrixXd features;                  // D x N
    Eigen::MatrixXd decoder_input;             // (D + hint_dim) x N
    std::vector<Eigen::MatrixXd> decoder_pre;
    std::vector<Eigen::MatrixXd> decoder_act;
    Eigen::MatrixXd outputs;                   // output_dim x N
};

// Shared per-point MLP, channel-wise max pool, one global linear layer,
// then a linear mix of [per-point; global] down to D. Permutation
// equivariant by construction. Throws data_error on an empty cloud.
FeatureMatrix backbone_forward(const ModelParams& params,
                               std::span<const Eigen::Vector3d> points);

// Row-wise [feature; hint] concatenation through the per-point decoder
// MLP; no cross-point mixing.
LogitMatrix decoder_forward(const ModelParams& params, const FeatureMatrix& features,
                            const Eigen::MatrixXd& hints);

// backbone_forward then decoder_forward; the backbone never sees hints.
LogitMatrix forward(const ModelParams& params, std::span<const Eigen::Vector3d> points,
                    const Eigen::MatrixXd& hints);

// Full forward pass that also returns the activation trace.
LogitMatrix forward_traced(const ModelParams& params, std::span<const Eigen::Vector3d> points,
                           const Eigen::MatrixXd& hints, ForwardTrace& trace);

// Exact reverse-mode gradients for the scalar loss whose per-output
// partials are loss_grad (N x output_dim). Max-pool routes gradient to the
// argmax point per channel, ties to the lowest point index. Accumulates
// into the gradient store when accumulate is set, else overwrites it.
void backward(ModelParams& params, std::span<const Eigen::Vector3d> points,
              const Eigen::MatrixXd& hints, const Eigen::MatrixXd& loss_grad,
              bool accumulate = false);

// Same, reusing a trace produced by forward_traced on identical inputs.
void backward_traced(ModelParams& params, const ForwardTrace& trace,
                     const Eigen::MatrixXd& loss_grad, bool accumulate = false);

// Row-wise argmax, ties to the lowest index; labels are 1-based.
std::vector<int> predict(const LogitMatrix& logits);

} // namespace pointcolor
