#include "pointcolor/model.hpp"

#include <cmath>

#include "pointcolor/rng.hpp"

namespace pointcolor {

void ModelConfig::validate() const {
    if (num_classes < 1 || feature_dim < 1 || global_width < 1) {
        throw data_error("model config: widths must be >= 1");
    }
    if (encoder_widths.size() < 2 || encoder_widths.front() != 3) {
        throw data_error("model config: encoder widths must start at 3");
    }
    if (decoder_widths.size() < 2) {
        throw data_error("model config: decoder needs at least one layer");
    }
    for (int w : encoder_widths) {
        if (w < 1) {
            throw data_error("model config: encoder width < 1");
        }
    }
    for (int w : decoder_widths) {
        if (w < 1 && w != 0) {
            throw data_error("model config: decoder width < 1");
        }
    }
    if (hint_dim < 0 || output_dim < 1) {
        throw data_error("model config: bad hint or output width");
    }
    if (decoder_widths.front() != feature_dim + hint_dim) {
        throw data_error("model config: decoder input width must equal D + hint width");
    }
    if (decoder_widths.back() != output_dim) {
        throw data_error("model config: decoder output width mismatch");
    }
}

ModelConfig make_classification_config(int num_classes, int feature_dim,
                                       std::vector<int> encoder_widths, int global_width,
                                       std::vector<int> decoder_hidden) {
    ModelConfig config;
    config.num_classes = num_classes;
    config.feature_dim = feature_dim;
    config.encoder_widths = std::move(encoder_widths);
    config.global_width = global_width;
    config.hint_dim = num_classes;
    config.output_dim = num_classes;
    config.decoder_widths.clear();
    config.decoder_widths.push_back(feature_dim + num_classes);
    for (int w : decoder_hidden) {
        config.decoder_widths.push_back(w);
    }
    config.decoder_widths.push_back(num_classes);
    config.validate();
    return config;
}

ModelConfig make_regression_config(int num_classes, int feature_dim,
                                   std::vector<int> encoder_widths, int global_width,
                                   std::vector<int> decoder_hidden) {
    ModelConfig config;
    config.num_classes = num_classes;
    config.feature_dim = feature_dim;
    config.encoder_widths = std::move(encoder_widths);
    config.global_width = global_width;
    config.hint_dim = 0;
    config.output_dim = 3;
    config.decoder_widths.clear();
    config.decoder_widths.push_back(feature_dim);
    for (int w : decoder_hidden) {
        config.decoder_widths.push_back(w);
    }
    config.decoder_widths.push_back(3);
    config.validate();
    return config;
}

ModelParams::ModelParams(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    std::size_t offset = 0;
    auto add = [&](const std::string& name, int rows, int cols) {
        layout_.push_back({name, offset, rows, cols});
        offset += static_cast<std::size_t>(rows) * cols;
    };
    const auto& enc = config_.encoder_widths;
    for (std::size_t i = 0; i + 1 < enc.size(); ++i) {
        add("encoder." + std::to_string(i) + ".weight", enc[i + 1], enc[i]);
        add("encoder." + std::to_string(i) + ".bias", enc[i + 1], 1);
    }
    add("global.weight", config_.global_width, enc.back());
    add("global.bias", config_.global_width, 1);
    add("mix.weight", config_.feature_dim, enc.back() + config_.global_width);
    add("mix.bias", config_.feature_dim, 1);
    const auto& dec = config_.decoder_widths;
    for (std::size_t i = 0; i + 1 < dec.size(); ++i) {
        add("decoder." + std::to_string(i) + ".weight", dec[i + 1], dec[i]);
        add("decoder." + std::to_string(i) + ".bias", dec[i + 1], 1);
    }
    values_.assign(offset, 0.0);
    grads_.assign(offset, 0.0);
}

Eigen::Map<Eigen::MatrixXd> ModelParams::tensor(std::size_t index) {
    const TensorShape& t = layout_.at(index);
    return {values_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Eigen::MatrixXd> ModelParams::tensor(std::size_t index) const {
    const TensorShape& t = layout_.at(index);
    return {values_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<Eigen::MatrixXd> ModelParams::grad(std::size_t index) {
    const TensorShape& t = layout_.at(index);
    return {grads_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<const Eigen::MatrixXd> ModelParams::grad(std::size_t index) const {
    const TensorShape& t = layout_.at(index);
    return {grads_.data() + t.offset, t.rows, t.cols};
}

void ModelParams::zero_grads() {
    std::fill(grads_.begin(), grads_.end(), 0.0);
}

void ModelParams::check_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw numeric_error("model parameters contain non-finite values");
        }
    }
}

ModelParams init_params(const ModelConfig& config, std::uint64_t rng_seed) {
    ModelParams params(config);
    for (std::size_t t = 0; t < params.layout().size(); ++t) {
        const TensorShape& shape = params.layout()[t];
        if (shape.cols == 1) {
            continue; // biases stay zero
        }
        const double bound = std::sqrt(6.0 / (shape.cols + shape.rows));
        CounterRng rng(rng_stream(rng_seed, rng_stream(streams::kParamInit, t)));
        auto w = params.tensor(t);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            for (Eigen::Index i = 0; i < w.rows(); ++i) {
                w(i, j) = (2.0 * rng.next_double() - 1.0) * bound;
            }
        }
    }
    return params;
}

namespace {

// Tensor indices for a given config; mirrors the layout built in the
// ModelParams constructor.
struct LayerIndex {
    std::vector<std::size_t> enc_w, enc_b;
    std::size_t global_w = 0, global_b = 0;
    std::size_t mix_w = 0, mix_b = 0;
    std::vector<std::size_t> dec_w, dec_b;
};

LayerIndex layer_index(const ModelConfig& config) {
    LayerIndex idx;
    std::size_t t = 0;
    for (std::size_t i = 0; i + 1 < config.encoder_widths.size(); ++i) {
        idx.enc_w.push_back(t++);
        idx.enc_b.push_back(t++);
    }
    idx.global_w = t++;
    idx.global_b = t++;
    idx.mix_w = t++;
    idx.mix_b = t++;
    for (std::size_t i = 0; i + 1 < config.decoder_widths.size(); ++i) {
        idx.dec_w.push_back(t++);
        idx.dec_b.push_back(t++);
    }
    return idx;
}

Eigen::MatrixXd points_matrix(std::span<const Eigen::Vector3d> points) {
    Eigen::MatrixXd x(3, static_cast<Eigen::Index>(points.size()));
    for (std::size_t n = 0; n < points.size(); ++n) {
        x.col(static_cast<Eigen::Index>(n)) = points[n];
    }
    return x;
}

void run_backbone(const ModelParams& params, const Eigen::MatrixXd& x, ForwardTrace& trace) {
    const LayerIndex idx = layer_index(params.config());
    const Eigen::Index n = x.cols();

    trace.encoder_input = x;
    trace.encoder_pre.clear();
    trace.encoder_act.clear();
    Eigen::MatrixXd act = x;
    for (std::size_t i = 0; i < idx.enc_w.size(); ++i) {
        Eigen::MatrixXd pre =
            (params.tensor(idx.enc_w[i]) * act).colwise() +
            Eigen::VectorXd(params.tensor(idx.enc_b[i]));
        act = pre.cwiseMax(0.0);
        trace.encoder_pre.push_back(std::move(pre));
        trace.encoder_act.push_back(act);
    }

    const Eigen::MatrixXd& h = trace.encoder_act.back();
    trace.pooled.resize(h.rows());
    trace.pool_argmax.assign(static_cast<std::size_t>(h.rows()), 0);
    for (Eigen::Index c = 0; c < h.rows(); ++c) {
        double best = h(c, 0);
        int best_n = 0;
        for (Eigen::Index j = 1; j < n; ++j) {
            if (h(c, j) > best) { // strict: ties keep the lowest index
                best = h(c, j);
                best_n = static_cast<int>(j);
            }
        }
        trace.pooled(c) = best;
        trace.pool_argmax[static_cast<std::size_t>(c)] = best_n;
    }

    trace.global_pre = params.tensor(idx.global_w) * trace.pooled +
                       Eigen::VectorXd(params.tensor(idx.global_b));
    trace.global_act = trace.global_pre.cwiseMax(0.0);

    Eigen::MatrixXd mix_in(h.rows() + trace.global_act.size(), n);
    mix_in.topRows(h.rows()) = h;
    mix_in.bottomRows(trace.global_act.size()).colwise() = trace.global_act;
    trace.features = (params.tensor(idx.mix_w) * mix_in).colwise() +
                     Eigen::VectorXd(params.tensor(idx.mix_b));
}

void run_decoder(const ModelParams& params, const Eigen::MatrixXd& dec_in, ForwardTrace& trace) {
    const LayerIndex idx = layer_index(params.config());
    trace.decoder_input = dec_in;
    trace.decoder_pre.clear();
    trace.decoder_act.clear();
    Eigen::MatrixXd act = dec_in;
    const std::size_t last = idx.dec_w.size() - 1;
    for (std::size_t i = 0; i < idx.dec_w.size(); ++i) {
        Eigen::MatrixXd pre =
            (params.tensor(idx.dec_w[i]) * act).colwise() +
            Eigen::VectorXd(params.tensor(idx.dec_b[i]));
        act = (i == last) ? pre : pre.cwiseMax(0.0);
        trace.decoder_pre.push_back(std::move(pre));
        trace.decoder_act.push_back(act);
    }
    trace.outputs = act;
}

Eigen::MatrixXd hints_to_columns(const Eigen::MatrixXd& hints, Eigen::Index n, int hint_dim) {
    if (hint_dim == 0) {
        return Eigen::MatrixXd(0, n);
    }
    if (hints.rows() != n || hints.cols() != hint_dim) {
        throw data_error("forward: hint matrix must be N x " + std::to_string(hint_dim));
    }
    return hints.transpose();
}

} // namespace

FeatureMatrix backbone_forward(const ModelParams& params,
                               std::span<const Eigen::Vector3d> points) {
    if (points.empty()) {
        throw data_error("backbone_forward: empty point cloud");
    }
    ForwardTrace trace;
    run_backbone(params, points_matrix(points), trace);
    return trace.features.transpose();
}

LogitMatrix decoder_forward(const ModelParams& params, const FeatureMatrix& features,
                            const Eigen::MatrixXd& hints) {
    const ModelConfig& config = params.config();
    if (features.cols() != config.feature_dim) {
        throw data_error("decoder_forward: feature width mismatch");
    }
    const Eigen::Index n = features.rows();
    Eigen::MatrixXd dec_in(config.feature_dim + config.hint_dim, n);
    dec_in.topRows(config.feature_dim) = features.transpose();
    dec_in.bottomRows(config.hint_dim) = hints_to_columns(hints, n, config.hint_dim);
    ForwardTrace trace;
    run_decoder(params, dec_in, trace);
    return trace.outputs.transpose();
}

LogitMatrix forward_traced(const ModelParams& params, std::span<const Eigen::Vector3d> points,
                           const Eigen::MatrixXd& hints, ForwardTrace& trace) {
    if (points.empty()) {
        throw data_error("forward: empty point cloud");
    }
    const ModelConfig& config = params.config();
    run_backbone(params, points_matrix(points), trace);
    const Eigen::Index n = trace.features.cols();
    Eigen::MatrixXd dec_in(config.feature_dim + config.hint_dim, n);
    dec_in.topRows(config.feature_dim) = trace.features;
    dec_in.bottomRows(config.hint_dim) = hints_to_columns(hints, n, config.hint_dim);
    run_decoder(params, dec_in, trace);
    return trace.outputs.transpose();
}

LogitMatrix forward(const ModelParams& params, std::span<const Eigen::Vector3d> points,
                    const Eigen::MatrixXd& hints) {
    ForwardTrace trace;
    return forward_traced(params, points, hints, trace);
}

void backward_traced(ModelParams& params, const ForwardTrace& trace,
                     const Eigen::MatrixXd& loss_grad, bool accumulate) {
    const ModelConfig& config = params.config();
    const LayerIndex idx = layer_index(config);
    const Eigen::Index n = trace.outputs.cols();
    if (loss_grad.rows() != n || loss_grad.cols() != config.output_dim) {
        throw data_error("backward: loss_grad must be N x " + std::to_string(config.output_dim));
    }
    if (!accumulate) {
        params.zero_grads();
    }

    // Decoder.
    Eigen::MatrixXd d_act = loss_grad.transpose(); // output_dim x N
    const std::size_t dec_last = idx.dec_w.size() - 1;
    for (std::size_t i = idx.dec_w.size(); i-- > 0;) {
        Eigen::MatrixXd d_pre =
            (i == dec_last)
                ? std::move(d_act)
                : Eigen::MatrixXd(
                      d_act.cwiseProduct((trace.decoder_pre[i].array() > 0.0).cast<double>().matrix()));
        const Eigen::MatrixXd& input =
            (i == 0) ? trace.decoder_input : trace.decoder_act[i - 1];
        params.grad(idx.dec_w[i]).noalias() += d_pre * input.transpose();
        params.grad(idx.dec_b[i]) += d_pre.rowwise().sum();
        d_act = params.tensor(idx.dec_w[i]).transpose() * d_pre;
    }

    // Split the decoder-input gradient; the hint block has no parameters
    // upstream of it.
    Eigen::MatrixXd d_features = d_act.topRows(config.feature_dim);

    // Mix layer.
    const Eigen::MatrixXd& h = trace.encoder_act.back();
    Eigen::MatrixXd mix_in(h.rows() + trace.global_act.size(), n);
    mix_in.topRows(h.rows()) = h;
    mix_in.bottomRows(trace.global_act.size()).colwise() = trace.global_act;
    params.grad(idx.mix_w).noalias() += d_features * mix_in.transpose();
    params.grad(idx.mix_b) += d_features.rowwise().sum();
    const Eigen::MatrixXd d_mix_in = params.tensor(idx.mix_w).transpose() * d_features;

    Eigen::MatrixXd d_h = d_mix_in.topRows(h.rows());
    const Eigen::VectorXd d_global_act = d_mix_in.bottomRows(trace.global_act.size()).rowwise().sum();

    // Global layer.
    const Eigen::VectorXd d_global_pre = d_global_act.cwiseProduct(
        (trace.global_pre.array() > 0.0).cast<double>().matrix());
    params.grad(idx.global_w).noalias() += d_global_pre * trace.pooled.transpose();
    params.grad(idx.global_b) += d_global_pre;
    const Eigen::VectorXd d_pooled = params.tensor(idx.global_w).transpose() * d_global_pre;

    // Max pool routes each channel's gradient to its argmax point.
    for (Eigen::Index c = 0; c < d_pooled.size(); ++c) {
        d_h(c, trace.pool_argmax[static_cast<std::size_t>(c)]) += d_pooled(c);
    }

    // Encoder.
    d_act = std::move(d_h);
    for (std::size_t i = idx.enc_w.size(); i-- > 0;) {
        const Eigen::MatrixXd d_pre = d_act.cwiseProduct(
            (trace.encoder_pre[i].array() > 0.0).cast<double>().matrix());
        const Eigen::MatrixXd& input = (i == 0) ? trace.encoder_input : trace.encoder_act[i - 1];
        params.grad(idx.enc_w[i]).noalias() += d_pre * input.transpose();
        params.grad(idx.enc_b[i]) += d_pre.rowwise().sum();
        if (i > 0) {
            d_act = params.tensor(idx.enc_w[i]).transpose() * d_pre;
        }
    }
}

void backward(ModelParams& params, std::span<const Eigen::Vector3d> points,
              const Eigen::MatrixXd& hints, const Eigen::MatrixXd& loss_grad,
              bool accumulate) {
    ForwardTrace trace;
    forward_traced(params, points, hints, trace);
    backward_traced(params, trace, loss_grad, accumulate);
}

std::vector<int> predict(const LogitMatrix& logits) {
    std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        int best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c) {
            if (logits(i, c) > logits(i, best)) {
                best = static_cast<int>(c);
            }
        }
        labels[static_cast<std::size_t>(i)] = best + 1;
    }
    return labels;
}

} // namespace pointcolor
