#include "pointcolor/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "pointcolor/tensor_io.hpp"

namespace pointcolor {

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw data_error("train config: epochs must be >= 1");
    }
    if (batch_size < 1) {
        throw data_error("train config: batch_size must be >= 1");
    }
    if (!(max_lr > 0.0)) {
        throw data_error("train config: max_lr must be positive");
    }
    if (seed_ratio < 0.0 || seed_ratio > 1.0) {
        throw data_error("train config: seed_ratio outside [0, 1]");
    }
    if (augment_enabled) {
        augment.validate();
    }
}

double Metrics::per_class_mean_accuracy() const {
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < per_class_accuracy.size(); ++c) {
        if (c < per_class_count.size() && per_class_count[c] > 0) {
            sum += per_class_accuracy[c];
            ++present;
        }
    }
    return present > 0 ? sum / present : 0.0;
}

double cosine_lr(std::int64_t step, std::int64_t total_steps, double max_lr) {
    if (total_steps < 1) {
        throw data_error("cosine_lr: total_steps must be >= 1");
    }
    const double s = std::clamp<double>(static_cast<double>(step), 0.0,
                                        static_cast<double>(total_steps));
    return 0.5 * max_lr * (1.0 + std::cos(std::numbers::pi * s / static_cast<double>(total_steps)));
}

void adamw_step(std::vector<double>& params, const std::vector<double>& grads,
                OptimizerState& state, double lr, const TrainConfig& config) {
    if (params.size() != grads.size()) {
        throw data_error("adamw_step: parameter/gradient size mismatch");
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.step = 0;
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        // Decoupled decay, taken from the pre-step parameter value.
        params[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.adam_eps) + config.weight_decay * params[i]);
    }
}

namespace {

struct ClassTally {
    double loss_sum = 0.0; // point-weighted
    std::size_t points = 0;
    std::size_t correct_all = 0;
    std::size_t unknown = 0;
    std::size_t correct_unknown = 0;
    std::vector<std::int64_t> class_count;
    std::vector<std::int64_t> class_correct;
    std::vector<double> frame_unknown_acc;

    explicit ClassTally(int k) : class_count(k, 0), class_correct(k, 0) {}

    void add_frame(const std::vector<int>& labels, const std::vector<int>& predicted,
                   const std::vector<bool>& mask) {
        std::size_t frame_unknown = 0;
        std::size_t frame_unknown_correct = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const bool ok = predicted[i] == labels[i];
            ++points;
            correct_all += ok;
            ++class_count[static_cast<std::size_t>(labels[i] - 1)];
            class_correct[static_cast<std::size_t>(labels[i] - 1)] += ok;
            if (!mask[i]) {
                ++unknown;
                ++frame_unknown;
                correct_unknown += ok;
                frame_unknown_correct += ok;
            }
        }
        frame_unknown_acc.push_back(
            frame_unknown > 0 ? static_cast<double>(frame_unknown_correct) / frame_unknown : 1.0);
    }

    Metrics finish() const {
        Metrics m;
        m.points_seen = points;
        m.mean_loss = points > 0 ? loss_sum / static_cast<double>(points) : 0.0;
        m.accuracy_all = points > 0 ? static_cast<double>(correct_all) / points : 0.0;
        m.accuracy_unknown =
            unknown > 0 ? static_cast<double>(correct_unknown) / unknown : 1.0;
        m.per_class_accuracy.resize(class_count.size(), 0.0);
        m.per_class_count.assign(class_count.begin(), class_count.end());
        for (std::size_t c = 0; c < class_count.size(); ++c) {
            if (class_count[c] > 0) {
                m.per_class_accuracy[c] =
                    static_cast<double>(class_correct[c]) / class_count[c];
            }
        }
        m.per_frame_unknown_accuracy = frame_unknown_acc;
        return m;
    }
};

// One frame readied for a forward/backward pass.
struct PreparedFrame {
    PointSample sample;
    std::vector<int> labels;
    std::vector<bool> mask;
    Eigen::MatrixXd hints;   // N x K, or N x 0 in regression mode
    Eigen::MatrixXd targets; // N x 3 in regression mode
};

PreparedFrame prepare_frame(const PointSample& raw, const ColorPalette& palette,
                            const TrainConfig& config, bool regression,
                            std::uint64_t augment_key, std::uint64_t hint_key,
                            bool augment_enabled) {
    PreparedFrame out;
    out.sample = augment_enabled ? compose(raw, config.augment, augment_key) : raw;
    out.labels = out.sample.labels.empty() ? assign_labels(palette, out.sample.colors)
                                           : out.sample.labels;
    if (regression) {
        out.mask.assign(out.labels.size(), false);
        out.hints = Eigen::MatrixXd(static_cast<Eigen::Index>(out.labels.size()), 0);
        const std::vector<Color> colors = out.sample.colors.empty()
                                              ? reconstruct_colors(palette, out.labels)
                                              : out.sample.colors;
        out.targets.resize(static_cast<Eigen::Index>(colors.size()), 3);
        for (std::size_t i = 0; i < colors.size(); ++i) {
            for (int ch = 0; ch < 3; ++ch) {
                out.targets(static_cast<Eigen::Index>(i), ch) = colors[i][ch];
            }
        }
    } else {
        CounterRng rng(hint_key);
        out.mask = make_hints(out.labels, config.seed_ratio, config.seed_strategy, rng);
        out.hints = encode_hints(out.labels, out.mask, palette.k());
    }
    return out;
}

std::vector<int> predictions_for(const Eigen::MatrixXd& outputs, bool regression,
                                 const ColorPalette& palette) {
    if (!regression) {
        return predict(outputs);
    }
    std::vector<Color> colors(static_cast<std::size_t>(outputs.rows()));
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        colors[static_cast<std::size_t>(i)] = {outputs(i, 0), outputs(i, 1), outputs(i, 2)};
    }
    return assign_labels(palette, colors);
}

LossResult frame_loss(const Eigen::MatrixXd& outputs, const PreparedFrame& frame,
                      LossKind kind, const ClassWeights& batch_alpha) {
    switch (kind) {
        case LossKind::BalancedSoftmax:
            return balanced_softmax_loss(outputs, frame.labels, batch_alpha);
        case LossKind::CrossEntropy:
            return cross_entropy_loss(outputs, frame.labels);
        case LossKind::Mse:
            return mse_loss(outputs, frame.targets);
        case LossKind::SmoothL1:
            return smooth_l1_loss(outputs, frame.targets);
    }
    throw data_error("frame_loss: unknown loss kind");
}

} // namespace

TrainResult train(std::span<const PointSample> dataset, const ColorPalette& palette,
                  const ModelConfig& model_config, const TrainConfig& config_in,
                  std::optional<int> stop_after_epochs, const Checkpoint* resume_from) {
    if (dataset.empty()) {
        throw data_error("train: empty dataset");
    }
    const TrainConfig config = resume_from ? resume_from->train_config : config_in;
    config.validate();
    const bool regression = is_regression_loss(config.loss);

    TrainResult result;
    if (resume_from) {
        result.params = resume_from->params;
        result.optimizer = resume_from->optimizer;
        result.epochs_completed = resume_from->epochs_completed;
    } else {
        result.params = init_params(model_config, rng_stream(config.rng_seed, streams::kParamInit));
        result.optimizer.m.assign(result.params.parameter_count(), 0.0);
        result.optimizer.v.assign(result.params.parameter_count(), 0.0);
    }

    const std::int64_t frames = static_cast<std::int64_t>(dataset.size());
    const std::int64_t batches_per_epoch = (frames + config.batch_size - 1) / config.batch_size;
    const std::int64_t total_steps = static_cast<std::int64_t>(config.epochs) * batches_per_epoch;
    std::int64_t step = static_cast<std::int64_t>(result.epochs_completed) * batches_per_epoch;

    const int last_epoch = stop_after_epochs ? std::min(*stop_after_epochs, config.epochs)
                                             : config.epochs;

    for (int epoch = result.epochs_completed; epoch < last_epoch; ++epoch) {
        CounterRng shuffle_rng(
            rng_stream(rng_stream(config.rng_seed, streams::kEpochShuffle), epoch));
        const std::vector<std::size_t> order = shuffle_rng.permutation(dataset.size());

        ClassTally tally(palette.k());
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = cosine_lr(step, total_steps, config.max_lr);

        for (std::int64_t b = 0; b < batches_per_epoch; ++b) {
            const double lr = cosine_lr(step, total_steps, config.max_lr);
            const std::size_t begin = static_cast<std::size_t>(b) * config.batch_size;
            const std::size_t end =
                std::min(dataset.size(), begin + static_cast<std::size_t>(config.batch_size));

            std::vector<PreparedFrame> batch;
            batch.reserve(end - begin);
            std::vector<int> batch_labels;
            for (std::size_t s = begin; s < end; ++s) {
                const std::size_t f = order[s];
                const std::uint64_t augment_key = rng_stream(
                    rng_stream(rng_stream(config.rng_seed, streams::kFrameAugment), epoch), f);
                const std::uint64_t hint_key = rng_stream(
                    rng_stream(rng_stream(config.rng_seed, streams::kFrameHints), epoch), f);
                batch.push_back(prepare_frame(dataset[f], palette, config, regression,
                                              augment_key, hint_key, config.augment_enabled));
                batch_labels.insert(batch_labels.end(), batch.back().labels.begin(),
                                    batch.back().labels.end());
            }

            ClassWeights batch_alpha;
            if (config.loss == LossKind::BalancedSoftmax) {
                batch_alpha = batch_class_weights(batch_labels, palette.k(), config.alpha_epsilon);
            }

            std::size_t total_points = 0;
            for (const PreparedFrame& frame : batch) {
                total_points += frame.labels.size();
            }

            result.params.zero_grads();
            for (const PreparedFrame& frame : batch) {
                ForwardTrace trace;
                const Eigen::MatrixXd outputs =
                    forward_traced(result.params, frame.sample.points, frame.hints, trace);
                const LossResult loss = frame_loss(outputs, frame, config.loss, batch_alpha);
                // Refold the per-frame mean into the batch mean over points.
                const double scale =
                    static_cast<double>(frame.labels.size()) / static_cast<double>(total_points);
                backward_traced(result.params, trace, loss.grad * scale, /*accumulate=*/true);
                tally.loss_sum += loss.value * static_cast<double>(frame.labels.size());
                tally.add_frame(frame.labels, predictions_for(outputs, regression, palette),
                                frame.mask);
            }
            adamw_step(result.params.values(), result.params.grads(), result.optimizer, lr,
                       config);
            ++step;
        }

        stats.metrics = tally.finish();
        result.epochs.push_back(stats);
        result.epochs_completed = epoch + 1;
    }
    result.steps_completed = step;
    result.total_steps = total_steps;
    return result;
}

Metrics evaluate(const ModelParams& params, std::span<const PointSample> dataset,
                 const ColorPalette& palette, double seed_ratio, std::uint64_t rng_seed,
                 LossKind loss, double alpha_epsilon, SeedStrategy strategy) {
    if (dataset.empty()) {
        throw data_error("evaluate: empty dataset");
    }
    const bool regression = is_regression_loss(loss);
    ClassTally tally(palette.k());
    for (std::size_t f = 0; f < dataset.size(); ++f) {
        const PointSample& sample = dataset[f];
        const std::vector<int> labels =
            sample.labels.empty() ? assign_labels(palette, sample.colors) : sample.labels;
        std::vector<bool> mask;
        Eigen::MatrixXd hints;
        Eigen::MatrixXd targets;
        if (regression) {
            mask.assign(labels.size(), false);
            hints = Eigen::MatrixXd(static_cast<Eigen::Index>(labels.size()), 0);
            const std::vector<Color> colors =
                sample.colors.empty() ? reconstruct_colors(palette, labels) : sample.colors;
            targets.resize(static_cast<Eigen::Index>(colors.size()), 3);
            for (std::size_t i = 0; i < colors.size(); ++i) {
                for (int ch = 0; ch < 3; ++ch) {
                    targets(static_cast<Eigen::Index>(i), ch) = colors[i][ch];
                }
            }
        } else {
            CounterRng rng(rng_stream(rng_stream(rng_seed, streams::kEvalHints), f));
            mask = make_hints(labels, seed_ratio, strategy, rng);
            hints = encode_hints(labels, mask, palette.k());
        }
        const Eigen::MatrixXd outputs = forward(params, sample.points, hints);
        double loss_value = 0.0;
        if (regression) {
            loss_value = (loss == LossKind::Mse) ? mse_loss(outputs, targets).value
                                                 : smooth_l1_loss(outputs, targets).value;
        } else if (loss == LossKind::CrossEntropy) {
            loss_value = cross_entropy_loss(outputs, labels).value;
        } else {
            const ClassWeights alpha = batch_class_weights(labels, palette.k(), alpha_epsilon);
            loss_value = balanced_softmax_loss(outputs, labels, alpha).value;
        }
        tally.loss_sum += loss_value * static_cast<double>(labels.size());
        tally.add_frame(labels, predictions_for(outputs, regression, palette), mask);
    }
    return tally.finish();
}

Eigen::MatrixXd export_features(const ModelParams& params,
                                std::span<const Eigen::Vector3d> points) {
    const FeatureMatrix features = backbone_forward(params, points);
    Eigen::MatrixXd out(features.rows(), 3 + features.cols());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        out(i, 0) = points[static_cast<std::size_t>(i)].x();
        out(i, 1) = points[static_cast<std::size_t>(i)].y();
        out(i, 2) = points[static_cast<std::size_t>(i)].z();
    }
    out.rightCols(features.cols()) = features;
    return out;
}

namespace {

constexpr char kCheckpointMagic[6] = {'P', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw io_error("checkpoint truncated");
    }
    return v;
}

void put_widths(std::ostream& out, const std::vector<int>& widths) {
    put(out, static_cast<std::uint32_t>(widths.size()));
    for (int w : widths) {
        put(out, static_cast<std::int32_t>(w));
    }
}

std::vector<int> get_widths(std::istream& in) {
    const auto count = get<std::uint32_t>(in);
    std::vector<int> widths(count);
    for (auto& w : widths) {
        w = get<std::int32_t>(in);
    }
    return widths;
}

void put_flat(std::ostream& out, const std::vector<double>& values) {
    put(out, static_cast<std::uint64_t>(values.size()));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(sizeof(double) * values.size()));
}

std::vector<double> get_flat(std::istream& in) {
    const auto count = get<std::uint64_t>(in);
    std::vector<double> values(count);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * count));
    if (!in) {
        throw io_error("checkpoint truncated");
    }
    return values;
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ostringstream out(std::ios::binary);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    put(out, kCheckpointVersion);

    const ModelConfig& mc = ckpt.params.config();
    put(out, static_cast<std::int32_t>(mc.num_classes));
    put(out, static_cast<std::int32_t>(mc.feature_dim));
    put(out, static_cast<std::int32_t>(mc.global_width));
    put(out, static_cast<std::int32_t>(mc.hint_dim));
    put(out, static_cast<std::int32_t>(mc.output_dim));
    put_widths(out, mc.encoder_widths);
    put_widths(out, mc.decoder_widths);

    const TrainConfig& tc = ckpt.train_config;
    put(out, static_cast<std::int32_t>(tc.epochs));
    put(out, static_cast<std::int32_t>(tc.batch_size));
    put(out, tc.max_lr);
    put(out, tc.weight_decay);
    put(out, tc.beta1);
    put(out, tc.beta2);
    put(out, tc.adam_eps);
    put(out, tc.seed_ratio);
    put(out, static_cast<std::uint8_t>(tc.seed_strategy));
    put(out, static_cast<std::uint8_t>(tc.loss));
    put(out, tc.alpha_epsilon);
    put(out, tc.rng_seed);
    put(out, static_cast<std::uint8_t>(tc.augment_enabled ? 1 : 0));
    put(out, tc.augment.flip_prob);
    put(out, tc.augment.rot_range);
    put(out, tc.augment.scale_lo);
    put(out, tc.augment.scale_hi);
    put(out, static_cast<std::int32_t>(tc.augment.target_points));
    put(out, tc.augment.range_m);
    put(out, static_cast<std::uint8_t>(tc.augment.shuffle ? 1 : 0));

    put(out, static_cast<std::int32_t>(ckpt.epochs_completed));
    put(out, static_cast<std::int64_t>(ckpt.steps_completed));
    put(out, static_cast<std::int64_t>(ckpt.total_steps));

    // Each parameter tensor as its own shape-headed block, then the
    // optimizer moments and step counter.
    for (std::size_t t = 0; t < ckpt.params.layout().size(); ++t) {
        write_tensor_block(out, ckpt.params.tensor(t), TensorDType::F64);
    }
    put_flat(out, ckpt.optimizer.m);
    put_flat(out, ckpt.optimizer.v);
    put(out, static_cast<std::uint64_t>(ckpt.optimizer.step));

    write_file_atomic(path, out.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open checkpoint " + path.string());
    }
    char magic[6];
    in.read(magic, 6);
    if (!in || std::memcmp(magic, kCheckpointMagic, 6) != 0) {
        throw io_error("checkpoint " + path.string() + ": bad magic");
    }
    if (get<std::uint8_t>(in) != kCheckpointVersion) {
        throw io_error("checkpoint " + path.string() + ": unsupported version");
    }

    ModelConfig mc;
    mc.num_classes = get<std::int32_t>(in);
    mc.feature_dim = get<std::int32_t>(in);
    mc.global_width = get<std::int32_t>(in);
    mc.hint_dim = get<std::int32_t>(in);
    mc.output_dim = get<std::int32_t>(in);
    mc.encoder_widths = get_widths(in);
    mc.decoder_widths = get_widths(in);

    Checkpoint ckpt;
    TrainConfig& tc = ckpt.train_config;
    tc.epochs = get<std::int32_t>(in);
    tc.batch_size = get<std::int32_t>(in);
    tc.max_lr = get<double>(in);
    tc.weight_decay = get<double>(in);
    tc.beta1 = get<double>(in);
    tc.beta2 = get<double>(in);
    tc.adam_eps = get<double>(in);
    tc.seed_ratio = get<double>(in);
    tc.seed_strategy = static_cast<SeedStrategy>(get<std::uint8_t>(in));
    tc.loss = static_cast<LossKind>(get<std::uint8_t>(in));
    tc.alpha_epsilon = get<double>(in);
    tc.rng_seed = get<std::uint64_t>(in);
    tc.augment_enabled = get<std::uint8_t>(in) != 0;
    tc.augment.flip_prob = get<double>(in);
    tc.augment.rot_range = get<double>(in);
    tc.augment.scale_lo = get<double>(in);
    tc.augment.scale_hi = get<double>(in);
    tc.augment.target_points = get<std::int32_t>(in);
    tc.augment.range_m = get<double>(in);
    tc.augment.shuffle = get<std::uint8_t>(in) != 0;

    ckpt.epochs_completed = get<std::int32_t>(in);
    ckpt.steps_completed = get<std::int64_t>(in);
    ckpt.total_steps = get<std::int64_t>(in);

    ckpt.params = ModelParams(mc);
    for (std::size_t t = 0; t < ckpt.params.layout().size(); ++t) {
        const Eigen::MatrixXd tensor = read_tensor_block(in);
        auto dst = ckpt.params.tensor(t);
        if (tensor.rows() != dst.rows() || tensor.cols() != dst.cols()) {
            throw io_error("checkpoint " + path.string() + ": tensor shape mismatch at " +
                           ckpt.params.layout()[t].name);
        }
        dst = tensor;
    }
    ckpt.optimizer.m = get_flat(in);
    ckpt.optimizer.v = get_flat(in);
    ckpt.optimizer.step = get<std::uint64_t>(in);
    if (ckpt.optimizer.m.size() != ckpt.params.parameter_count() ||
        ckpt.optimizer.v.size() != ckpt.params.parameter_count()) {
        throw io_error("checkpoint " + path.string() + ": optimizer state size mismatch");
    }
    return ckpt;
}

} // namespace pointcolor
