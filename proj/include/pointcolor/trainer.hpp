#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "pointcolor/augment.hpp"
#include "pointcolor/hinting.hpp"
#include "pointcolor/losses.hpp"
#include "pointcolor/model.hpp"
#include "pointcolor/palette.hpp"

namespace pointcolor {

struct TrainConfig {
    int epochs = 80;
    int batch_size = 16;
    double max_lr = 1e-3;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double seed_ratio = 0.2;
    SeedStrategy seed_strategy = SeedStrategy::Uniform;
    LossKind loss = LossKind::BalancedSoftmax;
    double alpha_epsilon = 0.1;
    std::uint64_t rng_seed = 0;
    bool augment_enabled = true;
    AugmentConfig augment;

    void validate() const;
};

// First and second Adam moment estimates plus the step counter; shapes
// mirror the flat parameter store.
struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

struct Metrics {
    double mean_loss = 0.0;
    double accuracy_all = 0.0;
    double accuracy_unknown = 0.0;
    std::vector<double> per_class_accuracy;    // K entries; NaN for absent classes
    std::vector<std::int64_t> per_class_count; // K entries
    std::size_t points_seen = 0;
    std::vector<double> per_frame_unknown_accuracy; // one entry per evaluated frame

    double per_class_mean_accuracy() const; // mean over classes that appear
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0; // learning rate at the epoch's first step
    Metrics metrics;
};

// lr(step) = 0.5 * max_lr * (1 + cos(pi * step / total_steps)).
double cosine_lr(std::int64_t step, std::int64_t total_steps, double max_lr);

// One AdamW update: bias-corrected moments, decoupled weight decay taken
// from the pre-step parameter values.
void adamw_step(std::vector<double>& params, const std::vector<double>& grads,
                OptimizerState& state, double lr, const TrainConfig& config);

struct TrainResult {
    ModelParams params;
    OptimizerState optimizer;
    std::vector<EpochStats> epochs;
    int epochs_completed = 0;
    std::int64_t steps_completed = 0;
    std::int64_t total_steps = 0;
};

// Training state captured by a checkpoint.
struct Checkpoint {
    ModelParams params;
    OptimizerState optimizer;
    TrainConfig train_config;
    int epochs_completed = 0;
    std::int64_t steps_completed = 0;
    std::int64_t total_steps = 0;
};

// Full pre-training loop: per epoch, deterministic frame shuffling,
// augmentation, label assignment, hint construction, forward, loss,
// backward, AdamW at the cosine learning rate. stop_after_epochs cuts the
// run short (for checkpoint/resume); config.epochs stays the schedule
// horizon. Deterministic given config.rng_seed.
TrainResult train(std::span<const PointSample> dataset, const ColorPalette& palette,
                  const ModelConfig& model_config, const TrainConfig& config,
                  std::optional<int> stop_after_epochs = std::nullopt,
                  const Checkpoint* resume_from = nullptr);

// No parameter updates; accuracy over all points and over unknown
// (non-seed) points at the given eval seed ratio. Seed ratio 0 is pure
// prediction. No augmentation is applied.
Metrics evaluate(const ModelParams& params, std::span<const PointSample> dataset,
                 const ColorPalette& palette, double seed_ratio, std::uint64_t rng_seed,
                 LossKind loss = LossKind::BalancedSoftmax, double alpha_epsilon = 0.1,
                 SeedStrategy strategy = SeedStrategy::Uniform);

// Rows (x, y, z, backbone feature): N x (3 + D).
Eigen::MatrixXd export_features(const ModelParams& params,
                                std::span<const Eigen::Vector3d> points);

// Checkpoint file with bit-exact round-trip; resuming from it reproduces
// the uninterrupted run exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace pointcolor
