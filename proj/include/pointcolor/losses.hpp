#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pointcolor/common.hpp"

namespace pointcolor {

enum class LossKind { BalancedSoftmax, CrossEntropy, Mse, SmoothL1 };

LossKind parse_loss_kind(const std::string& name); // "bs" | "ce" | "mse" | "sl1"
std::string loss_kind_name(LossKind kind);
bool is_regression_loss(LossKind kind);

// Per-class balance factors, computed per mini-batch. The proportionality
// constant cancels inside the loss, so raw smoothed counts are used.
struct ClassWeights {
    Eigen::VectorXd alpha; // K entries, all positive
    double epsilon = 0.1;
};

ClassWeights batch_class_weights(std::span<const int> labels, int num_classes, double epsilon);

struct LossResult {
    double value = 0.0;
    Eigen::MatrixXd grad; // same shape as the predictions, d(mean loss)/d(pred)
};

// Mean over points of -log(alpha_y * exp(eta_y) / sum_c alpha_c * exp(eta_c)),
// computed with max-subtraction. Throws numeric_error on non-finite logits
// and data_error on labels outside {1..K}.
LossResult balanced_softmax_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                 const ClassWeights& weights);

// Balanced softmax with uniform alpha.
LossResult cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const int> labels);

// Mean squared error over all N x 3 channels.
LossResult mse_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target);

// Huber-style transition at beta, mean-reduced over all channels.
LossResult smooth_l1_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target,
                          double beta = 1.0);

} // namespace pointcolor
