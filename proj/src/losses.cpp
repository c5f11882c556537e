#include "pointcolor/losses.hpp"

#include <cmath>

namespace pointcolor {

LossKind parse_loss_kind(const std::string& name) {
    if (name == "bs") return LossKind::BalancedSoftmax;
    if (name == "ce") return LossKind::CrossEntropy;
    if (name == "mse") return LossKind::Mse;
    if (name == "sl1") return LossKind::SmoothL1;
    throw data_error("unknown loss kind '" + name + "' (expected bs, ce, mse, or sl1)");
}

std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::BalancedSoftmax: return "bs";
        case LossKind::CrossEntropy: return "ce";
        case LossKind::Mse: return "mse";
        case LossKind::SmoothL1: return "sl1";
    }
    return "?";
}

bool is_regression_loss(LossKind kind) {
    return kind == LossKind::Mse || kind == LossKind::SmoothL1;
}

ClassWeights batch_class_weights(std::span<const int> labels, int num_classes, double epsilon) {
    if (num_classes < 1) {
        throw data_error("batch_class_weights: num_classes must be >= 1");
    }
    ClassWeights weights;
    weights.epsilon = epsilon;
    weights.alpha = Eigen::VectorXd::Constant(num_classes, epsilon);
    for (int label : labels) {
        if (label < 1 || label > num_classes) {
            throw data_error("batch_class_weights: label " + std::to_string(label) +
                             " outside {1.." + std::to_string(num_classes) + "}");
        }
        weights.alpha(label - 1) += 1.0;
    }
    if ((weights.alpha.array() <= 0.0).any()) {
        throw data_error("batch_class_weights: non-positive alpha (epsilon too small?)");
    }
    return weights;
}

LossResult balanced_softmax_loss(const Eigen::MatrixXd& logits, std::span<const int> labels,
                                 const ClassWeights& weights) {
    const Eigen::Index n = logits.rows();
    const Eigen::Index k = logits.cols();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw data_error("balanced_softmax_loss: label count mismatch");
    }
    if (weights.alpha.size() != k) {
        throw data_error("balanced_softmax_loss: alpha size mismatch");
    }
    if ((weights.alpha.array() <= 0.0).any()) {
        throw data_error("balanced_softmax_loss: alpha must be positive");
    }
    if (!logits.allFinite()) {
        throw numeric_error("balanced_softmax_loss: non-finite logits");
    }

    // The alpha factors fold into the logits as additive log terms:
    // -log(a_y e^{z_y} / sum_c a_c e^{z_c}) = logsumexp(z + log a) - (z_y + log a_y).
    const Eigen::VectorXd log_alpha = weights.alpha.array().log().matrix();
    LossResult result;
    result.grad.resize(n, k);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 1 || label > k) {
            throw data_error("balanced_softmax_loss: label " + std::to_string(label) +
                             " outside {1.." + std::to_string(k) + "}");
        }
        const Eigen::RowVectorXd shifted = logits.row(i) + log_alpha.transpose();
        const double m = shifted.maxCoeff();
        const Eigen::RowVectorXd exps = (shifted.array() - m).exp();
        const double z = exps.sum();
        total += m + std::log(z) - shifted(label - 1);
        result.grad.row(i) = exps / z;
        result.grad(i, label - 1) -= 1.0;
    }
    result.value = total / static_cast<double>(n);
    result.grad /= static_cast<double>(n);
    return result;
}

LossResult cross_entropy_loss(const Eigen::MatrixXd& logits, std::span<const int> labels) {
    ClassWeights uniform;
    uniform.alpha = Eigen::VectorXd::Ones(logits.cols());
    return balanced_softmax_loss(logits, labels, uniform);
}

LossResult mse_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target) {
    if (predicted.rows() != target.rows() || predicted.cols() != target.cols()) {
        throw data_error("mse_loss: shape mismatch");
    }
    if (!predicted.allFinite() || !target.allFinite()) {
        throw numeric_error("mse_loss: non-finite input");
    }
    const double count = static_cast<double>(predicted.size());
    const Eigen::MatrixXd residual = predicted - target;
    LossResult result;
    result.value = residual.squaredNorm() / count;
    result.grad = 2.0 * residual / count;
    return result;
}

LossResult smooth_l1_loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target,
                          double beta) {
    if (predicted.rows() != target.rows() || predicted.cols() != target.cols()) {
        throw data_error("smooth_l1_loss: shape mismatch");
    }
    if (!(beta > 0.0)) {
        throw data_error("smooth_l1_loss: beta must be positive");
    }
    if (!predicted.allFinite() || !target.allFinite()) {
        throw numeric_error("smooth_l1_loss: non-finite input");
    }
    const double count = static_cast<double>(predicted.size());
    LossResult result;
    result.grad.resize(predicted.rows(), predicted.cols());
    double total = 0.0;
    for (Eigen::Index j = 0; j < predicted.cols(); ++j) {
        for (Eigen::Index i = 0; i < predicted.rows(); ++i) {
            const double r = predicted(i, j) - target(i, j);
            if (std::abs(r) < beta) {
                total += 0.5 * r * r / beta;
                result.grad(i, j) = r / beta / count;
            } else {
                total += std::abs(r) - 0.5 * beta;
                result.grad(i, j) = (r > 0.0 ? 1.0 : -1.0) / count;
            }
        }
    }
    result.value = total / count;
    return result;
}

} // namespace pointcolor
