#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pointcolor/rng.hpp"

namespace pointcolor {

enum class SeedStrategy { Uniform, Balanced };

// Exactly round(seed_ratio * N) seeds chosen uniformly without
// replacement; round is half-away-from-zero.
std::vector<bool> make_hints_uniform(std::span<const int> labels, double seed_ratio,
                                     CounterRng& rng);

// Same total seed count, with per-class quotas proportional to
// sqrt(class point count), largest-remainder rounding, clipped at the
// class size with surplus redistributed proportionally.
std::vector<bool> make_hints_balanced(std::span<const int> labels, double seed_ratio,
                                      CounterRng& rng);

std::vector<bool> make_hints(std::span<const int> labels, double seed_ratio,
                             SeedStrategy strategy, CounterRng& rng);

// N x K hint rows: one-hot of the label for seeds, all-zero otherwise.
Eigen::MatrixXd encode_hints(std::span<const int> labels, const std::vector<bool>& seed_mask,
                             int num_classes);

} // namespace pointcolor
