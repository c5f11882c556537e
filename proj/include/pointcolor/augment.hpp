#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "pointcolor/common.hpp"
#include "pointcolor/rng.hpp"

namespace pointcolor {

// One training unit: a point cloud with whatever per-point attributes the
// frame carries. Optional vectors are either empty or full length; every
// augmentation permutes and filters them together with the points.
struct PointSample {
    std::vector<Eigen::Vector3d> points;
    std::vector<Color> colors;
    std::vector<int> labels;       // 1-based palette labels
    std::vector<int> instance_ids; // synthetic-scene instances (oracle use)

    std::size_t size() const { return points.size(); }
    void check_consistent() const;
};

struct AugmentConfig {
    double flip_prob = 0.5;
    double rot_range = 0.78539816339744830961; // pi/4 radians
    double scale_lo = 0.95;
    double scale_hi = 1.05;
    int target_points = 16384;
    double range_m = 40.0;
    bool shuffle = true;

    void validate() const;
};

// Mirrors across the x-z plane (negates y) when draw < flip_prob.
PointSample random_flip(PointSample sample, double draw, double flip_prob);

// Rotates all points about the z (up) axis by angle radians.
PointSample random_rotate(PointSample sample, double angle);

// Multiplies all coordinates by scale.
PointSample random_scale(PointSample sample, double scale);

// Drops points farther than range_m from the origin, then resizes to
// exactly target_points: without replacement when enough survive,
// otherwise all survivors plus a with-replacement deficit. Throws
// data_error when no point survives the range cut.
PointSample sample_points(PointSample sample, int target_points, double range_m, CounterRng& rng);

// One permutation applied identically to every per-point attribute.
PointSample shuffle_points(PointSample sample, CounterRng& rng);

// flip -> rotate -> scale -> sample -> shuffle, all draws from counter
// streams derived from rng_seed.
PointSample compose(PointSample sample, const AugmentConfig& config, std::uint64_t rng_seed);

} // namespace pointcolor
