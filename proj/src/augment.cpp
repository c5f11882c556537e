#include "pointcolor/augment.hpp"

#include <cmath>

namespace pointcolor {

void PointSample::check_consistent() const {
    const std::size_t n = points.size();
    auto check = [&](std::size_t len, const char* name) {
        if (len != 0 && len != n) {
            throw data_error(std::string("point sample: ") + name + " length " +
                             std::to_string(len) + " != point count " + std::to_string(n));
        }
    };
    check(colors.size(), "colors");
    check(labels.size(), "labels");
    check(instance_ids.size(), "instance_ids");
}

void AugmentConfig::validate() const {
    if (flip_prob < 0.0 || flip_prob > 1.0) {
        throw data_error("augment: flip_prob outside [0, 1]");
    }
    if (!(scale_lo > 0.0) || scale_lo > scale_hi) {
        throw data_error("augment: need 0 < scale_lo <= scale_hi");
    }
    if (target_points < 1) {
        throw data_error("augment: target_points must be >= 1");
    }
    if (!(range_m > 0.0)) {
        throw data_error("augment: range_m must be positive");
    }
}

PointSample random_flip(PointSample sample, double draw, double flip_prob) {
    if (draw < flip_prob) {
        for (auto& p : sample.points) {
            p.y() = -p.y();
        }
    }
    return sample;
}

PointSample random_rotate(PointSample sample, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (auto& p : sample.points) {
        const double x = p.x();
        const double y = p.y();
        p.x() = c * x - s * y;
        p.y() = s * x + c * y;
    }
    return sample;
}

PointSample random_scale(PointSample sample, double scale) {
    for (auto& p : sample.points) {
        p *= scale;
    }
    return sample;
}

namespace {

PointSample select(const PointSample& sample, const std::vector<std::size_t>& indices) {
    PointSample out;
    out.points.reserve(indices.size());
    for (std::size_t i : indices) {
        out.points.push_back(sample.points[i]);
        if (!sample.colors.empty()) {
            out.colors.push_back(sample.colors[i]);
        }
        if (!sample.labels.empty()) {
            out.labels.push_back(sample.labels[i]);
        }
        if (!sample.instance_ids.empty()) {
            out.instance_ids.push_back(sample.instance_ids[i]);
        }
    }
    return out;
}

} // namespace

PointSample sample_points(PointSample sample, int target_points, double range_m,
                          CounterRng& rng) {
    sample.check_consistent();
    std::vector<std::size_t> survivors;
    survivors.reserve(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        if (sample.points[i].norm() <= range_m) {
            survivors.push_back(i);
        }
    }
    if (survivors.empty()) {
        throw data_error("sample_points: no point within range " + std::to_string(range_m));
    }
    const std::size_t target = static_cast<std::size_t>(target_points);
    std::vector<std::size_t> chosen;
    if (survivors.size() >= target) {
        const auto picks = rng.sample_without_replacement(survivors.size(), target);
        chosen.reserve(target);
        for (std::size_t p : picks) {
            chosen.push_back(survivors[p]);
        }
    } else {
        chosen = survivors;
        while (chosen.size() < target) {
            chosen.push_back(survivors[rng.next_index(survivors.size())]);
        }
    }
    return select(sample, chosen);
}

PointSample shuffle_points(PointSample sample, CounterRng& rng) {
    sample.check_consistent();
    return select(sample, rng.permutation(sample.size()));
}

PointSample compose(PointSample sample, const AugmentConfig& config, std::uint64_t rng_seed) {
    config.validate();
    sample.check_consistent();

    CounterRng flip_rng(rng_stream(rng_seed, streams::kAugmentFlip));
    sample = random_flip(std::move(sample), flip_rng.next_double(), config.flip_prob);

    CounterRng rot_rng(rng_stream(rng_seed, streams::kAugmentRotate));
    const double angle = (2.0 * rot_rng.next_double() - 1.0) * config.rot_range;
    sample = random_rotate(std::move(sample), angle);

    CounterRng scale_rng(rng_stream(rng_seed, streams::kAugmentScale));
    const double scale =
        config.scale_lo + scale_rng.next_double() * (config.scale_hi - config.scale_lo);
    sample = random_scale(std::move(sample), scale);

    CounterRng sample_rng(rng_stream(rng_seed, streams::kAugmentSample));
    sample = sample_points(std::move(sample), config.target_points, config.range_m, sample_rng);

    if (config.shuffle) {
        CounterRng shuffle_rng(rng_stream(rng_seed, streams::kAugmentShuffle));
        sample = shuffle_points(std::move(sample), shuffle_rng);
    }
    return sample;
}

} // namespace pointcolor
