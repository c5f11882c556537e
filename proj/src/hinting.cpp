#include "pointcolor/hinting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "pointcolor/common.hpp"

namespace pointcolor {

namespace {

std::size_t seed_budget(std::size_t n, double seed_ratio) {
    if (seed_ratio < 0.0 || seed_ratio > 1.0) {
        throw data_error("seed_ratio outside [0, 1]");
    }
    // Half-away-from-zero rounding of ratio * N.
    return static_cast<std::size_t>(std::llround(seed_ratio * static_cast<double>(n)));
}

// Largest-remainder apportionment of `total` over weights, capped at
// per-class capacities; the surplus from capped classes is redistributed
// proportionally among the rest.
std::vector<std::size_t> apportion(const std::vector<double>& weights,
                                   const std::vector<std::size_t>& capacity,
                                   std::size_t total) {
    const std::size_t k = weights.size();
    std::vector<std::size_t> quota(k, 0);
    std::vector<bool> capped(k, false);
    std::size_t remaining = total;
    while (remaining > 0) {
        double weight_sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (!capped[c]) {
                weight_sum += weights[c];
            }
        }
        if (weight_sum <= 0.0) {
            break; // every class full
        }
        std::vector<double> share(k, 0.0);
        std::vector<std::size_t> add(k, 0);
        std::size_t assigned = 0;
        for (std::size_t c = 0; c < k; ++c) {
            if (capped[c]) {
                continue;
            }
            share[c] = static_cast<double>(remaining) * weights[c] / weight_sum;
            add[c] = static_cast<std::size_t>(std::floor(share[c]));
            assigned += add[c];
        }
        // Distribute the leftover units by largest fractional part,
        // breaking ties toward the lower class index.
        std::size_t leftover = remaining - assigned;
        std::vector<std::size_t> order;
        for (std::size_t c = 0; c < k; ++c) {
            if (!capped[c]) {
                order.push_back(c);
            }
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return share[a] - std::floor(share[a]) > share[b] - std::floor(share[b]);
        });
        for (std::size_t i = 0; i < order.size() && leftover > 0; ++i, --leftover) {
            ++add[order[i]];
        }
        // Apply with capacity clipping; the clipped surplus carries into
        // the next round over the still-open classes.
        remaining = 0;
        for (std::size_t c = 0; c < k; ++c) {
            if (capped[c]) {
                continue;
            }
            const std::size_t room = capacity[c] - quota[c];
            const std::size_t take = std::min(add[c], room);
            quota[c] += take;
            remaining += add[c] - take;
            if (quota[c] == capacity[c]) {
                capped[c] = true;
            }
        }
    }
    return quota;
}

} // namespace

std::vector<bool> make_hints_uniform(std::span<const int> labels, double seed_ratio,
                                     CounterRng& rng) {
    const std::size_t n = labels.size();
    const std::size_t budget = seed_budget(n, seed_ratio);
    std::vector<bool> mask(n, false);
    for (std::size_t i : rng.sample_without_replacement(n, budget)) {
        mask[i] = true;
    }
    return mask;
}

std::vector<bool> make_hints_balanced(std::span<const int> labels, double seed_ratio,
                                      CounterRng& rng) {
    const std::size_t n = labels.size();
    const std::size_t budget = seed_budget(n, seed_ratio);
    std::vector<bool> mask(n, false);
    if (budget == 0 || n == 0) {
        return mask;
    }

    // Class membership in first-appearance order of the label values.
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
        members[labels[i]].push_back(i);
    }
    std::vector<double> weights;
    std::vector<std::size_t> capacity;
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [label, idx] : members) {
        weights.push_back(std::sqrt(static_cast<double>(idx.size())));
        capacity.push_back(idx.size());
        groups.push_back(&idx);
    }
    const std::vector<std::size_t> quota = apportion(weights, capacity, budget);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t pick : rng.sample_without_replacement(groups[g]->size(), quota[g])) {
            mask[(*groups[g])[pick]] = true;
        }
    }
    return mask;
}

std::vector<bool> make_hints(std::span<const int> labels, double seed_ratio,
                             SeedStrategy strategy, CounterRng& rng) {
    return strategy == SeedStrategy::Uniform ? make_hints_uniform(labels, seed_ratio, rng)
                                             : make_hints_balanced(labels, seed_ratio, rng);
}

Eigen::MatrixXd encode_hints(std::span<const int> labels, const std::vector<bool>& seed_mask,
                             int num_classes) {
    const std::size_t n = labels.size();
    if (seed_mask.size() != n) {
        throw data_error("encode_hints: mask length != label length");
    }
    Eigen::MatrixXd hints = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        if (!seed_mask[i]) {
            continue;
        }
        const int label = labels[i];
        if (label < 1 || label > num_classes) {
            throw data_error("encode_hints: label " + std::to_string(label) + " outside {1.." +
                             std::to_string(num_classes) + "}");
        }
        hints(static_cast<Eigen::Index>(i), label - 1) = 1.0;
    }
    return hints;
}

} // namespace pointcolor
