#include "pointcolor/rng.hpp"

#include <cmath>
#include <numbers>

namespace pointcolor {

double CounterRng::next_normal() {
    // Box-Muller; u1 is kept away from 0 so the log stays finite.
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> CounterRng::permutation(std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(next_index(i));
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

std::vector<std::size_t> CounterRng::sample_without_replacement(std::size_t n, std::size_t m) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) {
        pool[i] = i;
    }
    // Partial Fisher-Yates: only the first m slots are settled.
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(next_index(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(m);
    return pool;
}

} // namespace pointcolor
