#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace pointcolor {

// Malformed or unreadable input data (files, records, headers).
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Arguments or data that violate a documented precondition.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or numerically invalid state.
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// RGB color with channels in [0, 1].
using Color = std::array<double, 3>;

// Rounds to the nearest float32 value, returned as a double. The volatile
// store blocks the conversion-chain collapse some optimizers apply to
// double->float->double round trips, which would break the bit-exactness
// of float32 file payloads.
inline double f32_round(double v) {
    volatile float f = static_cast<float>(v);
    return static_cast<double>(f);
}

} // namespace pointcolor
