#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace maform {

// Platform-independent draws from mt19937_64.
inline double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double standard_normal(std::mt19937_64& rng) {
    double u = unit_uniform(rng), w = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(1.0 - u)) * std::cos(2.0 * M_PI * w);
}

}  // namespace maform
