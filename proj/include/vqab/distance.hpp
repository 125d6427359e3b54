#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace vqab {

// Fixed left-to-right summation so every caller gets bit-identical values.
inline double squared_l2(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

inline double l2(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_l2(a, b));
}

}  // namespace vqab
