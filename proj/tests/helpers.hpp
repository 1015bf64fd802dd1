#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pairflow/algebra.hpp"

// Shared helpers for the test suite. Deliberately self-contained: oracle
// machinery here must not lean on the library pieces it is used to check.
namespace testutil {

using pairflow::Mat3;
using pairflow::Vec3;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& g, double lo = 0.0, double hi = 1.0) {
    // top 53 bits -> [0,1); keeps the stream identical across platforms
    double u = double(g() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline Vec3 random_unit(std::mt19937_64& g) {
    while (true) {
        Vec3 v{uniform(g, -1.0, 1.0), uniform(g, -1.0, 1.0), uniform(g, -1.0, 1.0)};
        double n2 = pairflow::norm2(v);
        if (n2 > 1e-4 && n2 <= 1.0) return v / std::sqrt(n2);
    }
}

inline Vec3 random_vec(std::mt19937_64& g, double scale = 1.0) {
    return {uniform(g, -scale, scale), uniform(g, -scale, scale), uniform(g, -scale, scale)};
}

/// Uniformly distributed rotation matrix (quaternion method).
inline Mat3 random_rotation(std::mt19937_64& g) {
    double u1 = uniform(g), u2 = uniform(g), u3 = uniform(g);
    double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
    double qw = a * std::sin(2.0 * M_PI * u2);
    double qx = a * std::cos(2.0 * M_PI * u2);
    double qy = b * std::sin(2.0 * M_PI * u3);
    double qz = b * std::cos(2.0 * M_PI * u3);
    Mat3 R;
    R(0, 0) = 1 - 2 * (qy * qy + qz * qz);
    R(0, 1) = 2 * (qx * qy - qz * qw);
    R(0, 2) = 2 * (qx * qz + qy * qw);
    R(1, 0) = 2 * (qx * qy + qz * qw);
    R(1, 1) = 1 - 2 * (qx * qx + qz * qz);
    R(1, 2) = 2 * (qy * qz - qx * qw);
    R(2, 0) = 2 * (qx * qz - qy * qw);
    R(2, 1) = 2 * (qy * qz + qx * qw);
    R(2, 2) = 1 - 2 * (qx * qx + qy * qy);
    return R;
}

/// Least-squares slope of log(y) against log(x). Test-side copy, so slope
/// checks stay independent of the library's fit.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
}

}  // namespace testutil
