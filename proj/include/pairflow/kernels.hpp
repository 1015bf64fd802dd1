#pragma once

#include <cmath>

#include "pairflow/algebra.hpp"
#include "pairflow/errors.hpp"

/// Free-space Stokes singularity kernels and the smooth cutoff used to
/// truncate them near particles.
///
/// Conventions: the velocity kernel is
///     Phi(x) = (1/8pi) (I/|x| + x⊗x/|x|^3),
/// the matching pressure kernel is P(x) = x/(4pi |x|^3), and gradients are
/// stored with the derivative index last: oseen_gradient(x)[k](i,j) = d_k Phi_ij.
namespace pairflow::kernels {

inline constexpr double pi = 3.14159265358979323846;

/// Velocity kernel. Undefined at the origin; callers must keep x != 0.
inline Mat3 oseen(Vec3 x) {
    double r2 = norm2(x);
    if (r2 == 0.0) throw degenerate_input_error("oseen kernel evaluated at the origin");
    double r = std::sqrt(r2);
    double c = 1.0 / (8.0 * pi);
    Mat3 out = (c / r) * Mat3::identity();
    out += (c / (r * r2)) * outer(x, x);
    return out;
}

/// Pressure kernel P(x) = x / (4pi |x|^3).
inline Vec3 oseen_pressure(Vec3 x) {
    double r2 = norm2(x);
    if (r2 == 0.0) throw degenerate_input_error("pressure kernel evaluated at the origin");
    double r = std::sqrt(r2);
    return (1.0 / (4.0 * pi * r * r2)) * x;
}

/// d_k Phi_ij, all 27 components.
inline Rank3 oseen_gradient(Vec3 x) {
    double r2 = norm2(x);
    if (r2 == 0.0) throw degenerate_input_error("oseen gradient evaluated at the origin");
    double r = std::sqrt(r2);
    double c = 1.0 / (8.0 * pi);
    double ir3 = 1.0 / (r * r2);
    double ir5 = ir3 / r2;
    Rank3 g;
    for (std::size_t k = 0; k < 3; ++k) {
        Mat3& gk = g[k];
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double v = -(i == j ? x[k] : 0.0) * ir3;
                if (i == k) v += x[j] * ir3;
                if (j == k) v += x[i] * ir3;
                v -= 3.0 * x[i] * x[j] * x[k] * ir5;
                gk(i, j) = c * v;
            }
    }
    return g;
}

/// d_k d_l Phi_ij.
inline Rank4 oseen_hessian(Vec3 x) {
    double r2 = norm2(x);
    if (r2 == 0.0) throw degenerate_input_error("oseen hessian evaluated at the origin");
    double r = std::sqrt(r2);
    double c = 1.0 / (8.0 * pi);
    double ir3 = 1.0 / (r * r2);
    double ir5 = ir3 / r2;
    double ir7 = ir5 / r2;
    Rank4 h;
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t l = 0; l < 3; ++l) {
            Mat3& m = h[k][l];
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j) {
                    double v = 0.0;
                    if (i == j) v -= (k == l ? ir3 : 0.0) - 3.0 * x[k] * x[l] * ir5;
                    if (i == k && j == l) v += ir3;
                    if (j == k && i == l) v += ir3;
                    if (i == k) v -= 3.0 * x[j] * x[l] * ir5;
                    if (j == k) v -= 3.0 * x[i] * x[l] * ir5;
                    if (i == l) v -= 3.0 * x[j] * x[k] * ir5;
                    if (j == l) v -= 3.0 * x[i] * x[k] * ir5;
                    if (k == l) v -= 3.0 * x[i] * x[j] * ir5;
                    v += 15.0 * x[i] * x[j] * x[k] * x[l] * ir7;
                    m(i, j) = c * v;
                }
        }
    return h;
}

/// Radial transition window, in units of the truncation scale: zero up to
/// `inner`, one from `outer` on, cubic smoothstep between.
struct CutoffSpec {
    double inner = 0.25;
    double outer = 0.5;
};

inline void validate(const CutoffSpec& s) {
    if (!(s.inner > 0.0) || !(s.outer > s.inner))
        throw degenerate_input_error("cutoff spec requires 0 < inner < outer");
}

inline double cutoff_chi(double rho, const CutoffSpec& s) {
    if (rho <= s.inner) return 0.0;
    if (rho >= s.outer) return 1.0;
    double t = (rho - s.inner) / (s.outer - s.inner);
    return t * t * (3.0 - 2.0 * t);
}

/// d chi / d rho
inline double cutoff_chi_prime(double rho, const CutoffSpec& s) {
    if (rho <= s.inner || rho >= s.outer) return 0.0;
    double w = s.outer - s.inner;
    double t = (rho - s.inner) / w;
    return 6.0 * t * (1.0 - t) / w;
}

/// chi(|x|/d) Phi(x). Exactly zero (kernel not evaluated) inside the inner
/// shell, so the self singularity never gets touched.
inline Mat3 truncated_oseen(Vec3 x, double d, const CutoffSpec& s) {
    if (!(d > 0.0)) throw degenerate_input_error("truncation scale must be positive");
    double r = norm(x);
    if (r <= s.inner * d) return Mat3::zero();
    double chi = cutoff_chi(r / d, s);
    return chi * oseen(x);
}

/// Gradient of the truncated kernel, derivative index last.
inline Rank3 truncated_oseen_gradient(Vec3 x, double d, const CutoffSpec& s) {
    if (!(d > 0.0)) throw degenerate_input_error("truncation scale must be positive");
    double r = norm(x);
    if (r <= s.inner * d) return Rank3{};
    double rho = r / d;
    double chi = cutoff_chi(rho, s);
    double dchi = cutoff_chi_prime(rho, s);
    Rank3 g = oseen_gradient(x);
    Mat3 phi = oseen(x);
    for (std::size_t k = 0; k < 3; ++k) {
        g[k] = chi * g[k];
        if (dchi != 0.0) g[k] += (dchi * x[k] / (r * d)) * phi;
    }
    return g;
}

}  // namespace pairflow::kernels
