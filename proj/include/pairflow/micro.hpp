#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pairflow/cloud.hpp"
#include "pairflow/errors.hpp"
#include "pairflow/kernels.hpp"
#include "pairflow/metrics.hpp"
#include "pairflow/pair_hydro.hpp"
#include "pairflow/parallel.hpp"
#include "pairflow/reflections.hpp"
#include "pairflow/stepper.hpp"

/// First-order dynamics of a pair cloud: centers ride their own settling
/// velocity plus the superposed truncated Stokeslets of all other pairs, and
/// orientations are stretched by the gradient of that interaction field.
/// This is the cheap O(N^2-per-evaluation) model the reflections solver is
/// benchmarked against.
namespace pairflow::micro {

using kernels::CutoffSpec;

/// Smallest distance between distinct centers, the instantaneous truncation
/// scale. A lone pair has no neighbors; r0 stands in so the cutoff stays
/// well-defined.
inline double min_center_distance(const Cloud& c) {
    if (c.size() < 2) return c.r0;
    return metrics::min_distance(c.centers());
}

/// Cloud frozen as a set of Stokeslet sources of common strength
/// (6 pi r0 / N) kappa_g, truncated at the instantaneous minimal separation.
/// The cutoff both removes the self-interaction (a source contributes nothing
/// at its own center) and keeps every cross term untouched, since distinct
/// centers are at least d_min apart.
struct KernelSnapshot {
    std::vector<Vec3> centers;
    Vec3 amplitude;
    double d_min = 0.0;
    CutoffSpec cutoff;
};

inline KernelSnapshot freeze_kernel(const Cloud& c, const CutoffSpec& cutoff = {}) {
    kernels::validate(cutoff);
    KernelSnapshot k;
    k.centers = c.centers();
    k.amplitude = (6.0 * pair_hydro::pi * c.r0 / double(c.size())) * c.kappa_g;
    k.d_min = min_center_distance(c);
    k.cutoff = cutoff;
    return k;
}

inline Vec3 discrete_K(const KernelSnapshot& k, Vec3 x) {
    Vec3 u{};
    for (const Vec3& s : k.centers)
        u += kernels::truncated_oseen(x - s, k.d_min, k.cutoff) * k.amplitude;
    return u;
}

/// G(i, k) = d_k K_i at x, so that the orientation stretch is G xi.
inline Mat3 discrete_K_gradient(const KernelSnapshot& k, Vec3 x) {
    Mat3 G = Mat3::zero();
    for (const Vec3& s : k.centers) {
        Rank3 g = kernels::truncated_oseen_gradient(x - s, k.d_min, k.cutoff);
        for (std::size_t der = 0; der < 3; ++der) {
            Vec3 col = g[der] * k.amplitude;
            for (std::size_t i = 0; i < 3; ++i) G(i, der) += col[i];
        }
    }
    return G;
}

struct PairRates {
    Vec3 v_center, v_xi;
};

inline std::vector<PairRates> micro_rates(const Cloud& c,
                                          const CutoffSpec& cutoff = {},
                                          int threads = 1) {
    KernelSnapshot k = freeze_kernel(c, cutoff);
    std::vector<PairRates> out(c.size());
    parallel_for(c.size(), threads, [&](std::size_t i) {
        Vec3 drift = pair_hydro::settling_matrix_inverse(c.pairs[i].xi).apply(c.kappa_g);
        Vec3 x = c.pairs[i].x_plus;
        out[i].v_center = drift + discrete_K(k, x);
        out[i].v_xi = discrete_K_gradient(k, x) * c.pairs[i].xi;
    });
    return out;
}

using pairflow::Stepper;

namespace detail {

inline Cloud shifted(const Cloud& base, const std::vector<PairRates>& r, double h) {
    Cloud c = base;
    for (std::size_t i = 0; i < c.size(); ++i) {
        c.pairs[i].x_plus += h * r[i].v_center;
        c.pairs[i].xi += h * r[i].v_xi;
    }
    return c;
}

inline void require_finite(const Cloud& c, double time) {
    for (const auto& p : c.pairs)
        if (!finite(p.x_plus) || !finite(p.xi))
            throw blow_up_error("micro state became non-finite", time);
}

}  // namespace detail

/// Advance the cloud in place by one step of dt. The truncation scale is
/// re-frozen at every stage evaluation, so even the inner RK4 states see
/// their own instantaneous d_min.
inline void step_micro(Cloud& c, double dt, Stepper stepper,
                       const CutoffSpec& cutoff = {}, int threads = 1) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw degenerate_input_error("step_micro: dt must be positive and finite");
    if (stepper == Stepper::euler) {
        auto k1 = micro_rates(c, cutoff, threads);
        c = detail::shifted(c, k1, dt);
        return;
    }
    auto k1 = micro_rates(c, cutoff, threads);
    auto k2 = micro_rates(detail::shifted(c, k1, 0.5 * dt), cutoff, threads);
    auto k3 = micro_rates(detail::shifted(c, k2, 0.5 * dt), cutoff, threads);
    auto k4 = micro_rates(detail::shifted(c, k3, dt), cutoff, threads);
    for (std::size_t i = 0; i < c.size(); ++i) {
        Vec3 vc = (1.0 / 6.0) * (k1[i].v_center + 2.0 * k2[i].v_center +
                                 2.0 * k3[i].v_center + k4[i].v_center);
        Vec3 vx = (1.0 / 6.0) * (k1[i].v_xi + 2.0 * k2[i].v_xi +
                                 2.0 * k3[i].v_xi + k4[i].v_xi);
        c.pairs[i].x_plus += dt * vc;
        c.pairs[i].xi += dt * vx;
    }
}

struct MicroOptions {
    double dt = 1e-3;
    std::size_t steps = 100;
    std::size_t snapshot_every = 10;  // 0: only initial and final states
    Stepper stepper = Stepper::rk4;
    CutoffSpec cutoff;
    int threads = 1;
};

struct Snapshot {
    double time = 0.0;
    std::vector<Vec3> x_plus, xi;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    std::vector<std::string> warnings;
    double final_time = 0.0;
};

inline Snapshot snapshot_of(const Cloud& c, double time) {
    Snapshot s;
    s.time = time;
    s.x_plus.reserve(c.size());
    s.xi.reserve(c.size());
    for (const auto& p : c.pairs) {
        s.x_plus.push_back(p.x_plus);
        s.xi.push_back(p.xi);
    }
    return s;
}

/// Integrate the cloud for steps * dt. Orientations wandering outside the
/// [m2, m1] elongation band are reported as warnings, not fatal: the model
/// stays meaningful slightly past the band. A pair collapsing to |xi| <= 1
/// still throws from the mobility evaluation, and non-finite states abort
/// with the blow-up time attached.
inline Trajectory run_micro(Cloud c, const MicroOptions& opt) {
    constexpr std::size_t max_warnings = 16;
    Trajectory out;
    out.warnings = validate_cloud(c);
    out.snapshots.push_back(snapshot_of(c, 0.0));
    for (std::size_t step = 0; step < opt.steps; ++step) {
        step_micro(c, opt.dt, opt.stepper, opt.cutoff, opt.threads);
        double t = double(step + 1) * opt.dt;
        detail::require_finite(c, t);
        std::size_t outside = 0;
        for (const auto& p : c.pairs) {
            double s = norm(p.xi);
            if (s < c.m2 || s > c.m1) ++outside;
        }
        if (outside > 0 && out.warnings.size() < max_warnings)
            out.warnings.push_back("step " + std::to_string(step + 1) + ": " +
                                   std::to_string(outside) +
                                   " orientations outside [m2, m1]");
        bool last = step + 1 == opt.steps;
        if (last || (opt.snapshot_every > 0 && (step + 1) % opt.snapshot_every == 0))
            out.snapshots.push_back(snapshot_of(c, t));
        out.final_time = t;
    }
    return out;
}

/// Gap between the first-order velocities and the converged reflections
/// solution on the same cloud: centers against the mean sphere velocity,
/// orientation rates against the half-difference (which is R d(xi)/dt).
struct DeviationReport {
    double center = 0.0;
    double orientation = 0.0;
};

inline DeviationReport deviation_from_reflections(const Cloud& c,
                                                  const reflections::Solution& sol,
                                                  const CutoffSpec& cutoff = {}) {
    if (sol.U1.size() != c.size())
        throw degenerate_input_error("deviation_from_reflections: solution size mismatch");
    auto rates = micro_rates(c, cutoff);
    DeviationReport rep;
    for (std::size_t i = 0; i < c.size(); ++i) {
        Vec3 u_plus = 0.5 * (sol.U1[i] + sol.U2[i]);
        Vec3 u_minus = 0.5 * (sol.U1[i] - sol.U2[i]);
        rep.center = std::max(rep.center, norm(rates[i].v_center - u_plus));
        rep.orientation = std::max(
            rep.orientation, norm(c.radius * rates[i].v_xi - u_minus));
    }
    return rep;
}

/// Largest observed |drift(xi_i) - drift(xi_j)| / |xi_i - xi_j| over distinct
/// orientations, where drift is the isolated settling velocity. Bounded for
/// orientation fields that stay inside the elongation band; a blow-up of this
/// quotient flags a degenerating cloud before the integrator does.
inline double drift_lipschitz_quotient(const Cloud& c) {
    std::vector<Vec3> drift(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        drift[i] = pair_hydro::settling_matrix_inverse(c.pairs[i].xi).apply(c.kappa_g);
    double q = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (std::size_t j = i + 1; j < c.size(); ++j) {
            double dx = norm(c.pairs[i].xi - c.pairs[j].xi);
            if (dx > 0.0) q = std::max(q, norm(drift[i] - drift[j]) / dx);
        }
    return q;
}

}  // namespace pairflow::micro
