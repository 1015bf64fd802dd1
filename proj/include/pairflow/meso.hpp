#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "pairflow/algebra.hpp"
#include "pairflow/errors.hpp"
#include "pairflow/field_grid.hpp"
#include "pairflow/kernels.hpp"
#include "pairflow/pair_hydro.hpp"
#include "pairflow/parallel.hpp"
#include "pairflow/stepper.hpp"

/// Mean-field solvers: the kinetic system (particles carrying their own
/// orientation, moving in the blob-regularized field of the whole ensemble)
/// and the correlated system (a density ensemble plus one orientation field
/// transported semi-Lagrangian on a grid), together with the Picard solver
/// that constructs the orientation field for a frozen flow.
namespace pairflow::meso {

/// Oseen tensor with the algebraic blob regularization: |x| is replaced by
/// sqrt(|x|^2 + delta^2) in both terms, which caps the self-interaction at
/// I / (8 pi delta) and leaves the far field O(delta^2/|x|^2) accurate.
inline Mat3 blob_oseen(Vec3 x, double delta) {
    if (!(delta > 0.0)) throw degenerate_input_error("blob delta must be positive");
    double s = std::sqrt(norm2(x) + delta * delta);
    double c = 1.0 / (8.0 * kernels::pi);
    Mat3 m = (c / s) * Mat3::identity();
    double c3 = c / (s * s * s);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) m(i, j) += c3 * x[i] * x[j];
    return m;
}

inline Rank3 blob_oseen_gradient(Vec3 x, double delta) {
    if (!(delta > 0.0)) throw degenerate_input_error("blob delta must be positive");
    double s = std::sqrt(norm2(x) + delta * delta);
    double c = 1.0 / (8.0 * kernels::pi);
    double s3 = s * s * s, s5 = s3 * s * s;
    Rank3 g{};
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double v = -((i == j) ? x[k] / s3 : 0.0) - 3.0 * x[i] * x[j] * x[k] / s5;
                if (i == k) v += x[j] / s3;
                if (j == k) v += x[i] / s3;
                g[k](i, j) = c * v;
            }
    return g;
}

struct BlobSpec {
    double delta = 0.05;
};

struct MesoParticle {
    Vec3 x, xi;
    double weight = 0.0;
};

struct Ensemble {
    std::vector<MesoParticle> parts;
    double r0 = 1.0;
    Vec3 kappa_g{0, 0, -1};
};

inline Ensemble make_ensemble(const std::vector<Vec3>& xs, const std::vector<Vec3>& xis,
                              double r0, Vec3 kappa_g) {
    if (xs.empty()) throw degenerate_input_error("make_ensemble: empty ensemble");
    if (!xis.empty() && xis.size() != xs.size())
        throw degenerate_input_error("make_ensemble: orientation count mismatch");
    if (!(r0 > 0.0)) throw degenerate_input_error("make_ensemble: r0 must be positive");
    Ensemble e;
    e.r0 = r0;
    e.kappa_g = kappa_g;
    double w = 1.0 / double(xs.size());
    e.parts.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        e.parts[i] = {xs[i], xis.empty() ? Vec3{} : xis[i], w};
    return e;
}

inline void validate_ensemble(const Ensemble& e) {
    double total = 0.0;
    for (const auto& p : e.parts) {
        if (p.weight < 0.0)
            throw degenerate_input_error("ensemble weight must be non-negative");
        total += p.weight;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw degenerate_input_error("ensemble weights must sum to 1");
}

/// Blob-regularized interaction field of the ensemble,
/// 6 pi r0 sum_k w_k Phi_delta(x - x_k) kappa_g. The self term is mollified,
/// not excluded: at a particle position it contributes O(1/delta).
inline Vec3 continuous_K(const Ensemble& e, Vec3 x, const BlobSpec& blob) {
    Vec3 acc{};
    for (const auto& p : e.parts)
        acc += p.weight * (blob_oseen(x - p.x, blob.delta) * e.kappa_g);
    return (6.0 * kernels::pi * e.r0) * acc;
}

inline Mat3 continuous_K_gradient(const Ensemble& e, Vec3 x, const BlobSpec& blob) {
    Mat3 G = Mat3::zero();
    for (const auto& p : e.parts) {
        Rank3 g = blob_oseen_gradient(x - p.x, blob.delta);
        for (std::size_t der = 0; der < 3; ++der) {
            Vec3 col = g[der] * e.kappa_g;
            for (std::size_t r = 0; r < 3; ++r) G(r, der) += p.weight * col[r];
        }
    }
    return (6.0 * kernels::pi * e.r0) * G;
}

/// Ambient flow as value/gradient samplers. Steppers take this instead of a
/// hard-wired ensemble so tests can inject manufactured fields.
struct Flow {
    std::function<Vec3(Vec3)> velocity;
    std::function<Mat3(Vec3)> gradient;
};

inline Flow induced_flow(Ensemble snapshot, BlobSpec blob) {
    auto v = [snapshot, blob](Vec3 x) { return continuous_K(snapshot, x, blob); };
    auto g = [snapshot = std::move(snapshot), blob](Vec3 x) {
        return continuous_K_gradient(snapshot, x, blob);
    };
    return {v, g};
}

inline Flow linear_flow(Mat3 G, Vec3 u0 = {}) {
    return {[G, u0](Vec3 x) { return u0 + G * x; }, [G](Vec3) { return G; }};
}

inline Flow zero_flow() {
    return {[](Vec3) { return Vec3{}; }, [](Vec3) { return Mat3::zero(); }};
}

namespace detail {

struct KineticRates {
    std::vector<Vec3> vx, vxi;
};

inline KineticRates kinetic_rates(const Ensemble& e, const Flow& f, int threads) {
    KineticRates r;
    r.vx.resize(e.parts.size());
    r.vxi.resize(e.parts.size());
    parallel_for(e.parts.size(), threads, [&](std::size_t i) {
        const auto& p = e.parts[i];
        r.vx[i] = pair_hydro::settling_matrix_inverse(p.xi).apply(e.kappa_g) +
                  f.velocity(p.x);
        r.vxi[i] = f.gradient(p.x) * p.xi;
    });
    return r;
}

inline Ensemble shifted(const Ensemble& base, const KineticRates& r, double h) {
    Ensemble e = base;
    for (std::size_t i = 0; i < e.parts.size(); ++i) {
        e.parts[i].x += h * r.vx[i];
        e.parts[i].xi += h * r.vxi[i];
    }
    return e;
}

inline void require_finite(const Ensemble& e, double time) {
    for (const auto& p : e.parts)
        if (!finite(p.x) || !finite(p.xi))
            throw blow_up_error("meso state became non-finite", time);
}

}  // namespace detail

/// Kinetic step against a caller-supplied (static-in-time) ambient flow:
/// x' = A(xi)^-1 kappa_g + u(x), xi' = grad u(x) xi.
inline void step_meso_kinetic(Ensemble& e, double dt, const Flow& flow, Stepper stepper,
                              double t_now = 0.0, int threads = 1) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw degenerate_input_error("step_meso_kinetic: dt must be positive and finite");
    if (stepper == Stepper::euler) {
        e = detail::shifted(e, detail::kinetic_rates(e, flow, threads), dt);
    } else {
        auto k1 = detail::kinetic_rates(e, flow, threads);
        auto k2 = detail::kinetic_rates(detail::shifted(e, k1, 0.5 * dt), flow, threads);
        auto k3 = detail::kinetic_rates(detail::shifted(e, k2, 0.5 * dt), flow, threads);
        auto k4 = detail::kinetic_rates(detail::shifted(e, k3, dt), flow, threads);
        for (std::size_t i = 0; i < e.parts.size(); ++i) {
            e.parts[i].x += dt / 6.0 * (k1.vx[i] + 2.0 * k2.vx[i] + 2.0 * k3.vx[i] +
                                        k4.vx[i]);
            e.parts[i].xi += dt / 6.0 * (k1.vxi[i] + 2.0 * k2.vxi[i] + 2.0 * k3.vxi[i] +
                                         k4.vxi[i]);
        }
    }
    detail::require_finite(e, t_now + dt);
}

/// Kinetic step in the ensemble's own blob field, rebuilt at every stage.
inline void step_meso_kinetic(Ensemble& e, double dt, const BlobSpec& blob,
                              Stepper stepper, double t_now = 0.0, int threads = 1) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw degenerate_input_error("step_meso_kinetic: dt must be positive and finite");
    auto stage_rates = [&](const Ensemble& s) {
        return detail::kinetic_rates(s, induced_flow(s, blob), threads);
    };
    if (stepper == Stepper::euler) {
        e = detail::shifted(e, stage_rates(e), dt);
    } else {
        auto k1 = stage_rates(e);
        auto k2 = stage_rates(detail::shifted(e, k1, 0.5 * dt));
        auto k3 = stage_rates(detail::shifted(e, k2, 0.5 * dt));
        auto k4 = stage_rates(detail::shifted(e, k3, dt));
        for (std::size_t i = 0; i < e.parts.size(); ++i) {
            e.parts[i].x += dt / 6.0 * (k1.vx[i] + 2.0 * k2.vx[i] + 2.0 * k3.vx[i] +
                                        k4.vx[i]);
            e.parts[i].xi += dt / 6.0 * (k1.vxi[i] + 2.0 * k2.vxi[i] + 2.0 * k3.vxi[i] +
                                         k4.vxi[i]);
        }
    }
    detail::require_finite(e, t_now + dt);
}

/// Diameter of the axis-aligned bounding box: cheap surrogate for the
/// support diameter in growth monitoring.
inline double support_diameter(const Ensemble& e) {
    if (e.parts.empty()) return 0.0;
    Vec3 lo = e.parts[0].x, hi = e.parts[0].x;
    for (const auto& p : e.parts)
        for (std::size_t c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], p.x[c]);
            hi[c] = std::max(hi[c], p.x[c]);
        }
    return norm(hi - lo);
}

enum class SettlingLaw { identity, pair_matrix };

inline Vec3 settling_drift(SettlingLaw law, Vec3 xi, Vec3 kappa_g) {
    if (law == SettlingLaw::identity) return kappa_g;
    return pair_hydro::settling_matrix_inverse(xi).apply(kappa_g);
}

enum class SplittingOrder { first, midpoint };
enum class BoundaryPolicy { strict, clamp };

struct CorrelatedOptions {
    SettlingLaw law = SettlingLaw::pair_matrix;
    SplittingOrder splitting = SplittingOrder::first;
    // strict: a transport foot outside the grid raises domain_exit_error;
    // clamp: constant extrapolation at the inflow boundary. The grid should
    // be padded so the clamped region never reaches the density support.
    BoundaryPolicy boundary = BoundaryPolicy::strict;
    int threads = 1;
};

namespace detail {

inline Vec3 foot_sample(const FField& F, Vec3 x, BoundaryPolicy bp) {
    return bp == BoundaryPolicy::clamp ? F.sample_clamped(x) : F.sample(x);
}

}  // namespace detail

/// One semi-Lagrangian transport step of the orientation field for a frozen
/// flow u: values are pulled back along the characteristic of
/// A(F)^-1 kappa_g + u and stretched by the grad u . F source.
inline FField transport_F(const FField& F, const Flow& u, Vec3 kappa_g, double dt,
                          const CorrelatedOptions& opt) {
    FField out = F;
    parallel_for(F.values.size(), opt.threads, [&](std::size_t flat) {
        int nz = F.dims[2], ny = F.dims[1];
        int k = int(flat) % nz, j = (int(flat) / nz) % ny, i = int(flat) / (nz * ny);
        Vec3 x = F.node_position(i, j, k);
        Vec3 v0 = settling_drift(opt.law, F.values[flat], kappa_g) + u.velocity(x);
        if (opt.splitting == SplittingOrder::first) {
            Vec3 foot = x - dt * v0;
            Vec3 Ff = detail::foot_sample(F, foot, opt.boundary);
            out.values[flat] = Ff + dt * (u.gradient(foot) * Ff);
        } else {
            Vec3 xm = x - 0.5 * dt * v0;
            Vec3 Fm = detail::foot_sample(F, xm, opt.boundary);
            Vec3 vm = settling_drift(opt.law, Fm, kappa_g) + u.velocity(xm);
            Vec3 foot = x - dt * vm;
            Vec3 Ff = detail::foot_sample(F, foot, opt.boundary);
            Vec3 predictor = Ff + dt * (u.gradient(foot) * Ff);
            out.values[flat] =
                Ff + 0.5 * dt * (u.gradient(foot) * Ff + u.gradient(x) * predictor);
        }
    });
    return out;
}

/// Advance the correlated system by one step: the field first (semi-
/// Lagrangian), then the density particles through the flow implied by the
/// old and new fields. Particles sampling F outside its grid raise
/// domain_exit_error regardless of the boundary policy.
inline void step_meso_correlated(Ensemble& rho, FField& F, double dt, const Flow& u,
                                 const CorrelatedOptions& opt, double t_now = 0.0) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw degenerate_input_error("step_meso_correlated: dt must be positive");
    FField Fnew = transport_F(F, u, rho.kappa_g, dt, opt);
    parallel_for(rho.parts.size(), opt.threads, [&](std::size_t i) {
        Vec3 x = rho.parts[i].x;
        Vec3 v0 = settling_drift(opt.law, F.sample(x), rho.kappa_g) + u.velocity(x);
        if (opt.splitting == SplittingOrder::first) {
            rho.parts[i].x = x + dt * v0;
        } else {
            Vec3 x1 = x + dt * v0;
            Vec3 v1 = settling_drift(opt.law, Fnew.sample(x1), rho.kappa_g) +
                      u.velocity(x1);
            rho.parts[i].x = x + 0.5 * dt * (v0 + v1);
        }
        rho.parts[i].xi = Fnew.sample(rho.parts[i].x);
    });
    F = std::move(Fnew);
    detail::require_finite(rho, t_now + dt);
}

/// Correlated step in the density's own blob field, frozen over the step.
inline void step_meso_correlated(Ensemble& rho, FField& F, double dt,
                                 const BlobSpec& blob, const CorrelatedOptions& opt,
                                 double t_now = 0.0) {
    step_meso_correlated(rho, F, dt, induced_flow(rho, blob), opt, t_now);
}

struct PicardOptions {
    double dt = 0.01;
    double tol = 1e-10;
    std::size_t max_iter = 50;
    SettlingLaw law = SettlingLaw::pair_matrix;
    SplittingOrder splitting = SplittingOrder::first;
    BoundaryPolicy boundary = BoundaryPolicy::clamp;
    int threads = 1;
};

struct PicardResult {
    std::vector<FField> levels;      // converged history at t = 0, dt, ..., T
    std::vector<double> increments;  // sup-norm change per Picard iterate
    std::size_t iterations = 0;
    bool converged = false;
};

/// Fixed-point construction of the orientation field for a frozen flow u:
/// each iterate solves one *linear* transport problem whose coefficient
/// A(F_prev)^-1 kappa_g + u and source grad u . F_prev come from the stored
/// time history of the previous iterate. Geometric decay of the increments
/// is the local-existence horizon check; stalling above tol throws.
inline PicardResult picard_solve_F(const Flow& u, const FField& F0, Vec3 kappa_g,
                                   double T, const PicardOptions& opt,
                                   const std::vector<FField>* warm_start = nullptr) {
    if (!(T > 0.0) || !(opt.dt > 0.0))
        throw degenerate_input_error("picard_solve_F: T and dt must be positive");
    std::size_t steps = std::size_t(std::llround(T / opt.dt));
    if (steps == 0) steps = 1;
    double dt = T / double(steps);

    std::vector<FField> prev;
    if (warm_start) {
        if (warm_start->size() != steps + 1)
            throw degenerate_input_error("picard_solve_F: warm start level count");
        prev = *warm_start;
    } else {
        prev.assign(steps + 1, F0);
    }

    PicardResult res;
    for (std::size_t iter = 0; iter < opt.max_iter; ++iter) {
        std::vector<FField> cur(steps + 1, F0);
        for (std::size_t n = 0; n < steps; ++n) {
            const FField& coefF = prev[n];
            const FField& srcF1 = prev[n + 1];
            FField& next = cur[n + 1];
            next = cur[n];
            parallel_for(next.values.size(), opt.threads, [&](std::size_t flat) {
                int nz = F0.dims[2], ny = F0.dims[1];
                int k = int(flat) % nz, j = (int(flat) / nz) % ny,
                    i = int(flat) / (nz * ny);
                Vec3 x = F0.node_position(i, j, k);
                Vec3 v0 = settling_drift(opt.law, coefF.values[flat], kappa_g) +
                          u.velocity(x);
                Vec3 foot;
                if (opt.splitting == SplittingOrder::first) {
                    foot = x - dt * v0;
                    Vec3 transported = detail::foot_sample(cur[n], foot, opt.boundary);
                    Vec3 src = detail::foot_sample(coefF, foot, opt.boundary);
                    next.values[flat] = transported + dt * (u.gradient(foot) * src);
                } else {
                    Vec3 xm = x - 0.5 * dt * v0;
                    Vec3 Fm = detail::foot_sample(coefF, xm, opt.boundary);
                    Vec3 vm = settling_drift(opt.law, Fm, kappa_g) + u.velocity(xm);
                    foot = x - dt * vm;
                    Vec3 transported = detail::foot_sample(cur[n], foot, opt.boundary);
                    Vec3 src0 = detail::foot_sample(coefF, foot, opt.boundary);
                    next.values[flat] =
                        transported + 0.5 * dt * (u.gradient(foot) * src0 +
                                                  u.gradient(x) * srcF1.values[flat]);
                }
            });
        }
        double inc = 0.0;
        for (std::size_t n = 0; n <= steps; ++n)
            inc = std::max(inc, cur[n].sup_difference(prev[n]));
        res.increments.push_back(inc);
        ++res.iterations;
        prev = std::move(cur);
        if (inc < opt.tol) {
            res.converged = true;
            break;
        }
        if (res.increments.size() >= 2 &&
            res.increments.back() >= res.increments[res.increments.size() - 2] &&
            res.increments.back() > opt.tol)
            throw non_convergence_error(
                "picard iteration does not contract (T too large?)", res.increments);
    }
    if (!res.converged)
        throw non_convergence_error("picard iteration limit reached", res.increments);
    res.levels = std::move(prev);
    return res;
}

}  // namespace pairflow::meso
