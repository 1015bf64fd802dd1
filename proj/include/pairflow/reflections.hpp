#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "pairflow/cloud.hpp"
#include "pairflow/errors.hpp"
#include "pairflow/pair_hydro.hpp"
#include "pairflow/parallel.hpp"

/// Self-consistent sedimentation velocities of a pair cloud by the method of
/// reflections: every pair settles in the superposed far fields of all the
/// others, and those fields are driven in turn by the total pair velocities.
/// The solver accumulates the Neumann series of
///     U_a^i = A(xi_i)^-1 kappa_g + sum_{j != i} field_j(U^j)(x_a^i)
/// starting from the isolated-pair settling velocities. Increments shrink
/// geometrically once the cloud is dilute enough; a contraction ratio >= 1
/// aborts with the ratio history attached.
namespace pairflow::reflections {

using pair_hydro::FieldRefinement;
using pair_hydro::PairForces;
using pair_hydro::PairVelocities;

struct Solution {
    std::vector<Vec3> U1, U2;    // converged sphere velocities per pair
    std::vector<Vec3> F1, F2;    // drag forces recovered at convergence (~ -mg)
    std::vector<double> ratios;  // increment-norm ratio per reflection sweep
    std::size_t iterations = 0;
    bool converged = false;
    double force_residual = 0.0;  // max_i (|F1+mg| + |F2+mg|)
};

/// Isolated settling velocity of each pair, the series seed: both spheres of
/// pair i move with settling_matrix_inverse(xi_i) kappa_g, which is exactly
/// the rigid motion whose drag is -mg on each sphere.
inline std::vector<PairVelocities> isolated_velocities(const Cloud& c) {
    std::vector<PairVelocities> v(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        Vec3 u = pair_hydro::settling_matrix_inverse(c.pairs[i].xi).apply(c.kappa_g);
        v[i] = {u, u};
    }
    return v;
}

/// Superposed far field of all pairs except `exclude`, with per-pair drag
/// forces supplied by the caller; pass exclude = size() for the full field.
inline Vec3 ambient_field(const Cloud& c, const std::vector<Vec3>& F1,
                          const std::vector<Vec3>& F2, Vec3 x, std::size_t exclude,
                          FieldRefinement refinement) {
    if (F1.size() != c.size() || F2.size() != c.size())
        throw degenerate_input_error("ambient_field: force arrays do not match cloud");
    Vec3 u{};
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (j == exclude) continue;
        u += pair_hydro::pair_field(x, c.pairs[j], F1[j], F2[j], refinement, c.m1, j);
    }
    return u;
}

/// One reflection sweep: each pair samples the fields generated by the
/// current velocity increments of all other pairs at its two sphere centers.
inline std::vector<PairVelocities> reflect_step(const Cloud& c,
                                                const std::vector<PairVelocities>& v,
                                                FieldRefinement refinement,
                                                int threads = 1) {
    if (v.size() != c.size())
        throw degenerate_input_error("reflect_step: increment array does not match cloud");
    std::vector<PairForces> f(c.size());
    for (std::size_t j = 0; j < c.size(); ++j)
        f[j] = pair_hydro::pair_forces(c.pairs[j].xi, v[j].U1, v[j].U2, c.radius);
    std::vector<PairVelocities> out(c.size());
    parallel_for(c.size(), threads, [&](std::size_t i) {
        Vec3 s1{}, s2{};
        Vec3 x1 = pair_hydro::sphere_1(c.pairs[i]);
        Vec3 x2 = pair_hydro::sphere_2(c.pairs[i]);
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (j == i) continue;
            s1 += pair_hydro::pair_field(x1, c.pairs[j], f[j].F1, f[j].F2, refinement,
                                         c.m1, j);
            s2 += pair_hydro::pair_field(x2, c.pairs[j], f[j].F1, f[j].F2, refinement,
                                         c.m1, j);
        }
        out[i] = {s1, s2};
    });
    return out;
}

struct SolveOptions {
    double tol = 1e-10;
    std::size_t max_iter = 200;
    FieldRefinement refinement = FieldRefinement::leading;
    int threads = 1;
};

inline double increment_norm(const std::vector<PairVelocities>& v) {
    double m = 0.0;
    for (const auto& p : v) m = std::max({m, norm(p.U1), norm(p.U2)});
    return m;
}

inline Solution solve_reflections(const Cloud& c, const SolveOptions& opt = {}) {
    validate_cloud(c);
    std::size_t n = c.size();
    Vec3 mg = 6.0 * pair_hydro::pi * c.radius * c.kappa_g;
    double scale = opt.tol * norm(c.kappa_g);

    std::vector<PairVelocities> inc = isolated_velocities(c);
    std::vector<PairVelocities> total = inc;
    Solution sol;
    double prev = increment_norm(inc);

    if (n > 1) {
        bool done = false;
        for (std::size_t p = 0; p < opt.max_iter && !done; ++p) {
            inc = reflect_step(c, inc, opt.refinement, opt.threads);
            double cur = increment_norm(inc);
            sol.ratios.push_back(prev > 0.0 ? cur / prev : 0.0);
            ++sol.iterations;
            if (sol.ratios.back() >= 1.0)
                throw non_convergence_error(
                    "reflections do not contract (cloud too dense)", sol.ratios);
            for (std::size_t i = 0; i < n; ++i) {
                total[i].U1 += inc[i].U1;
                total[i].U2 += inc[i].U2;
            }
            if (cur < scale) done = true;
            prev = cur;
        }
        if (!done)
            throw non_convergence_error("reflections: iteration limit reached",
                                        sol.ratios);
    }
    sol.converged = true;

    sol.U1.resize(n);
    sol.U2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.U1[i] = total[i].U1;
        sol.U2[i] = total[i].U2;
    }
    // Recover drag forces: each pair moves relative to the ambient flow of the
    // others, and the resistance law applied to that relative motion must give
    // -mg per sphere. The emitted-field amplitudes are the totals themselves.
    std::vector<Vec3> eF1(n), eF2(n);
    for (std::size_t j = 0; j < n; ++j) {
        PairForces f = pair_hydro::pair_forces(c.pairs[j].xi, sol.U1[j], sol.U2[j],
                                               c.radius);
        eF1[j] = f.F1;
        eF2[j] = f.F2;
    }
    sol.F1.resize(n);
    sol.F2.resize(n);
    std::vector<double> residual(n);
    parallel_for(n, opt.threads, [&](std::size_t i) {
        Vec3 amb1 = ambient_field(c, eF1, eF2, pair_hydro::sphere_1(c.pairs[i]), i,
                                  opt.refinement);
        Vec3 amb2 = ambient_field(c, eF1, eF2, pair_hydro::sphere_2(c.pairs[i]), i,
                                  opt.refinement);
        PairForces f = pair_hydro::pair_forces(c.pairs[i].xi, sol.U1[i] - amb1,
                                               sol.U2[i] - amb2, c.radius);
        sol.F1[i] = f.F1;
        sol.F2[i] = f.F2;
        residual[i] = norm(f.F1 + mg) + norm(f.F2 + mg);
    });
    for (double r : residual) sol.force_residual = std::max(sol.force_residual, r);
    return sol;
}

/// Worst observed per-sweep contraction ratio. Needs at least two recorded
/// sweeps to talk about geometric behavior.
inline double contraction_ratio(const Solution& sol) {
    if (sol.ratios.size() < 2)
        throw insufficient_history_error(
            "contraction_ratio needs at least two recorded sweeps");
    double m = 0.0;
    for (double r : sol.ratios) m = std::max(m, r);
    return m;
}

}  // namespace pairflow::reflections
