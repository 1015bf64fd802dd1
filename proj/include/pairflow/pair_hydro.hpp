#pragma once

#include <cmath>
#include <cstddef>

#include "pairflow/algebra.hpp"
#include "pairflow/errors.hpp"
#include "pairflow/kernels.hpp"

/// Hydrodynamics of one rigid pair of identical spheres in Stokes flow:
/// mobility/resistance couple matrices in the far-field closure, the settling
/// matrix of the pair, and the velocity field the pair induces elsewhere.
///
/// Geometry convention: a pair is (x_plus, xi, R) with sphere centers
/// x_1 = x_plus + R xi and x_2 = x_plus - R xi, so the center separation is
/// 2R|xi| and |xi| > 1 keeps the spheres disjoint.
namespace pairflow::pair_hydro {

using kernels::pi;

/// Axisymmetric matrix g I + h (axis ⊗ axis), axis unit. Every couple matrix
/// in play has this form, so products and inverses stay scalar work:
///   (g1,h1)(g2,h2) = (g1 g2, g1 h2 + h1 g2 + h1 h2)
///   (g,h)^-1       = (1/g, -h/(g(g+h)))
struct AxiMat {
    double g = 0.0;
    double h = 0.0;
    Vec3 axis{0.0, 0.0, 1.0};

    Vec3 apply(Vec3 v) const { return g * v + (h * dot(axis, v)) * axis; }
    Mat3 to_mat3() const { return g * Mat3::identity() + h * outer(axis, axis); }
};

inline AxiMat axi_inverse(const AxiMat& a) {
    double gh = a.g + a.h;
    if (a.g == 0.0 || gh == 0.0)
        throw degenerate_input_error("singular axisymmetric matrix");
    return {1.0 / a.g, -a.h / (a.g * gh), a.axis};
}

struct PairGeometry {
    Vec3 x_plus;
    Vec3 xi;
    double radius = 0.0;
};

inline Vec3 sphere_1(const PairGeometry& p) { return p.x_plus + p.radius * p.xi; }
inline Vec3 sphere_2(const PairGeometry& p) { return p.x_plus - p.radius * p.xi; }

struct MobilityCouple {
    AxiMat a1, a2;
};
struct ResistanceCouple {
    AxiMat A1, A2;
};

inline void require_separated(Vec3 xi) {
    if (!finite(xi)) throw degenerate_input_error("xi is not finite");
    if (!(norm(xi) > 1.0))
        throw overlap_error("pair spheres overlap: |xi| <= 1");
}

/// Far-field mobility couple: a1 = I and a2 = 6 pi R Phi(2 R xi), which
/// collapses to a2 = (3/(8|xi|)) (I + xihat ⊗ xihat) independent of R.
inline MobilityCouple mobility_pair(Vec3 xi) {
    require_separated(xi);
    double s = norm(xi);
    Vec3 axis = xi / s;
    double c = 3.0 / (8.0 * s);
    return {AxiMat{1.0, 0.0, axis}, AxiMat{c, c, axis}};
}

/// Resistance couple solving A1 a1 + A2 a2 = I, A1 a2 + A2 a1 = 0:
/// A1 = ((a1+a2)^-1 + (a1-a2)^-1)/2, A2 = ((a1+a2)^-1 - (a1-a2)^-1)/2.
/// For |xi| > 1 both sums are positive definite, so this never pivots.
inline ResistanceCouple resistance_pair(Vec3 xi) {
    MobilityCouple m = mobility_pair(xi);
    AxiMat sum{m.a1.g + m.a2.g, m.a1.h + m.a2.h, m.a1.axis};
    AxiMat dif{m.a1.g - m.a2.g, m.a1.h - m.a2.h, m.a1.axis};
    AxiMat is = axi_inverse(sum);
    AxiMat id = axi_inverse(dif);
    AxiMat A1{0.5 * (is.g + id.g), 0.5 * (is.h + id.h), is.axis};
    AxiMat A2{0.5 * (is.g - id.g), 0.5 * (is.h - id.h), is.axis};
    return {A1, A2};
}

/// Settling matrix of the pair: the rigid-settling velocity under equal unit
/// drag on both spheres is settling_matrix_inverse(xi) applied to kappa_g.
inline AxiMat settling_matrix(Vec3 xi) {
    MobilityCouple m = mobility_pair(xi);
    return axi_inverse(AxiMat{m.a1.g + m.a2.g, m.a1.h + m.a2.h, m.a1.axis});
}

/// Inverse settling matrix a1 + a2; no inversion involved.
inline AxiMat settling_matrix_inverse(Vec3 xi) {
    MobilityCouple m = mobility_pair(xi);
    return {m.a1.g + m.a2.g, m.a1.h + m.a2.h, m.a1.axis};
}

struct PairForces {
    Vec3 F1, F2;
};
struct PairVelocities {
    Vec3 U1, U2;
};

/// Drag forces for prescribed rigid velocities:
/// (F1; F2) = -6 pi R [A1 A2; A2 A1] (U1; U2).
inline PairForces pair_forces(Vec3 xi, Vec3 U1, Vec3 U2, double R) {
    ResistanceCouple r = resistance_pair(xi);
    double c = -6.0 * pi * R;
    return {c * (r.A1.apply(U1) + r.A2.apply(U2)),
            c * (r.A2.apply(U1) + r.A1.apply(U2))};
}

/// Velocities for prescribed drag forces:
/// (U1; U2) = -(6 pi R)^-1 [a1 a2; a2 a1] (F1; F2).
inline PairVelocities pair_velocities(Vec3 xi, Vec3 F1, Vec3 F2, double R) {
    MobilityCouple m = mobility_pair(xi);
    double c = -1.0 / (6.0 * pi * R);
    return {c * (m.a1.apply(F1) + m.a2.apply(F2)),
            c * (m.a2.apply(F1) + m.a1.apply(F2))};
}

enum class FieldRefinement {
    leading,        // one Stokeslet at x_plus carrying F1 + F2
    two_stokeslet,  // one Stokeslet per sphere center
};

/// Velocity field induced by a pair exerting drag forces (F1, F2) on its
/// spheres, valid outside |x - x_plus| > 4 m1 R where m1 >= |xi| bounds the
/// pair elongation. Queries inside that ball are refused: the far-field
/// representation silently degrades there.
inline Vec3 pair_field(Vec3 x, const PairGeometry& p, Vec3 F1, Vec3 F2,
                       FieldRefinement refinement, double m1,
                       std::size_t pair_index = 0) {
    Vec3 rel = x - p.x_plus;
    if (!(norm(rel) > 4.0 * m1 * p.radius))
        throw near_field_error("pair_field evaluated inside its validity radius",
                               pair_index);
    if (refinement == FieldRefinement::leading)
        return -1.0 * (kernels::oseen(rel) * (F1 + F2));
    return -1.0 * (kernels::oseen(x - sphere_1(p)) * F1)
         - (kernels::oseen(x - sphere_2(p)) * F2);
}

}  // namespace pairflow::pair_hydro
