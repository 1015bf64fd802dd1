#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pairflow/algebra.hpp"
#include "pairflow/errors.hpp"
#include "pairflow/kernels.hpp"
#include "pairflow/metrics.hpp"

/// Initial-condition generators and reference-density machinery: analytic
/// densities with known sup norms and support boxes, deterministic samplers,
/// lattice placements for convergence studies, and midpoint quadratures of
/// the induced Stokes field for use as continuum references.
namespace pairflow::sampling {

enum class DensityKind { uniform_ball, gaussian_truncated, bump };

/// Compactly supported reference density. The bump is C^1 at its support
/// boundary, which keeps quadrature and displacement errors second order;
/// the ball and truncated gaussian are the rougher classical options.
struct DensitySpec {
    DensityKind kind = DensityKind::uniform_ball;
    double radius = 1.0;  // support radius about the center
    double sigma = 0.5;   // gaussian width (gaussian_truncated only)
    Vec3 center{};

    double rho(Vec3 x) const {
        double r2 = norm2(x - center), R2 = radius * radius;
        if (r2 > R2) return 0.0;
        switch (kind) {
            case DensityKind::uniform_ball:
                return 3.0 / (4.0 * kernels::pi * R2 * radius);
            case DensityKind::bump: {
                double t = 1.0 - r2 / R2;
                return 105.0 / (32.0 * kernels::pi * R2 * radius) * t * t;
            }
            case DensityKind::gaussian_truncated:
                return std::exp(-0.5 * r2 / (sigma * sigma)) / gaussian_mass();
        }
        return 0.0;
    }

    double sup() const {
        switch (kind) {
            case DensityKind::uniform_ball:
                return 3.0 / (4.0 * kernels::pi * radius * radius * radius);
            case DensityKind::bump:
                return 105.0 / (32.0 * kernels::pi * radius * radius * radius);
            case DensityKind::gaussian_truncated:
                return 1.0 / gaussian_mass();
        }
        return 0.0;
    }

    Vec3 box_lo() const { return center - Vec3{radius, radius, radius}; }
    Vec3 box_hi() const { return center + Vec3{radius, radius, radius}; }

    void validate() const {
        if (!(radius > 0.0)) throw degenerate_input_error("density radius must be positive");
        if (kind == DensityKind::gaussian_truncated && !(sigma > 0.0))
            throw degenerate_input_error("gaussian sigma must be positive");
    }

  private:
    // integral of exp(-|x|^2 / 2 sigma^2) over the truncation ball
    double gaussian_mass() const {
        double a = radius / sigma;
        double s3 = sigma * sigma * sigma;
        return 4.0 * kernels::pi * s3 *
               (std::sqrt(kernels::pi / 2.0) * std::erf(a / std::sqrt(2.0)) -
                a * std::exp(-0.5 * a * a));
    }
};

inline DensitySpec parse_density(const std::string& text) {
    auto colon = text.find(':');
    std::string kind = text.substr(0, colon);
    DensitySpec d;
    if (kind == "uniform_ball") d.kind = DensityKind::uniform_ball;
    else if (kind == "bump") d.kind = DensityKind::bump;
    else if (kind == "gaussian") d.kind = DensityKind::gaussian_truncated;
    else throw config_error("unknown density kind '" + kind + "'");
    if (colon != std::string::npos) {
        std::string args = text.substr(colon + 1);
        auto comma = args.find(',');
        try {
            d.radius = std::stod(args.substr(0, comma));
            if (comma != std::string::npos) d.sigma = std::stod(args.substr(comma + 1));
        } catch (const std::exception&) {
            throw config_error("bad density parameters '" + args + "'");
        }
    }
    d.validate();
    return d;
}

inline double uniform(std::mt19937_64& g, double lo = 0.0, double hi = 1.0) {
    // top 53 bits; identical streams on every platform
    double u = double(g() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

inline Vec3 uniform_direction(std::mt19937_64& g) {
    while (true) {
        Vec3 v{uniform(g, -1, 1), uniform(g, -1, 1), uniform(g, -1, 1)};
        double n2 = norm2(v);
        if (n2 > 1e-4 && n2 <= 1.0) return v / std::sqrt(n2);
    }
}

/// Rejection-sample n positions from the density, optionally enforcing a
/// minimal separation by dart throwing. Deterministic per seed.
inline std::vector<Vec3> sample_positions(const DensitySpec& d, std::size_t n,
                                          std::uint64_t seed, double min_sep = 0.0) {
    d.validate();
    if (n == 0) throw degenerate_input_error("sample_positions: n must be >= 1");
    std::mt19937_64 g(seed);
    Vec3 lo = d.box_lo(), hi = d.box_hi();
    double sup = d.sup();
    std::vector<Vec3> out;
    out.reserve(n);
    std::size_t attempts = 0, cap = 2000 * n + 100000;
    while (out.size() < n) {
        if (++attempts > cap)
            throw degenerate_input_error(
                "sample_positions: separation constraint looks unsatisfiable");
        Vec3 p{uniform(g, lo.x, hi.x), uniform(g, lo.y, hi.y), uniform(g, lo.z, hi.z)};
        if (uniform(g) * sup > d.rho(p)) continue;
        if (min_sep > 0.0) {
            bool ok = true;
            for (const Vec3& q : out)
                if (norm(p - q) < min_sep) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
        }
        out.push_back(p);
    }
    return out;
}

/// Orientations with uniformly random direction and elongation uniform in
/// [lo, hi]; the band should sit inside (m2, m1).
inline std::vector<Vec3> sample_orientations(std::size_t n, std::uint64_t seed,
                                             double lo, double hi) {
    if (!(hi >= lo) || !(lo > 1.0))
        throw degenerate_input_error("sample_orientations: need 1 < lo <= hi");
    std::mt19937_64 g(seed);
    std::vector<Vec3> out(n);
    for (auto& v : out) v = uniform(g, lo, hi) * uniform_direction(g);
    return out;
}

/// Deterministic low-discrepancy placement: cell counts proportional to the
/// density on a cube grid, points on a sub-lattice inside each cell, then a
/// smooth displacement of amplitude beta * cell. Clouds built this way sit at
/// bottleneck distance O(cell) from the density, which makes them the right
/// family for convergence-rate studies (independent samples fluctuate at the
/// larger sqrt(N) scale instead).
inline std::vector<Vec3> displaced_lattice(const DensitySpec& d, std::size_t n,
                                           double beta = 0.3) {
    d.validate();
    if (n == 0) throw degenerate_input_error("displaced_lattice: n must be >= 1");
    int m = int(std::llround(std::cbrt(double(n))));
    while (std::size_t(m) * m * m < n) ++m;
    Vec3 lo = d.box_lo(), ext = d.box_hi() - d.box_lo();
    double hx = ext.x / m, hy = ext.y / m, hz = ext.z / m;
    std::vector<Vec3> centers;
    std::vector<double> mass;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) {
                Vec3 c{lo.x + (i + 0.5) * hx, lo.y + (j + 0.5) * hy,
                       lo.z + (k + 0.5) * hz};
                double w = d.rho(c);
                if (w > 0.0) {
                    centers.push_back(c);
                    mass.push_back(w);
                }
            }
    std::vector<std::size_t> count = metrics::apportion_counts(mass, n);
    double L = std::max({ext.x, ext.y, ext.z});
    auto wiggle = [&](Vec3 x) {
        Vec3 r = x - d.center;
        return Vec3{std::sin(2.0 * kernels::pi * r.y / L),
                    std::sin(2.0 * kernels::pi * r.z / L),
                    std::sin(2.0 * kernels::pi * r.x / L)};
    };
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t c = 0; c < centers.size(); ++c) {
        std::size_t k = count[c];
        if (k == 0) continue;
        int s = 1;
        while (std::size_t(s) * s * s < k) ++s;
        std::size_t placed = 0;
        for (int a = 0; a < s && placed < k; ++a)
            for (int b = 0; b < s && placed < k; ++b)
                for (int cc = 0; cc < s && placed < k; ++cc, ++placed) {
                    Vec3 p = centers[c] + Vec3{(a + 0.5) / s - 0.5, (b + 0.5) / s - 0.5,
                                               (cc + 0.5) / s - 0.5} *
                                              Vec3{hx, hy, hz};
                    double h = std::max({hx, hy, hz}) / double(s);
                    out.push_back(p + beta * h * wiggle(p));
                }
    }
    return out;
}

/// Midpoint tensor quadrature of the density over its support box.
struct Quadrature {
    std::vector<Vec3> nodes;
    std::vector<double> weights;
    double cell = 0.0;    // largest cell edge
    double total = 0.0;   // sum of weights, ~1
};

inline Quadrature midpoint_quadrature(const DensitySpec& d, int m) {
    d.validate();
    if (m < 1) throw degenerate_input_error("midpoint_quadrature: m must be >= 1");
    Vec3 lo = d.box_lo(), ext = d.box_hi() - d.box_lo();
    double hx = ext.x / m, hy = ext.y / m, hz = ext.z / m;
    double vol = hx * hy * hz;
    Quadrature q;
    q.cell = std::max({hx, hy, hz});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k) {
                Vec3 c{lo.x + (i + 0.5) * hx, lo.y + (j + 0.5) * hy,
                       lo.z + (k + 0.5) * hz};
                double w = d.rho(c) * vol;
                if (w > 0.0) {
                    q.nodes.push_back(c);
                    q.weights.push_back(w);
                    q.total += w;
                }
            }
    if (q.nodes.empty())
        throw degenerate_input_error("midpoint_quadrature: density vanishes on the grid");
    return q;
}

/// Continuum interaction field 6 pi r0 (Phi * rho kappa_g)(x) by quadrature.
/// Nodes within `exclusion` of x are skipped and replaced by the analytic
/// small-ball integral of the kernel times rho(x), which removes the
/// integrable singularity from the midpoint sum. Defaults to 2 cells.
inline Vec3 k_rho(const Quadrature& q, const DensitySpec& d, double r0, Vec3 kappa_g,
                  Vec3 x, double exclusion = -1.0) {
    if (exclusion < 0.0) exclusion = 2.0 * q.cell;
    Vec3 acc{};
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        Vec3 rel = x - q.nodes[i];
        if (norm(rel) <= exclusion) continue;
        acc += q.weights[i] * (kernels::oseen(rel) * kappa_g);
    }
    // int_{|y| < eps} Phi(y) dy = (eps^2 / 3) I
    acc += (d.rho(x) * exclusion * exclusion / 3.0) * kappa_g;
    return 6.0 * kernels::pi * r0 * acc;
}

/// Gradient counterpart, G(i, der) = d_der (K rho)_i; the small-ball
/// correction vanishes by parity.
inline Mat3 grad_k_rho(const Quadrature& q, double r0, Vec3 kappa_g, Vec3 x,
                       double exclusion = -1.0) {
    if (exclusion < 0.0) exclusion = 2.0 * q.cell;
    Mat3 G = Mat3::zero();
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        Vec3 rel = x - q.nodes[i];
        if (norm(rel) <= exclusion) continue;
        Rank3 g = kernels::oseen_gradient(rel);
        for (std::size_t der = 0; der < 3; ++der) {
            Vec3 col = g[der] * kappa_g;
            for (std::size_t r = 0; r < 3; ++r) G(r, der) += q.weights[i] * col[r];
        }
    }
    return (6.0 * kernels::pi * r0) * G;
}

}  // namespace pairflow::sampling
