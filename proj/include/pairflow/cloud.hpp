#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pairflow/algebra.hpp"
#include "pairflow/errors.hpp"
#include "pairflow/metrics.hpp"
#include "pairflow/pair_hydro.hpp"

namespace pairflow {

/// A suspension of N identical sphere pairs. The sphere radius is tied to the
/// pair count by R = r0 / (2N), so the total sphere volume stays of order
/// r0^3/N^2 as the cloud is refined. kappa_g is the settling velocity of a
/// single isolated sphere; m1/m2 bracket the admissible pair elongations.
struct Cloud {
    std::vector<pair_hydro::PairGeometry> pairs;
    double r0 = 1.0;
    double radius = 0.0;  // common sphere radius r0 / (2N)
    Vec3 kappa_g{0, 0, -1};
    double m1 = 8.0;
    double m2 = 1.25;

    std::size_t size() const { return pairs.size(); }

    std::vector<Vec3> centers() const {
        std::vector<Vec3> xs;
        xs.reserve(pairs.size());
        for (const auto& p : pairs) xs.push_back(p.x_plus);
        return xs;
    }
};

inline constexpr std::size_t max_cloud_size = 10000;

inline Cloud make_cloud(std::vector<Vec3> x_plus, std::vector<Vec3> xi, double r0,
                        Vec3 kappa_g, double m1 = 8.0, double m2 = 1.25) {
    if (x_plus.size() != xi.size())
        throw degenerate_input_error("make_cloud: centers and orientations differ in size");
    if (x_plus.empty()) throw degenerate_input_error("make_cloud: empty cloud");
    if (x_plus.size() > max_cloud_size)
        throw degenerate_input_error("make_cloud: more than 10^4 pairs");
    if (!(r0 > 0.0)) throw degenerate_input_error("make_cloud: r0 must be positive");
    if (!finite(kappa_g) || norm(kappa_g) == 0.0)
        throw degenerate_input_error("make_cloud: bad settling velocity");
    if (!(m1 > m2) || !(m2 > 1.0))
        throw degenerate_input_error("make_cloud: requires m1 > m2 > 1");
    Cloud c;
    c.r0 = r0;
    c.radius = r0 / (2.0 * double(x_plus.size()));
    c.kappa_g = kappa_g;
    c.m1 = m1;
    c.m2 = m2;
    c.pairs.reserve(x_plus.size());
    for (std::size_t i = 0; i < x_plus.size(); ++i) {
        if (!finite(x_plus[i]) || !finite(xi[i]))
            throw degenerate_input_error("make_cloud: non-finite entry at pair " +
                                         std::to_string(i));
        if (!(norm(xi[i]) > 1.0))
            throw overlap_error("make_cloud: pair " + std::to_string(i) +
                                " has |xi| <= 1 (spheres overlap)");
        c.pairs.push_back({x_plus[i], xi[i], c.radius});
    }
    return c;
}

/// Soft checks: elongation-band violations come back as warnings (the bounds
/// are hypotheses of the estimates, not of the algebra); sphere overlaps
/// across distinct pairs are hard errors.
inline std::vector<std::string> validate_cloud(const Cloud& c) {
    std::vector<std::string> warnings;
    for (std::size_t i = 0; i < c.size(); ++i) {
        double s = norm(c.pairs[i].xi);
        if (s < c.m2 || s > c.m1)
            warnings.push_back("pair " + std::to_string(i) + ": |xi| = " +
                               std::to_string(s) + " outside [m2, m1]");
    }
    if (c.size() >= 2) {
        double dmin = metrics::min_distance(c.centers());
        // centers further apart than 2R(m1 + 1) cannot bring spheres closer
        // than 2R; only below that is the sphere-level check needed
        if (dmin <= 2.0 * c.radius * (c.m1 + 1.0)) {
            for (std::size_t i = 0; i < c.size(); ++i)
                for (std::size_t j = i + 1; j < c.size(); ++j) {
                    if (norm(c.pairs[i].x_plus - c.pairs[j].x_plus) >
                        2.0 * c.radius * (c.m1 + 1.0))
                        continue;
                    for (Vec3 a : {pair_hydro::sphere_1(c.pairs[i]),
                                   pair_hydro::sphere_2(c.pairs[i])})
                        for (Vec3 b : {pair_hydro::sphere_1(c.pairs[j]),
                                       pair_hydro::sphere_2(c.pairs[j])})
                            if (norm(a - b) < 2.0 * c.radius)
                                throw overlap_error(
                                    "spheres of pairs " + std::to_string(i) + " and " +
                                    std::to_string(j) + " overlap");
                }
        }
    }
    return warnings;
}

}  // namespace pairflow
