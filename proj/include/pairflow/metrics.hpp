#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include "pairflow/algebra.hpp"
#include "pairflow/errors.hpp"

/// Point-cloud diagnostics: minimal separation, bottleneck (infinity)
/// transport distance between equal-size clouds, a semi-discrete upper-bound
/// estimator against a density, uniformity sums, and log-log slope fits.
namespace pairflow::metrics {

/// O(n^2) reference path.
inline double min_distance_brute(const std::vector<Vec3>& pts) {
    if (pts.size() < 2)
        throw degenerate_input_error("min_distance needs at least two points");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            best = std::min(best, norm2(pts[i] - pts[j]));
    return std::sqrt(best);
}

namespace detail {

struct CellKey {
    std::int64_t x, y, z;
    bool operator==(const CellKey&) const = default;
};
struct CellHash {
    std::size_t operator()(const CellKey& k) const {
        std::uint64_t h = 1469598103934665603ull;
        for (std::int64_t v : {k.x, k.y, k.z}) {
            h ^= std::uint64_t(v);
            h *= 1099511628211ull;
        }
        return std::size_t(h);
    }
};

/// Scan all pairs within one cell width; returns +inf when no pair lies
/// inside any 27-cell neighborhood.
inline double grid_pass(const std::vector<Vec3>& pts, double cell) {
    std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> grid;
    grid.reserve(pts.size());
    auto key = [cell](Vec3 p) {
        return CellKey{std::int64_t(std::floor(p.x / cell)),
                       std::int64_t(std::floor(p.y / cell)),
                       std::int64_t(std::floor(p.z / cell))};
    };
    for (std::uint32_t i = 0; i < pts.size(); ++i) grid[key(pts[i])].push_back(i);
    double best = std::numeric_limits<double>::infinity();
    for (auto& [k, members] : grid) {
        for (std::int64_t dx = -1; dx <= 1; ++dx)
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dz = -1; dz <= 1; ++dz) {
                    auto it = grid.find(CellKey{k.x + dx, k.y + dy, k.z + dz});
                    if (it == grid.end()) continue;
                    for (std::uint32_t a : members)
                        for (std::uint32_t b : it->second)
                            if (b > a) best = std::min(best, norm2(pts[a] - pts[b]));
                }
    }
    return std::sqrt(best);
}

}  // namespace detail

/// Exact minimal pairwise distance via a uniform cell grid. A found minimum
/// m <= cell is globally exact (unscanned pairs are farther than one cell
/// width apart); otherwise the cell is enlarged and the scan repeated, so the
/// result always equals the brute-force value.
inline double min_distance(const std::vector<Vec3>& pts) {
    if (pts.size() < 2)
        throw degenerate_input_error("min_distance needs at least two points");
    for (const Vec3& p : pts)
        if (!finite(p)) throw degenerate_input_error("min_distance: non-finite point");
    Vec3 lo = pts[0], hi = pts[0];
    for (const Vec3& p : pts)
        for (int c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], p[c]);
            hi[c] = std::max(hi[c], p[c]);
        }
    double diag = norm(hi - lo);
    if (diag == 0.0) return 0.0;  // all points coincide
    double cell = std::max(diag / std::cbrt(double(pts.size())), diag * 1e-12);
    for (int rounds = 0; rounds < 64; ++rounds) {
        double m = detail::grid_pass(pts, cell);
        if (m <= cell) return m;
        if (std::isinf(m)) {
            cell *= 2.0;
            continue;
        }
        cell = m * (1.0 + 1e-12);  // one more pass catches everything <= m
    }
    return min_distance_brute(pts);  // unreachable in practice
}

namespace detail {

/// Hopcroft-Karp over an implicit threshold graph: left vertex i may use the
/// first count[i] entries of its distance-sorted candidate list.
class ThresholdMatcher {
  public:
    ThresholdMatcher(std::vector<double> dist, std::vector<std::uint32_t> order,
                     std::size_t n)
        : n_(n), dist_(std::move(dist)), order_(std::move(order)) {}

    /// Number of row entries with distance <= t, per row.
    std::vector<std::uint32_t> counts(double t) const {
        std::vector<std::uint32_t> c(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* row = dist_.data() + i * n_;
            std::uint32_t lo = 0, hi = std::uint32_t(n_);
            while (lo < hi) {
                std::uint32_t mid = (lo + hi) / 2;
                if (row[order_[i * n_ + mid]] <= t) lo = mid + 1;
                else hi = mid;
            }
            c[i] = lo;
        }
        return c;
    }

    bool perfect_matching(const std::vector<std::uint32_t>& cnt) {
        constexpr std::uint32_t INF = std::numeric_limits<std::uint32_t>::max();
        match_l_.assign(n_, INF);
        match_r_.assign(n_, INF);
        std::size_t matched = 0;
        std::vector<std::uint32_t> layer(n_), queue(n_);
        while (true) {
            // BFS from free left vertices
            std::size_t qh = 0, qt = 0;
            for (std::uint32_t i = 0; i < n_; ++i) {
                if (match_l_[i] == INF) {
                    layer[i] = 0;
                    queue[qt++] = i;
                } else {
                    layer[i] = INF;
                }
            }
            bool reachable_free_right = false;
            while (qh < qt) {
                std::uint32_t u = queue[qh++];
                const std::uint32_t* row = order_.data() + std::size_t(u) * n_;
                for (std::uint32_t e = 0; e < cnt[u]; ++e) {
                    std::uint32_t v = row[e];
                    std::uint32_t w = match_r_[v];
                    if (w == INF) {
                        reachable_free_right = true;
                    } else if (layer[w] == INF) {
                        layer[w] = layer[u] + 1;
                        queue[qt++] = w;
                    }
                }
            }
            if (!reachable_free_right) break;
            // DFS augmenting along the layering
            std::size_t found = 0;
            for (std::uint32_t i = 0; i < n_; ++i)
                if (match_l_[i] == INF && try_augment(i, cnt, layer)) ++found;
            if (found == 0) break;
            matched += found;
        }
        return matched == n_;
    }

  private:
    bool try_augment(std::uint32_t u, const std::vector<std::uint32_t>& cnt,
                     std::vector<std::uint32_t>& layer) {
        constexpr std::uint32_t INF = std::numeric_limits<std::uint32_t>::max();
        const std::uint32_t* row = order_.data() + std::size_t(u) * n_;
        for (std::uint32_t e = 0; e < cnt[u]; ++e) {
            std::uint32_t v = row[e];
            std::uint32_t w = match_r_[v];
            if (w == INF || (layer[w] == layer[u] + 1 && try_augment(w, cnt, layer))) {
                match_l_[u] = v;
                match_r_[v] = u;
                return true;
            }
        }
        layer[u] = INF;
        return false;
    }

    std::size_t n_;
    std::vector<double> dist_;           // row-major n x n
    std::vector<std::uint32_t> order_;   // per-row column indices sorted by distance
    std::vector<std::uint32_t> match_l_, match_r_;
};

}  // namespace detail

/// Bottleneck transport distance between two equal-size unit-weight clouds:
/// the smallest t such that a may be matched one-to-one onto b with every
/// matched pair at distance <= t. Exact: the returned value is one of the
/// pairwise distances, found by binary search over the sorted distance set
/// with a perfect-matching feasibility test per probe.
inline double w_infinity_empirical(const std::vector<Vec3>& a,
                                   const std::vector<Vec3>& b) {
    if (a.size() != b.size())
        throw degenerate_input_error("w_infinity_empirical: clouds differ in size");
    if (a.empty())
        throw degenerate_input_error("w_infinity_empirical: empty clouds");
    std::size_t n = a.size();
    std::vector<double> dist(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) dist[i * n + j] = norm(a[i] - b[j]);
    std::vector<std::uint32_t> order(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t* row = order.data() + i * n;
        for (std::uint32_t j = 0; j < n; ++j) row[j] = j;
        const double* drow = dist.data() + i * n;
        std::sort(row, row + n, [drow](std::uint32_t x, std::uint32_t y) {
            return drow[x] < drow[y];
        });
    }
    std::vector<double> values = dist;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());

    detail::ThresholdMatcher matcher(std::move(dist), std::move(order), n);
    std::size_t lo = 0, hi = values.size() - 1;
    if (matcher.perfect_matching(matcher.counts(values[lo]))) return values[lo];
    while (lo + 1 < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (matcher.perfect_matching(matcher.counts(values[mid]))) hi = mid;
        else lo = mid;
    }
    return values[hi];
}

/// Split n units proportionally to the masses, by cascade rounding along the
/// scan order: cumulative counts track cumulative mass within one unit, so
/// ties cannot clump at the front of the array. Always sums to exactly n.
inline std::vector<std::size_t> apportion_counts(const std::vector<double>& mass,
                                                 std::size_t n) {
    double total = 0.0;
    for (double m : mass) total += m;
    if (!(total > 0.0))
        throw degenerate_input_error("apportion_counts: total mass must be positive");
    std::vector<std::size_t> count(mass.size());
    double cum = 0.0;
    std::size_t prev = 0, assigned = 0;
    for (std::size_t c = 0; c < mass.size(); ++c) {
        cum += double(n) * mass[c] / total;
        std::size_t r = std::size_t(std::llround(cum));
        count[c] = r - prev;
        assigned += count[c];
        prev = r;
    }
    for (std::size_t c = mass.size(); assigned < n;) ++count[--c], ++assigned;
    for (std::size_t c = mass.size(); assigned > n;) {
        --c;
        if (count[c] > 0) --count[c], --assigned;
    }
    return count;
}

/// Upper-bound estimate of the bottleneck distance from a cloud to an
/// absolutely continuous density: the density is collapsed onto cell centers
/// of a resolution^3 grid over [box_lo, box_hi] (masses rounded to point
/// counts by cascade rounding), then matched against the cloud.
inline double w_infinity_to_density(const std::vector<Vec3>& pts,
                                    const std::function<double(Vec3)>& rho,
                                    Vec3 box_lo, Vec3 box_hi, int resolution) {
    if (pts.empty()) throw degenerate_input_error("w_infinity_to_density: no points");
    if (resolution < 1) throw degenerate_input_error("resolution must be >= 1");
    std::size_t n = pts.size();
    Vec3 ext = box_hi - box_lo;
    if (!(ext.x > 0 && ext.y > 0 && ext.z > 0))
        throw degenerate_input_error("w_infinity_to_density: empty box");
    double nx = resolution;
    std::vector<Vec3> centers;
    std::vector<double> mass;
    centers.reserve(std::size_t(resolution) * resolution * resolution);
    for (int i = 0; i < resolution; ++i)
        for (int j = 0; j < resolution; ++j)
            for (int k = 0; k < resolution; ++k) {
                Vec3 c{box_lo.x + (i + 0.5) * ext.x / nx,
                       box_lo.y + (j + 0.5) * ext.y / nx,
                       box_lo.z + (k + 0.5) * ext.z / nx};
                double m = rho(c);
                if (m > 0.0) {
                    centers.push_back(c);
                    mass.push_back(m);
                }
            }
    if (centers.size() < n)
        throw resolution_error("w_infinity_to_density: fewer cells with mass than points");
    std::vector<std::size_t> count = apportion_counts(mass, n);
    std::vector<Vec3> sites;
    sites.reserve(n);
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (std::size_t r = 0; r < count[c]; ++r) sites.push_back(centers[c]);
    return w_infinity_empirical(pts, sites);
}

struct JoSum {
    double value;  // max_i (1/N) sum_{j != i} d_ij^-k
    double bound;  // dilution-controlled bound at the supplied constant
};

/// Uniformity sum max_i (1/N) sum_{j!=i} |x_i - x_j|^-k together with the
/// bound C (rho_inf W^3 / d_min^k + rho_inf^{k/3}) for k <= 2 and the
/// log-corrected variant at k = 3.
inline JoSum jo_sums(const std::vector<Vec3>& pts, double k, double rho_inf,
                     double w_inf, double d_min, double C) {
    if (pts.size() < 2) throw degenerate_input_error("jo_sums needs at least two points");
    if (k < 0.0 || k > 3.0) throw degenerate_input_error("jo_sums: k must lie in [0,3]");
    std::size_t n = pts.size();
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d = norm(pts[i] - pts[j]);
            s += std::pow(d, -k);
        }
        worst = std::max(worst, s / double(n));
    }
    double w3 = w_inf * w_inf * w_inf;
    double bound;
    if (k <= 2.0) {
        bound = C * (rho_inf * w3 / std::pow(d_min, k) + std::pow(rho_inf, k / 3.0));
    } else {
        bound = C * rho_inf *
                (w3 / (d_min * d_min * d_min) +
                 std::abs(std::log(std::cbrt(rho_inf) * w_inf)) + 1.0);
    }
    return {worst, bound};
}

struct SlopeFit {
    double slope;
    double intercept;  // in log space
};

/// Least-squares line through (log x, log y).
inline SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw degenerate_input_error("fit_slope: size mismatch");
    if (x.size() < 2)
        throw degenerate_input_error("fit_slope needs at least two samples");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw degenerate_input_error("fit_slope: inputs must be positive");
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double n = double(x.size());
    double denom = n * sxx - sx * sx;
    if (denom == 0.0) throw degenerate_input_error("fit_slope: degenerate abscissae");
    double slope = (n * sxy - sx * sy) / denom;
    return {slope, (sy - slope * sx) / n};
}

}  // namespace pairflow::metrics
