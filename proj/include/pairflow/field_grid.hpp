#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pairflow/algebra.hpp"
#include "pairflow/errors.hpp"

/// Vector field on a uniform box grid, sampled by trilinear or tricubic
/// (Catmull-Rom) interpolation. This carries the correlated orientation
/// field: values are the orientation vectors, nodes span the support of the
/// transported density plus whatever drift margin the caller budgets.
namespace pairflow::meso {

enum class Interpolation { trilinear, tricubic };

struct FField {
    std::array<int, 3> dims{2, 2, 2};  // nodes per axis
    Vec3 origin{};                     // position of node (0,0,0)
    Vec3 spacing{1, 1, 1};
    Interpolation interp = Interpolation::trilinear;
    std::vector<Vec3> values;

    static FField make(std::array<int, 3> dims, Vec3 origin, Vec3 spacing,
                       Interpolation interp = Interpolation::trilinear) {
        FField f;
        f.dims = dims;
        f.origin = origin;
        f.spacing = spacing;
        f.interp = interp;
        f.validate_shape();
        f.values.assign(std::size_t(dims[0]) * dims[1] * dims[2], Vec3{});
        return f;
    }

    void validate_shape() const {
        for (int d : dims)
            if (d < 2) throw degenerate_input_error("FField: needs >= 2 nodes per axis");
        if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0))
            throw degenerate_input_error("FField: spacing must be positive");
    }

    std::size_t index(int i, int j, int k) const {
        return (std::size_t(i) * dims[1] + j) * dims[2] + k;
    }
    Vec3& at(int i, int j, int k) { return values[index(i, j, k)]; }
    const Vec3& at(int i, int j, int k) const { return values[index(i, j, k)]; }

    Vec3 node_position(int i, int j, int k) const {
        return origin + Vec3{i * spacing.x, j * spacing.y, k * spacing.z};
    }
    Vec3 box_lo() const { return origin; }
    Vec3 box_hi() const {
        return node_position(dims[0] - 1, dims[1] - 1, dims[2] - 1);
    }

    bool contains(Vec3 x) const {
        Vec3 lo = box_lo(), hi = box_hi();
        return x.x >= lo.x && x.x <= hi.x && x.y >= lo.y && x.y <= hi.y &&
               x.z >= lo.z && x.z <= hi.z;
    }

    /// Interpolated value; throws when x is outside the grid box.
    Vec3 sample(Vec3 x) const {
        if (!contains(x))
            throw domain_exit_error("FField sample outside the grid box");
        return sample_unchecked(x);
    }

    /// Interpolated value with x clamped into the grid box first; constant
    /// extrapolation for transport feet that fall just outside.
    Vec3 sample_clamped(Vec3 x) const {
        Vec3 lo = box_lo(), hi = box_hi();
        x.x = std::min(std::max(x.x, lo.x), hi.x);
        x.y = std::min(std::max(x.y, lo.y), hi.y);
        x.z = std::min(std::max(x.z, lo.z), hi.z);
        return sample_unchecked(x);
    }

    /// Fill every node from a function of position.
    template <typename Fn>
    void assign(Fn&& f) {
        for (int i = 0; i < dims[0]; ++i)
            for (int j = 0; j < dims[1]; ++j)
                for (int k = 0; k < dims[2]; ++k) at(i, j, k) = f(node_position(i, j, k));
    }

    double sup_difference(const FField& other) const {
        if (other.values.size() != values.size())
            throw degenerate_input_error("FField: comparing different grids");
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            m = std::max(m, norm(values[i] - other.values[i]));
        return m;
    }

  private:
    struct AxisPos {
        int cell;    // lower node of the containing interval
        double t;    // fractional offset in [0, 1]
    };
    AxisPos locate(double x, double o, double h, int n) const {
        double s = (x - o) / h;
        int c = int(std::floor(s));
        if (c < 0) c = 0;
        if (c > n - 2) c = n - 2;
        return {c, s - c};
    }

    Vec3 sample_unchecked(Vec3 x) const {
        AxisPos a = locate(x.x, origin.x, spacing.x, dims[0]);
        AxisPos b = locate(x.y, origin.y, spacing.y, dims[1]);
        AxisPos c = locate(x.z, origin.z, spacing.z, dims[2]);
        if (interp == Interpolation::tricubic && a.cell >= 1 && a.cell <= dims[0] - 3 &&
            b.cell >= 1 && b.cell <= dims[1] - 3 && c.cell >= 1 && c.cell <= dims[2] - 3)
            return tricubic_at(a, b, c);
        return trilinear_at(a, b, c);
    }

    Vec3 trilinear_at(AxisPos a, AxisPos b, AxisPos c) const {
        Vec3 r{};
        for (int di = 0; di < 2; ++di)
            for (int dj = 0; dj < 2; ++dj)
                for (int dk = 0; dk < 2; ++dk) {
                    double w = (di ? a.t : 1.0 - a.t) * (dj ? b.t : 1.0 - b.t) *
                               (dk ? c.t : 1.0 - c.t);
                    r += w * at(a.cell + di, b.cell + dj, c.cell + dk);
                }
        return r;
    }

    // Catmull-Rom weights over the 4-node stencil {cell-1 .. cell+2}
    static std::array<double, 4> cr_weights(double t) {
        double t2 = t * t, t3 = t2 * t;
        return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2),
                0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2)};
    }

    Vec3 tricubic_at(AxisPos a, AxisPos b, AxisPos c) const {
        auto wa = cr_weights(a.t), wb = cr_weights(b.t), wc = cr_weights(c.t);
        Vec3 r{};
        for (int di = 0; di < 4; ++di)
            for (int dj = 0; dj < 4; ++dj)
                for (int dk = 0; dk < 4; ++dk)
                    r += wa[di] * wb[dj] * wc[dk] *
                         at(a.cell - 1 + di, b.cell - 1 + dj, c.cell - 1 + dk);
        return r;
    }
};

}  // namespace pairflow::meso
