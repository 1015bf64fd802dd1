#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "pairflow/meso.hpp"
#include "pairflow/sampling.hpp"

using namespace pairflow;
namespace ms = pairflow::meso;
namespace sp = pairflow::sampling;
using testutil::loglog_slope;

namespace {

/// Test-side matrix exponential by scaling-and-squaring on the Taylor series.
Mat3 expm(Mat3 A) {
    int s = 0;
    while (frobenius_norm(A) > 0.25) {
        A = 0.5 * A;
        ++s;
    }
    Mat3 sum = Mat3::identity(), term = Mat3::identity();
    for (int k = 1; k <= 24; ++k) {
        term = (1.0 / k) * (term * A);
        sum = sum + term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

Mat3 mat_pow(Mat3 B, std::size_t n) {
    Mat3 r = Mat3::identity();
    for (std::size_t i = 0; i < n; ++i) r = B * r;
    return r;
}

FField const_field(std::array<int, 3> dims, Vec3 origin, Vec3 spacing, Vec3 value) {
    ms::FField f = ms::FField::make(dims, origin, spacing);
    f.assign([&](Vec3) { return value; });
    return f;
}

using ms::FField;

}  // namespace

TEST_CASE("blob kernel: cap at the origin, consistency in the far field") {
    double delta = 0.02;
    Mat3 z = ms::blob_oseen({0, 0, 0}, delta);
    Mat3 expect = (1.0 / (8.0 * kernels::pi * delta)) * Mat3::identity();
    CHECK(frobenius_norm(z - expect) == 0.0);
    auto g = testutil::rng(81);
    for (int t = 0; t < 50; ++t) {
        Vec3 x = testutil::uniform(g, 0.5, 2.0) * testutil::random_unit(g);
        double r = norm(x);
        Mat3 diff = ms::blob_oseen(x, delta) - kernels::oseen(x);
        // mollification bias is O(delta^2 / r^2) relative
        CHECK(frobenius_norm(diff) <
              2.0 * delta * delta / (r * r) * frobenius_norm(kernels::oseen(x)));
    }
    CHECK_THROWS_AS(ms::blob_oseen({1, 0, 0}, 0.0), degenerate_input_error);
    CHECK_THROWS_AS(ms::blob_oseen_gradient({1, 0, 0}, -1.0), degenerate_input_error);
}

TEST_CASE("blob gradient matches finite differences, also across the core") {
    auto g = testutil::rng(82);
    double delta = 0.15;
    for (int t = 0; t < 20; ++t) {
        // include points with |x| < delta: the blob is smooth through its core
        Vec3 x = testutil::uniform(g, 0.02, 1.5) * testutil::random_unit(g);
        Rank3 grad = ms::blob_oseen_gradient(x, delta);
        double h = 1e-6;
        for (std::size_t k = 0; k < 3; ++k) {
            Vec3 dx{};
            dx[k] = h;
            Mat3 fd = (1.0 / (2.0 * h)) *
                      (ms::blob_oseen(x + dx, delta) - ms::blob_oseen(x - dx, delta));
            CHECK(frobenius_norm(grad[k] - fd) < 1e-6);
        }
    }
}

TEST_CASE("ensemble construction and weight checks") {
    auto e = ms::make_ensemble({{0, 0, 0}, {1, 0, 0}}, {}, 0.5, {0, 0, -1});
    CHECK(e.parts.size() == 2);
    CHECK(e.parts[0].weight == 0.5);
    CHECK_NOTHROW(ms::validate_ensemble(e));
    e.parts[0].weight = 0.7;
    CHECK_THROWS_AS(ms::validate_ensemble(e), degenerate_input_error);
    e.parts[0].weight = -0.5;
    CHECK_THROWS_AS(ms::validate_ensemble(e), degenerate_input_error);
    CHECK_THROWS_AS(ms::make_ensemble({}, {}, 0.5, {0, 0, -1}), degenerate_input_error);
    CHECK_THROWS_AS(ms::make_ensemble({{0, 0, 0}}, {{0, 0, 2}, {0, 0, 2}}, 0.5,
                                      {0, 0, -1}),
                    degenerate_input_error);
}

TEST_CASE("single particle: frozen self-field value") {
    double r0 = 0.4, delta = 0.05;
    auto e = ms::make_ensemble({{0.2, 0.1, -0.3}}, {{0, 0, 2}}, r0, {0, 0, -1});
    Vec3 u = ms::continuous_K(e, e.parts[0].x, {delta});
    // 6 pi r0 * Phi_delta(0) kappa_g = 3 r0 / (4 delta) kappa_g
    Vec3 expect = (3.0 * r0 / (4.0 * delta)) * e.kappa_g;
    CHECK(norm(u - expect) < 1e-14);
    // the field gradient vanishes at the particle by parity, so xi is frozen
    Mat3 G = ms::continuous_K_gradient(e, e.parts[0].x, {delta});
    CHECK(frobenius_norm(G) == 0.0);
}

TEST_CASE("ensemble field matches a fine-quadrature convolution oracle") {
    sp::DensitySpec d;
    d.kind = sp::DensityKind::uniform_ball;
    d.radius = 1.0;
    auto xs = sp::sample_positions(d, 10000, 4242);
    auto e = ms::make_ensemble(xs, {}, 0.3, {0, 0, -1});
    auto quad = sp::midpoint_quadrature(d, 64);
    Vec3 probe{0, 0, 0};
    Vec3 oracle = sp::k_rho(quad, d, e.r0, e.kappa_g, probe);
    Vec3 val = ms::continuous_K(e, probe, {0.05});
    CHECK(norm(val - oracle) < 0.01 * norm(oracle));
}

TEST_CASE("kinetic stepper: frozen cases") {
    auto e0 = ms::make_ensemble({{0, 0, 0}, {0.5, 0, 0}}, {{0, 0, 2}, {0, 1.8, 0}},
                                0.3, {0, 0, 0});
    // kappa_g = 0: no drift, no interaction field, nothing moves
    auto e = e0;
    ms::step_meso_kinetic(e, 0.1, ms::BlobSpec{0.05}, Stepper::rk4);
    for (std::size_t i = 0; i < e.parts.size(); ++i) {
        CHECK(norm(e.parts[i].x - e0.parts[i].x) == 0.0);
        CHECK(norm(e.parts[i].xi - e0.parts[i].xi) == 0.0);
    }
    // single particle: xi frozen (gradient vanishes), drift = settling plus
    // the mollified self term along kappa_g
    double r0 = 0.3, delta = 0.05, dt = 0.01;
    auto s = ms::make_ensemble({{0, 0, 0}}, {{0, 0, 2}}, r0, {0, 0, -1});
    Vec3 xi0 = s.parts[0].xi;
    Vec3 v = pair_hydro::settling_matrix_inverse(xi0).apply(s.kappa_g) +
             (3.0 * r0 / (4.0 * delta)) * s.kappa_g;
    ms::step_meso_kinetic(s, dt, ms::BlobSpec{delta}, Stepper::euler);
    CHECK(norm(s.parts[0].x - dt * v) < 1e-15);
    CHECK(norm(s.parts[0].xi - xi0) == 0.0);
    // weights are never touched
    CHECK(s.parts[0].weight == 1.0);
}

TEST_CASE("kinetic orientations follow the matrix exponential under linear flow") {
    Mat3 G = Mat3::zero();
    G(0, 1) = 0.8;
    G(1, 0) = -0.3;
    G(2, 2) = 0.4;
    G(0, 2) = 0.2;
    auto flow = ms::linear_flow(G);
    Vec3 xi0{0.3, 1.6, 1.2};
    double T = 1.0;
    Vec3 exact = expm(T * G) * xi0;
    std::vector<double> dts{0.1, 0.05, 0.025, 0.0125};
    std::vector<double> errs;
    for (double dt : dts) {
        auto e = ms::make_ensemble({{0, 0, 0}}, {xi0}, 0.3, {0, 0, -1});
        std::size_t n = std::size_t(std::llround(T / dt));
        for (std::size_t k = 0; k < n; ++k)
            ms::step_meso_kinetic(e, dt, flow, Stepper::rk4);
        errs.push_back(norm(e.parts[0].xi - exact));
    }
    CHECK(loglog_slope(dts, errs) == Catch::Approx(4.0).margin(0.4));
    CHECK(errs.back() < 1e-9);
}

TEST_CASE("field grid: shape checks, node round trip, interpolation") {
    CHECK_THROWS_AS(FField::make({1, 4, 4}, {}, {1, 1, 1}), degenerate_input_error);
    CHECK_THROWS_AS(FField::make({4, 4, 4}, {}, {1, 0, 1}), degenerate_input_error);
    FField f = FField::make({5, 4, 3}, {-1, 0, 2}, {0.5, 0.25, 1.0});
    f.assign([](Vec3 p) { return Vec3{p.x + 2 * p.y, p.z, p.x * 1.5}; });
    // samples at nodes reproduce stored values exactly
    CHECK(norm(f.sample(f.node_position(3, 2, 1)) - f.at(3, 2, 1)) == 0.0);
    // trilinear interpolation is exact on affine fields
    Vec3 probe{-0.37, 0.61, 2.4};
    Vec3 expect{probe.x + 2 * probe.y, probe.z, probe.x * 1.5};
    CHECK(norm(f.sample(probe) - expect) < 1e-14);
    CHECK_THROWS_AS(f.sample({9, 0, 2.5}), domain_exit_error);
    CHECK(norm(f.sample_clamped({9, 0.61, 2.4}) -
               f.sample({f.box_hi().x, 0.61, 2.4})) == 0.0);
    FField other = FField::make({4, 4, 4}, {}, {1, 1, 1});
    CHECK_THROWS_AS(f.sup_difference(other), degenerate_input_error);
}

TEST_CASE("tricubic interpolation beats trilinear on smooth fields") {
    auto fn = [](Vec3 p) {
        return Vec3{std::sin(p.x) * std::cos(p.y), std::sin(p.y + p.z),
                    std::cos(1.3 * p.x + 0.4 * p.z)};
    };
    FField lin = FField::make({17, 17, 17}, {-2, -2, -2}, {0.25, 0.25, 0.25});
    lin.assign(fn);
    FField cub = lin;
    cub.interp = ms::Interpolation::tricubic;
    auto g = testutil::rng(83);
    double worst_lin = 0, worst_cub = 0;
    for (int t = 0; t < 200; ++t) {
        Vec3 p = testutil::random_vec(g, 1.4);  // interior, full stencils fit
        worst_lin = std::max(worst_lin, norm(lin.sample(p) - fn(p)));
        worst_cub = std::max(worst_cub, norm(cub.sample(p) - fn(p)));
    }
    CHECK(worst_cub < 0.2 * worst_lin);
    // near the boundary the cubic stencil cannot fit and falls back
    Vec3 edge{-1.95, 0.1, 0.1};
    CHECK(norm(cub.sample(edge) - lin.sample(edge)) == 0.0);
}

TEST_CASE("transport: rigid translation of the field") {
    Vec3 kg{0, 0, -1};
    double dt = 0.15;
    auto fn = [](Vec3 p) {
        return Vec3{std::sin(0.9 * p.x + 0.3 * p.z), std::cos(0.7 * p.y),
                    std::sin(0.5 * p.z)};
    };
    ms::CorrelatedOptions opt;
    opt.law = ms::SettlingLaw::identity;
    opt.boundary = ms::BoundaryPolicy::clamp;
    for (auto interp : {ms::Interpolation::trilinear, ms::Interpolation::tricubic}) {
        FField f = FField::make({25, 25, 25}, {-3, -3, -3}, {0.25, 0.25, 0.25});
        f.interp = interp;
        f.assign(fn);
        FField after = ms::transport_F(f, ms::zero_flow(), kg, dt, opt);
        double worst = 0;
        for (int i = 2; i < 23; ++i)
            for (int j = 2; j < 23; ++j)
                for (int k = 2; k < 23; ++k) {
                    Vec3 x = f.node_position(i, j, k);
                    worst = std::max(worst, norm(after.at(i, j, k) - fn(x - dt * kg)));
                }
        double cap = interp == ms::Interpolation::trilinear ? 0.02 : 0.002;
        CHECK(worst < cap);
    }
    // affine initial data is translated exactly by the trilinear scheme
    FField aff = FField::make({9, 9, 9}, {-2, -2, -2}, {0.5, 0.5, 0.5});
    aff.assign([](Vec3 p) { return Vec3{2 * p.x - p.y, 0.5 * p.z, p.x + p.y + p.z}; });
    FField after = ms::transport_F(aff, ms::zero_flow(), kg, dt, opt);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j)
            for (int k = 0; k < 6; ++k) {  // feet stay inside for these nodes
                Vec3 x = aff.node_position(i, j, k);
                Vec3 foot = x - dt * kg;
                Vec3 expect{2 * foot.x - foot.y, 0.5 * foot.z,
                            foot.x + foot.y + foot.z};
                CHECK(norm(after.at(i, j, k) - expect) < 1e-13);
            }
}

TEST_CASE("transport: constant field with no flow stays constant") {
    Vec3 C{0.4, -1.2, 2.0};
    FField f = const_field({8, 8, 8}, {-1, -1, -1}, {0.3, 0.3, 0.3}, C);
    ms::CorrelatedOptions opt;
    opt.boundary = ms::BoundaryPolicy::clamp;
    opt.law = ms::SettlingLaw::identity;
    FField after = ms::transport_F(f, ms::zero_flow(), {0, 0, -1}, 0.2, opt);
    CHECK(after.sup_difference(f) == 0.0);
}

TEST_CASE("transport under linear flow reproduces the discrete growth maps") {
    Mat3 G = Mat3::zero();
    G(0, 0) = 0.3;
    G(0, 1) = 0.5;
    G(1, 2) = -0.4;
    G(2, 0) = 0.2;
    Vec3 C0{1.5, -0.4, 0.9};
    Vec3 kg{0.2, 0, -1};
    double dt = 0.07;
    ms::CorrelatedOptions opt;
    opt.law = ms::SettlingLaw::identity;
    opt.boundary = ms::BoundaryPolicy::clamp;
    FField f = const_field({6, 6, 6}, {-2, -2, -2}, {0.8, 0.8, 0.8}, C0);
    // first-order: F -> (I + dt G) F, uniformly in space
    FField a = ms::transport_F(f, ms::linear_flow(G), kg, dt, opt);
    Vec3 expect1 = (Mat3::identity() + dt * G) * C0;
    for (const Vec3& v : a.values) CHECK(norm(v - expect1) < 1e-14);
    // midpoint: F -> (I + dt G + dt^2 G^2 / 2) F
    opt.splitting = ms::SplittingOrder::midpoint;
    FField b = ms::transport_F(f, ms::linear_flow(G), kg, dt, opt);
    Vec3 expect2 = (Mat3::identity() + dt * G + 0.5 * dt * dt * (G * G)) * C0;
    for (const Vec3& v : b.values) CHECK(norm(v - expect2) < 1e-14);
}

TEST_CASE("strict boundary policy raises domain exit on outflow feet") {
    FField f = const_field({6, 6, 6}, {-1, -1, -1}, {0.4, 0.4, 0.4}, {0, 0, 2});
    ms::CorrelatedOptions opt;
    opt.law = ms::SettlingLaw::identity;
    opt.boundary = ms::BoundaryPolicy::strict;
    CHECK_THROWS_AS(ms::transport_F(f, ms::zero_flow(), {0, 0, -1}, 0.3, opt),
                    domain_exit_error);
}

TEST_CASE("correlated step: particles ride the field and stay synchronized") {
    Vec3 C{0, 0, 1.8};
    FField f = const_field({11, 11, 11}, {-2, -2, -2}, {0.4, 0.4, 0.4}, C);
    auto rho = ms::make_ensemble({{0, 0, 0}, {0.5, 0.2, -0.4}}, {C, C}, 0.3,
                                 {0, 0, -1});
    ms::CorrelatedOptions opt;
    opt.law = ms::SettlingLaw::pair_matrix;
    opt.boundary = ms::BoundaryPolicy::clamp;
    double dt = 0.05;
    Vec3 drift = pair_hydro::settling_matrix_inverse(C).apply(rho.kappa_g);
    auto r2 = rho;
    FField f2 = f;
    ms::step_meso_correlated(r2, f2, dt, ms::zero_flow(), opt);
    for (std::size_t i = 0; i < r2.parts.size(); ++i) {
        CHECK(norm(r2.parts[i].x - (rho.parts[i].x + dt * drift)) < 1e-14);
        CHECK(norm(r2.parts[i].xi - C) < 1e-14);  // xi mirrors the field
    }
    // a particle stepping off the grid is a hard error
    auto r3 = ms::make_ensemble({{-1.9, 0, 0}}, {C}, 0.3, {-1, 0, 0});
    FField f3 = f;
    ms::CorrelatedOptions strictopt = opt;
    strictopt.boundary = ms::BoundaryPolicy::clamp;
    CHECK_THROWS_AS(
        ms::step_meso_correlated(r3, f3, 0.5, ms::zero_flow(), strictopt),
        domain_exit_error);
}

TEST_CASE("picard: constant-coefficient problem converges in one sweep") {
    FField F0 = FField::make({7, 7, 7}, {-1.5, -1.5, -1.5}, {0.5, 0.5, 0.5});
    F0.assign([](Vec3 p) { return Vec3{0.2 * p.x, 0, 1.5 + 0.1 * p.z}; });
    ms::PicardOptions opt;
    opt.dt = 0.05;
    opt.law = ms::SettlingLaw::identity;  // coefficient independent of F
    auto res = ms::picard_solve_F(ms::zero_flow(), F0, {0, 0, -1}, 0.2, opt);
    CHECK(res.converged);
    CHECK(res.iterations == 2);
    CHECK(res.increments.back() == 0.0);
    REQUIRE(res.levels.size() == 5);
    CHECK(res.levels[0].sup_difference(F0) == 0.0);
    // warm start from the fixed point: nothing to do
    auto again = ms::picard_solve_F(ms::zero_flow(), F0, {0, 0, -1}, 0.2, opt,
                                    &res.levels);
    CHECK(again.iterations == 1);
    CHECK(again.increments[0] <= opt.tol);
}

TEST_CASE("picard fixed point reproduces the discrete evolution maps") {
    Mat3 G = Mat3::zero();
    G(0, 1) = 0.6;
    G(1, 0) = -0.2;
    G(2, 2) = 0.35;
    Vec3 C0{1.4, 0.3, -0.8};
    Vec3 kg{0, 0.1, -1};
    double T = 0.4;
    FField F0 = const_field({5, 5, 5}, {-3, -3, -3}, {1.5, 1.5, 1.5}, C0);
    ms::PicardOptions opt;
    opt.dt = 0.1;
    opt.law = ms::SettlingLaw::identity;
    opt.tol = 1e-13;
    auto res1 = ms::picard_solve_F(ms::linear_flow(G), F0, kg, T, opt);
    Vec3 expect1 = mat_pow(Mat3::identity() + opt.dt * G, 4) * C0;
    for (const Vec3& v : res1.levels.back().values) CHECK(norm(v - expect1) < 1e-12);
    // midpoint splitting converges to the trapezoidal map
    opt.splitting = ms::SplittingOrder::midpoint;
    auto res2 = ms::picard_solve_F(ms::linear_flow(G), F0, kg, T, opt);
    Mat3 trap = inverse(Mat3::identity() - 0.5 * opt.dt * G) *
                (Mat3::identity() + 0.5 * opt.dt * G);
    Vec3 expect2 = mat_pow(trap, 4) * C0;
    for (const Vec3& v : res2.levels.back().values) CHECK(norm(v - expect2) < 1e-11);
}

TEST_CASE("picard increments contract and shrink with the horizon") {
    FField F0 = FField::make({7, 7, 7}, {-2, -2, -2}, {2.0 / 3, 2.0 / 3, 2.0 / 3});
    F0.assign([](Vec3 p) {
        return Vec3{0.3 * std::sin(p.x), 0.2 * p.y, 1.8 + 0.3 * std::cos(p.z)};
    });
    Mat3 G = Mat3::zero();
    G(0, 2) = 0.5;
    G(1, 1) = -0.3;
    ms::PicardOptions opt;
    opt.dt = 0.02;
    opt.law = ms::SettlingLaw::pair_matrix;
    opt.tol = 1e-11;
    auto ratio_at = [&](double T) {
        auto res = ms::picard_solve_F(ms::linear_flow(G), F0, {0, 0, -1}, T, opt);
        REQUIRE(res.increments.size() >= 3);
        double worst = 0;
        for (std::size_t i = 1; i + 1 < res.increments.size(); ++i)
            worst = std::max(worst, res.increments[i + 1] / res.increments[i]);
        return worst;
    };
    double r1 = ratio_at(0.4), r2 = ratio_at(0.2), r3 = ratio_at(0.1);
    CHECK(r1 < 1.0);
    CHECK(r2 < r1);
    CHECK(r3 < r2);
    CHECK(r2 < 0.75 * r1);  // roughly linear in the horizon
}

TEST_CASE("picard reports non-contraction instead of looping") {
    // steep field and long horizon: the transport coefficient changes too
    // much between iterates for the fixed point to be reachable
    FField F0 = FField::make({9, 9, 9}, {-2, -2, -2}, {0.5, 0.5, 0.5});
    F0.assign([](Vec3 p) {
        return Vec3{4.0 * std::sin(3.0 * p.x), 4.0 * std::cos(3.0 * p.y),
                    2.0 + 1.5 * std::sin(3.0 * p.z)};
    });
    ms::PicardOptions opt;
    opt.dt = 0.25;
    opt.law = ms::SettlingLaw::pair_matrix;
    opt.max_iter = 40;
    try {
        ms::picard_solve_F(ms::zero_flow(), F0, {0, 0, -1}, 3.0, opt);
        FAIL("expected non_convergence_error");
    } catch (const non_convergence_error& e) {
        CHECK(!e.ratios.empty());
    }
}

TEST_CASE("kinetic ensemble stays close to the correlated field") {
    // same initial data run through both descriptions; orientations of the
    // kinetic particles should track F pulled back to particle positions
    auto fn = [](Vec3 p) { return Vec3{0.2 * p.x, -0.1 * p.y, 1.9 + 0.15 * p.z}; };
    sp::DensitySpec d;
    d.kind = sp::DensityKind::bump;
    d.radius = 1.0;
    auto xs = sp::sample_positions(d, 200, 993);
    std::vector<Vec3> xis(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xis[i] = fn(xs[i]);
    double r0 = 0.25;
    Vec3 kg{0, 0, -1};
    ms::BlobSpec blob{0.15};
    auto kinetic = ms::make_ensemble(xs, xis, r0, kg);
    auto rho = kinetic;
    FField F = FField::make({17, 17, 17}, {-4, -4, -4}, {0.5, 0.5, 0.5});
    F.assign(fn);
    ms::CorrelatedOptions opt;
    opt.law = ms::SettlingLaw::pair_matrix;
    opt.boundary = ms::BoundaryPolicy::clamp;
    opt.splitting = ms::SplittingOrder::midpoint;
    double dt = 0.05;
    for (int s = 0; s < 8; ++s) {
        ms::step_meso_kinetic(kinetic, dt, blob, Stepper::rk4);
        ms::step_meso_correlated(rho, F, dt, blob, opt);
    }
    double worst = 0;
    for (const auto& p : kinetic.parts)
        worst = std::max(worst, norm(p.xi - F.sample(p.x)));
    CHECK(worst < 0.02);
}
