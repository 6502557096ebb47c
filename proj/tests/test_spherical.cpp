// Spherical means, norm estimators, annulus and Poincare growth, Gromov suite.
#include <catch_amalgamated.hpp>

#include <random>

#include "hyperlab/spherical.hpp"

using namespace hyperlab;
using Catch::Approx;

namespace {

const FuchsianGroup& bolza() {
    static FuchsianGroup G = FuchsianGroup::bolza();
    return G;
}

const SurfaceModel& perturbed() {
    static SurfaceModel M = SurfaceModel::perturbed(bolza(), 0.05);
    return M;
}

// phi_0(t) = (1/pi) int_0^pi (cosh t - sinh t cos a)^{-1/2} da by composite Simpson
double spherical_function(double t) {
    const int n = 400000;
    double h = kPi / n, s = 0;
    for (int i = 0; i <= n; ++i) {
        double a = i * h, w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        s += w / std::sqrt(std::cosh(t) - std::sinh(t) * std::cos(a));
    }
    return s * h / 3 / kPi;
}

cplx random_point(std::mt19937_64& rng, double max_radius) {
    std::uniform_real_distribution<double> U(0, 1);
    return std::polar(std::tanh(max_radius * U(rng) / 2), kTwoPi * U(rng));
}

}  // namespace

TEST_CASE("exact spherical mean norm", "[spherical]") {
    // frozen from the direct angular integral
    const std::vector<std::pair<double, double>> frozen{
        {1, 0.94086}, {2, 0.79565}, {4, 0.46410}, {6, 0.23411}, {8, 0.10945}};
    for (auto [t, v] : frozen) {
        CHECK(exact_norm_hyperbolic(2, t) == Approx(spherical_function(t)).epsilon(1e-8));
        CHECK(exact_norm_hyperbolic(2, t) == Approx(v).margin(5e-6));
    }
    for (double t : {0.5, 2.0, 7.0}) CHECK(exact_norm_hyperbolic(3, t) == Approx(t / std::sinh(t)).epsilon(1e-10));
    CHECK(exact_norm_hyperbolic(2, 0.0) == 1.0);
    CHECK_THROWS_AS(exact_norm_hyperbolic(1, 1.0), OutOfDomain);
    // decreasing in t
    double prev = 1.0;
    for (double t = 0.25; t <= 10; t += 0.25) {
        double v = exact_norm_hyperbolic(2, t);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("Jacobians", "[spherical]") {
    auto H = SurfaceModel::constant(1.0);
    auto H2 = SurfaceModel::constant(2.0);
    for (double t : {0.1, 1.0, 5.0, 10.0}) {
        CHECK(radial_jacobian(H, 0.3, 1.0, t) == Approx(std::sinh(t)).epsilon(1e-12));
        CHECK(radial_jacobian(H2, 0.3, 1.0, t) == Approx(std::sinh(2 * t) / 2).epsilon(1e-12));
    }
    CHECK(modified_jacobian(H, 0.0, 0.2) == 1.0);
    CHECK(modified_jacobian(H, 0.0, 0.9) == Approx(std::sinh(2 * std::atanh(0.9))));

    const auto& P = perturbed();
    // J(x, .) along a ray agrees with the spread of nearby endpoints
    cplx x(0.2, -0.1);
    double v = 0.7, t = 3.0, dv = 1e-6;
    double J = radial_jacobian(P, x, v, t);
    cplx a = geodesic_flow(P, PhasePoint{x, v - dv}, t).z, b = geodesic_flow(P, PhasePoint{x, v + dv}, t).z;
    CHECK(J == Approx(distance(P, a, b) / (2 * dv)).epsilon(1e-4));
    // symmetry
    std::mt19937_64 rng(11);
    for (int i = 0; i < 6; ++i) {
        cplx p = random_point(rng, 2.0), q = random_point(rng, 2.0);
        CHECK(jacobian(P, p, q) == Approx(jacobian(P, q, p)).epsilon(1e-5));
    }
}

TEST_CASE("spherical mean forms", "[spherical]") {
    auto H = SurfaceModel::constant(1.0);
    auto one = [](cplx) { return 1.0; };
    CHECK(apply_spherical_mean(H, one, 0.3, 2.0) == Approx(1.0));
    // radial observable about the centre
    auto radial = [](cplx z) { return std::cos(2 * std::atanh(std::abs(z))); };
    CHECK(apply_spherical_mean(H, radial, 0.0, 1.7) == Approx(std::cos(1.7)).margin(1e-12));
    CHECK(apply_spherical_mean(H, radial, 0.0, 0.0) == Approx(1.0));
    CHECK(apply_spherical_mean_surface(H, radial, 0.0, 1.7, 256) == Approx(std::cos(1.7)).margin(1e-4));

    const auto& P = perturbed();
    auto bumpy = [](cplx z) { return std::exp(-4 * std::norm(z - cplx(0.2, 0.1))); };
    double dir = apply_spherical_mean(P, bumpy, 0.1, 1.5, 256);
    double surf = apply_spherical_mean_surface(P, bumpy, 0.1, 1.5, 256);
    CHECK(dir == Approx(surf).margin(1e-4));
}

TEST_CASE("ball grid", "[spherical]") {
    auto H = SurfaceModel::constant(1.0);
    BallGrid grid(H, 3.0, 0.05);
    double vol = 0;
    for (double w : grid.weights()) vol += w;
    CHECK(vol == Approx(kTwoPi * (std::cosh(3.0) - 1)).epsilon(2e-3));

    BallGridFunction f{&grid, std::vector<double>(grid.size(), 1.0)};
    CHECK(f(cplx(0.3, 0.2)) == Approx(1.0));
    CHECK(f(0.0) == Approx(1.0));
    CHECK_THROWS_AS(f(cplx(0.99, 0.0)), OutOfDomain);
    CHECK(grid.stencil(cplx(0.99, 0)).count == 0);

    std::vector<double> vals;
    for (cplx z : grid.nodes()) vals.push_back(z.real());
    BallGridFunction g{&grid, vals};
    CHECK(g(cplx(0.31, -0.12)) == Approx(0.31).margin(5e-3));
    CHECK_THROWS_AS(BallGrid(H, -1.0, 0.1), OutOfDomain);
}

TEST_CASE("norm by power iteration", "[spherical][norm]") {
    auto H = SurfaceModel::constant(1.0);
    for (double t : {1.0, 2.0, 4.0, 6.0}) {
        auto e = sm_norm_power(H, t, 60.0);
        CHECK(e.norm == Approx(exact_norm_hyperbolic(2, t)).epsilon(0.03));
        CHECK(e.norm <= exact_norm_hyperbolic(2, t) * 1.02);
    }
    CHECK(sm_norm_power(H, 0.0, 10.0).norm == Approx(1.0));
    CHECK_THROWS_AS(sm_norm_power(H, 4.0, 5.0), OutOfDomain);

    // log-slope of norm / t over [4, 8]
    double a = sm_norm_power(H, 4.0, 100.0).norm, b = sm_norm_power(H, 8.0, 100.0).norm;
    CHECK((std::log(b / 8) - std::log(a / 4)) / 4 == Approx(-0.5).margin(0.05));

    // curvature -4: norm at t equals the kappa = 1 norm at 2t
    auto H2 = SurfaceModel::constant(2.0);
    CHECK(sm_norm_power(H2, 1.0, 30.0).norm == Approx(sm_norm_power(H, 2.0, 60.0).norm).epsilon(2e-3));

    GridSpec generic;
    generic.force_generic = true;
    generic.h = 0.1;
    generic.directions = 64;
    auto g = sm_norm_power(H, 1.0, 6.0, generic);
    auto r = sm_norm_power(H, 1.0, 6.0);
    CHECK(g.norm == Approx(r.norm).epsilon(2e-3));
}

TEST_CASE("annulus lower bound", "[spherical][norm]") {
    auto H = SurfaceModel::constant(1.0);
    // oracle: edge of the hitting cone found by bisection with the closed-form flow
    auto oracle = [&](double t) {
        const int nr = 2000;
        double num = 0;
        for (int i = 0; i < nr; ++i) {
            double r = t - 1 + 2.0 * (i + 0.5) / nr;
            cplx y = std::tanh(r / 2);
            auto hits = [&](double a) { return disk_distance(mobius_flow(1.0, {y, kPi + a}, t).z, 0.0) <= 1.0; };
            double lo = 0, hi = kPi;
            if (hits(hi)) lo = hi;
            for (int it = 0; it < 60 && lo < hi; ++it) {
                double mid = 0.5 * (lo + hi);
                (hits(mid) ? lo : hi) = mid;
            }
            num += 2 * lo * 2.0 / nr;
        }
        double f2 = 0;
        for (int i = 0; i < 20000; ++i) {
            double r = t - 1 + 2.0 * (i + 0.5) / 20000;
            f2 += kTwoPi / std::sinh(r) * 2.0 / 20000;
        }
        return num / std::sqrt(f2 * kTwoPi * (std::cosh(1.0) - 1));
    };
    std::vector<double> lows;
    for (double t : {4.0, 6.0, 8.0}) {
        auto est = sm_norm_lower(H, 0.0, t, 20000, 3);
        CHECK(std::abs(est.value - oracle(t)) <= 4 * est.stderr_ + 1e-3 * est.value);
        CHECK(est.value <= exact_norm_hyperbolic(2, t));
        lows.push_back(est.value);
    }
    CHECK(std::log(lows[2] / lows[0]) / 4 >= -0.55);
    CHECK_THROWS_AS(sm_norm_lower(H, 0.0, 0.5, 10, 1), OutOfDomain);
}

TEST_CASE("annulus pressure", "[spherical][pressure]") {
    auto H = SurfaceModel::constant(1.0);
    for (double q : {0.0, 1.0, 2.0}) {
        auto a = annulus_pressure(H, q, 12.0, 0.5, 4000, 7);
        CHECK(a.slope == Approx(1 - q).margin(0.03));
    }
    auto H2 = SurfaceModel::constant(2.0);
    CHECK(annulus_pressure(H2, 0.0, 6.0, 0.5, 4000, 7).slope == Approx(2.0).margin(0.05));
    CHECK(annulus_pressure(H2, 1.0, 6.0, 0.5, 4000, 7).slope == Approx(0.0).margin(1e-3));
    // the unstable Jacobian is the radial growth rate: q = 1 stays flat on the perturbed model
    auto p = annulus_pressure(perturbed(), 1.0, 5.0, 0.5, 100, 9);
    CHECK(std::abs(p.slope) < 0.02);
    CHECK_THROWS_AS(annulus_log_integral(H, 0, 0.2, 0.5, 10, 1), OutOfDomain);
}

TEST_CASE("Poincare series growth", "[spherical][pressure]") {
    auto H = SurfaceModel::constant(1.0);
    for (double q : {0.0, 1.0, 2.0}) {
        auto c = poincare_critical_exponent(H, bolza(), q, 6);
        CHECK(c.s == Approx(1 - q).margin(0.1));
        CHECK(c.shell_exponents.size() == 5);
    }
    // partial sums increase with L and blow up below the exponent
    double s4 = poincare_partial_sum(H, bolza(), 0.0, 0.5, 4), s5 = poincare_partial_sum(H, bolza(), 0.0, 0.5, 5);
    CHECK(s5 > 2 * s4);
    double c4 = poincare_partial_sum(H, bolza(), 0.0, 2.0, 4), c5 = poincare_partial_sum(H, bolza(), 0.0, 2.0, 5);
    CHECK(c5 < c4 * 1.05);
    CHECK_THROWS_AS(poincare_critical_exponent(H, bolza(), 0.0, 1), OutOfDomain);
}

TEST_CASE("thin triangles", "[gromov]") {
    auto H = SurfaceModel::constant(1.0);
    CHECK(gromov_delta(H, 0.0, cplx(0.5, 0), cplx(-0.3, 0)) <= 1e-6);
    CHECK(gromov_delta(H, cplx(0.1, 0.1), cplx(0.1, 0.1), cplx(0.4, -0.2)) <= 1e-6);
    std::mt19937_64 rng(5);
    double worst = 0;
    for (int i = 0; i < 200; ++i) {
        double d = gromov_delta(H, random_point(rng, 8), random_point(rng, 8), random_point(rng, 8));
        worst = std::max(worst, d);
        CHECK(d <= std::log(3.0) + 1e-9);
    }
    CHECK(worst > 0.5);
    // collinear on the perturbed model: points on one geodesic
    const auto& P = perturbed();
    PhasePoint p{cplx(0.1, 0.05), 0.4};
    cplx a = geodesic_flow(P, p, 0.5).z, b = geodesic_flow(P, p, 1.5).z;
    CHECK(gromov_delta(P, p.z, a, b) <= 1e-6);
}

TEST_CASE("geodesic divergence", "[gromov]") {
    auto H = SurfaceModel::constant(1.0);
    const double r = 8, eta = 0.01;
    auto d = geodesic_divergence(H, 0.0, 0.3, 0.3 + 0.9 * eta / std::sinh(r), r, eta);
    CHECK(d.rate == Approx(1.0).margin(0.1));
    CHECK(d.end_separation <= std::sqrt(2.0) * eta);  // Sasaki distance of the end points
    auto H2 = SurfaceModel::constant(2.0);
    auto d2 = geodesic_divergence(H2, 0.0, 0.3, 0.3 + 0.9 * eta * 2 / std::sinh(2 * 4.0), 4.0, eta);
    CHECK(d2.rate == Approx(2.0).margin(0.2));
    CHECK_THROWS_AS(geodesic_divergence(H, 0.0, 0.3, 0.5, r, eta), OutOfDomain);

    const auto& P = perturbed();
    double J = radial_jacobian(P, 0.0, 0.3, 6.0);
    auto dp = geodesic_divergence(P, 0.0, 0.3, 0.3 + 0.5 * eta / J, 6.0, eta);
    CHECK(dp.rate > 0.5);
}

TEST_CASE("correlation lower bound", "[spherical][correlation]") {
    auto H = SurfaceModel::constant(1.0);
    auto c4 = correlation_lower_bound(H, bolza(), 0.0, 4.0, 3000, 3);
    auto c8 = correlation_lower_bound(H, bolza(), 0.0, 8.0, 3000, 3);
    CHECK(c4.orbit_terms > 0);
    CHECK(c8.orbit_terms > c4.orbit_terms);
    CHECK(c4.value > 0);
    CHECK(std::log(c8.value / c4.value) / 4 >= -1.1);
    // Cauchy-Schwarz against the norm of the bump
    for (const auto* c : {&c4, &c8}) CHECK(c->value <= c->norm * 10);
}

TEST_CASE("swap identity", "[spherical]") {
    auto h = [](cplx x, cplx y) {
        return std::exp(-8 * std::norm(x - cplx(0.1, 0))) * std::exp(-6 * std::norm(y + cplx(0.05, 0.2))) *
               (1 + x.real());
    };
    auto H = SurfaceModel::constant(1.0);
    auto s = swap_integrals(H, h, 4.0, 1.0, 64, 64);
    CHECK(s.forward == Approx(s.backward).epsilon(1e-3));
    auto s2 = swap_integrals(perturbed(), h, 3.0, 0.8, 24, 24);
    CHECK(s2.forward == Approx(s2.backward).epsilon(1e-2));
}

TEST_CASE("temperness and split points", "[gromov]") {
    auto H = SurfaceModel::constant(1.0);
    double C = temperness_constant(H, 2000, 5);
    CHECK(C >= 1.0);
    CHECK(C < 2.0);
    double prev = 0;
    for (double t : {4.0, 8.0, 12.0}) {
        double d = split_point_distance(H, t, 2000, 5);
        CHECK(d < 3.0);
        prev = std::max(prev, d);
    }
    CHECK(prev > 0);
}
