// Geometry: groups, metrics, geodesic flow, Jacobi fields, Riccati, distances.
#include <catch_amalgamated.hpp>

#include <random>

#include "hyperlab/geodesic.hpp"

using namespace hyperlab;
using Catch::Approx;

namespace {

double phase_error(const PhasePoint& a, const PhasePoint& b) {
    return std::max(std::abs(a.z - b.z), std::abs(angle_diff(a.theta, b.theta)));
}

PhasePoint random_phase(std::mt19937_64& rng, double max_radius) {
    std::uniform_real_distribution<double> U(0, 1);
    double r = std::tanh(max_radius * std::sqrt(U(rng)) / 2);
    return {std::polar(r, kTwoPi * U(rng)), kTwoPi * U(rng)};
}

const FuchsianGroup& bolza() {
    static FuchsianGroup G = FuchsianGroup::bolza();
    return G;
}

const SurfaceModel& perturbed05() {
    static SurfaceModel M = SurfaceModel::perturbed(bolza(), 0.05);
    return M;
}

}  // namespace

TEST_CASE("Bolza group data", "[group]") {
    const auto& G = bolza();
    CHECK(G.genus() == 2);
    CHECK(G.rank() == 4);
    for (const auto& m : G.generators()) {
        CHECK(std::abs(m[0] * m[3] - m[1] * m[2] - 1.0) <= 1e-12);
        CHECK(std::abs(m[0] + m[3]) == Approx(2.0 * (1.0 + std::sqrt(2.0))).epsilon(1e-12));
    }
    // systole from the trace
    CHECK(G.letter(1).translation_length() == Approx(3.0571418389619964).epsilon(1e-12));
    // octagon circumradius: cosh R = (1 + sqrt 2)^2
    CHECK(G.domain_radius() == Approx(std::acosh(std::pow(1.0 + std::sqrt(2.0), 2))).epsilon(1e-9));
}

TEST_CASE("group file round trip and validation", "[group]") {
    auto G2 = FuchsianGroup::from_text(bolza().to_text());
    for (int l : G2.letters()) {
        auto a = G2.letter(l), b = bolza().letter(l);
        CHECK(std::abs(a.a - b.a) < 1e-12);
        CHECK(std::abs(a.b - b.b) < 1e-12);
    }
    CHECK_THROWS_AS(FuchsianGroup::from_text("genus 2\n1 0 0 1\n"), InvalidGroup);
    CHECK_THROWS_AS(FuchsianGroup::from_text("1 0 0 1\n"), InvalidGroup);
    // wrong relation
    std::string txt = bolza().to_text();
    txt = txt.substr(0, txt.find("relation")) + "relation 1 2 -1 -2 3 4 -3 -4\n";
    CHECK_THROWS_AS(FuchsianGroup::from_text(txt), InvalidGroup);
}

TEST_CASE("domain reduction", "[group]") {
    const auto& G = bolza();
    std::mt19937_64 rng(7);
    for (int i = 0; i < 500; ++i) {
        PhasePoint p = random_phase(rng, 12.0);
        auto red = G.reduce(p.z);
        CHECK(G.in_domain(red.z, 1e-9));
        CHECK(std::abs(red.g.apply(red.z) - p.z) < 1e-9);
        CHECK(disk_distance(red.z, 0.0) <= G.domain_radius() + 1e-9);
        auto gw = G.word_matrix(red.word);
        CHECK(std::abs(gw.apply(red.z) - p.z) < 1e-9);
    }
}

TEST_CASE("orbit point set deduplicates group elements", "[group]") {
    const auto& G = bolza();
    GroupBall ball = elements_within_word_length(G, 3, 1 << 20);
    // one-relator group with relator length 8: ball sizes 1, 9, 65, 457
    CHECK(ball.elements.size() == 457);
    GroupBall dist = elements_within_distance(G, 6.0, 1 << 20);
    // every element is within the radius and words reproduce the matrices
    for (std::size_t i = 0; i < dist.elements.size(); i += 37) {
        CHECK(disk_distance(0.0, dist.elements[i].apply(0.0)) <= 6.0 + 1e-9);
        auto m = G.word_matrix(dist.word_of(static_cast<int>(i)));
        CHECK(std::abs(m.apply(0.0) - dist.elements[i].apply(0.0)) < 1e-9);
    }
    // orbit counting: #{d <= r} ~ (cosh r - 1) / 2 for area 4 pi
    double expected = (std::cosh(6.0) - 1.0) / 2.0;
    CHECK(dist.elements.size() == Approx(expected).epsilon(0.1));
}

TEST_CASE("curvature", "[model]") {
    auto flat = SurfaceModel::perturbed(bolza(), 0.0);
    CHECK(flat.curvature_at(0.3) == -1.0);
    CHECK(SurfaceModel::constant(2.0).curvature_at(0.1) == -4.0);
    const auto& M = perturbed05();
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        PhasePoint p = random_phase(rng, 3.0);
        double K = M.curvature_at(p.z);
        CHECK(K >= -1.5);
        CHECK(K <= -0.5);
        const Mobius& g = bolza().letter(1 + i % 4);
        CHECK(M.curvature_at(g.apply(p.z)) == Approx(K).margin(1e-10));
    }
    // centre of the bump: K = e^{-2 eps}(-1 + 4 eps / r0^2), default r0 = 1.5
    CHECK(M.curvature_at(0.0) == Approx(std::exp(-0.1) * (-1.0 + 0.2 / 2.25)).epsilon(1e-12));
    CHECK_THROWS_AS(M.curvature_at(1.0), PointOutsideDisk);
}

TEST_CASE("curvature matches a finite-difference Laplacian", "[model]") {
    const auto& M = perturbed05();
    const double h = 1e-4;
    for (cplx z : {cplx(0.1, 0.05), cplx(-0.2, 0.3), cplx(0.35, -0.1)}) {
        auto sigma = [&](cplx w) { return M.local(w).sigma; };
        double lap = (sigma(z + h) + sigma(z - h) + sigma(z + cplx(0, h)) + sigma(z - cplx(0, h)) - 4 * sigma(z)) / (h * h);
        double K = -std::exp(-2 * sigma(z)) * lap;
        CHECK(M.local(z).K == Approx(K).epsilon(1e-5));
        double sx = (sigma(z + h) - sigma(z - h)) / (2 * h);
        CHECK(M.local(z).sx == Approx(sx).epsilon(1e-6));
    }
}

TEST_CASE("geodesic flow closed form", "[flow]") {
    auto H = SurfaceModel::constant(1.0);
    PhasePoint p{0.0, 0.0};
    PhasePoint q = geodesic_flow(H, p, 1.0);
    CHECK(q.z.real() == Approx(0.462117157260010).epsilon(1e-12));
    CHECK(std::abs(q.z.imag()) < 1e-15);
    CHECK(std::abs(angle_diff(q.theta, 0.0)) < 1e-15);
    PhasePoint r = geodesic_flow(H, PhasePoint{0.3, 1.0}, 0.0);
    CHECK(std::abs(r.z - cplx(0.3)) < 1e-15);
}

TEST_CASE("integrator matches Mobius flow", "[flow]") {
    auto H = SurfaceModel::constant(1.0);
    auto H2 = SurfaceModel::constant(2.0);
    std::mt19937_64 rng(11);
    double worst = 0;
    for (int i = 0; i < 40; ++i) {
        PhasePoint p = random_phase(rng, 4.0);
        double t = 10.0 * std::uniform_real_distribution<double>(-1, 1)(rng);
        worst = std::max(worst, phase_error(integrate_geodesic(H, p, t, 1e-10), mobius_flow(1.0, p, t)));
        worst = std::max(worst, phase_error(integrate_geodesic(H2, p, t / 2, 1e-10), mobius_flow(2.0, p, t / 2)));
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("flow group law and equivariance", "[flow]") {
    const auto& M = perturbed05();
    std::mt19937_64 rng(5);
    const double tol = 1e-10;
    for (int i = 0; i < 6; ++i) {
        PhasePoint p = random_phase(rng, 2.0);
        double s = 3.0 * (i + 1) / 6.0, t = -4.0 + i;
        PhasePoint a = integrate_geodesic(M, p, s + t, tol);
        PhasePoint b = integrate_geodesic(M, integrate_geodesic(M, p, s, tol), t, tol);
        CHECK(phase_error(a, b) <= 10 * tol);
        const Mobius g = bolza().word_matrix({1, 2});
        PhasePoint c = integrate_geodesic(M, deck_transform(g, p), t, tol);
        PhasePoint d = deck_transform(g, integrate_geodesic(M, p, t, tol));
        CHECK(phase_error(c, d) <= 10 * tol);
    }
}

TEST_CASE("closed geodesic of a generator", "[flow]") {
    auto M = SurfaceModel::perturbed(bolza(), 0.0);
    const Mobius& A = bolza().letter(1);
    auto ends = axis_endpoints(A);
    auto [foot, theta] = geodesic_foot_from_origin(ends[0], ends[1]);
    PhasePoint p{foot, theta};
    double len = A.translation_length();
    PhasePoint q = integrate_geodesic(M, p, len, 1e-10);
    CHECK(phase_error(q, deck_transform(A, p)) <= 1e-8);
}

TEST_CASE("Jacobi transport", "[jacobi]") {
    auto H = SurfaceModel::constant(1.0);
    PhasePoint p{cplx(0.2, -0.1), 0.7};
    for (double t : {0.5, 2.0, 5.0}) {
        auto J = jacobi_transport(H, p, t, {0.0, 1.0});
        CHECK(J.j == Approx(std::sinh(t)).epsilon(1e-9));
        CHECK(J.dj == Approx(std::cosh(t)).epsilon(1e-9));
        auto S = jacobi_transport(H, p, t, {1.0, -1.0});
        CHECK(S.j == Approx(std::exp(-t)).epsilon(1e-6));
    }
    // comparison bounds for the perturbed metric
    const auto& M = perturbed05();
    auto J = jacobi_transport(M, p, 5.0, {0.0, 1.0});
    double kmin = M.kappa_min(), kmax = M.kappa_max();
    CHECK(J.j >= std::sinh(kmin * 5.0) / kmin);
    CHECK(J.j <= std::sinh(kmax * 5.0) / kmax);
}

TEST_CASE("Jacobi Wronskian is conserved", "[jacobi]") {
    const auto& M = perturbed05();
    FlowRequest req;
    req.jacobi = true;
    req.jac1 = {1.0, 0.3};
    req.jac2 = {-0.2, 1.0};
    double w0 = req.jac1.j * req.jac2.dj - req.jac2.j * req.jac1.dj;
    auto r = integrate_flow(M, to_chart(M, PhasePoint{0.1, 2.0}), 10.0, req);
    double w1 = r.jac1.j * r.jac2.dj - r.jac2.j * r.jac1.dj;
    // relative to the size of the products that cancel
    double scale = std::abs(r.jac1.j * r.jac2.dj) + std::abs(r.jac2.j * r.jac1.dj);
    CHECK(std::abs(w1 - w0) <= 1e-8 * scale);
}

TEST_CASE("unstable Riccati", "[riccati]") {
    CHECK(unstable_riccati(SurfaceModel::constant(1.0), PhasePoint{0.1, 0.0}, 10.0) == 1.0);
    CHECK(unstable_riccati(SurfaceModel::constant(2.0), PhasePoint{0.1, 0.0}, 10.0) == 2.0);
    auto flat = SurfaceModel::perturbed(bolza(), 0.0);
    CHECK(unstable_riccati(flat, PhasePoint{0.3, 1.0}, 10.0) == Approx(1.0).epsilon(1e-9));
    const auto& M = perturbed05();
    std::mt19937_64 rng(9);
    for (int i = 0; i < 5; ++i) {
        PhasePoint p = random_phase(rng, 2.5);
        double u = unstable_riccati(M, p, 12.0);
        CHECK(u >= M.kappa_min());
        CHECK(u <= M.kappa_max());
        // longer burn-in agrees
        CHECK(unstable_riccati(M, p, 16.0) == Approx(u).epsilon(1e-8));
    }
}

TEST_CASE("connect", "[connect]") {
    auto H = SurfaceModel::constant(1.0);
    auto c = connect(H, 0.0, 0.5);
    CHECK(c.distance == Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(std::abs(angle_diff(c.direction, 0.0)) < 1e-12);
    CHECK(connect(H, 0.3, 0.3).distance == 0.0);
    const auto& M = perturbed05();
    std::mt19937_64 rng(21);
    for (int i = 0; i < 8; ++i) {
        PhasePoint x = random_phase(rng, 4.0), y = random_phase(rng, 4.0);
        auto xy = connect(M, x.z, y.z), yx = connect(M, y.z, x.z);
        CHECK(xy.residual <= 1e-8);
        CHECK(xy.distance == Approx(yx.distance).margin(1e-8));
        PhasePoint e = integrate_geodesic(M, PhasePoint{x.z, xy.direction}, xy.distance);
        CHECK(std::abs(e.z - y.z) <= 1e-8);
        // deck isometry
        const Mobius g = bolza().word_matrix({2, -3});
        CHECK(connect(M, g.apply(x.z), g.apply(y.z)).distance == Approx(xy.distance).margin(1e-8));
    }
}

TEST_CASE("deck transform is a group action", "[deck]") {
    const auto& G = bolza();
    PhasePoint p{cplx(0.1, 0.2), 1.0};
    auto id = deck_transform(Mobius::identity(), p);
    CHECK(phase_error(id, p) == 0.0);
    Mobius g1 = G.letter(1), g2 = G.letter(-3);
    CHECK(phase_error(deck_transform(g1 * g2, p), deck_transform(g1, deck_transform(g2, p))) < 1e-12);
}
