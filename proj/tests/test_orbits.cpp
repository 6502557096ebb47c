// Orbits: conjugacy classes, closed geodesics, Poincare maps, pressure.
#include <catch_amalgamated.hpp>

#include <map>
#include <set>

#include "hyperlab/pressure.hpp"

using namespace hyperlab;
using Catch::Approx;

namespace {

const FuchsianGroup& bolza() {
    static FuchsianGroup G = FuchsianGroup::bolza();
    return G;
}

const std::vector<ClassRecord>& classes_to(double L) {
    static std::map<double, std::vector<ClassRecord>> cache;
    auto it = cache.find(L);
    if (it == cache.end()) it = cache.emplace(L, enumerate_closed_geodesics(bolza(), L)).first;
    return it->second;
}

// logarithmic integral by adaptive Simpson on [2, x] plus li(2)
double li(double x) {
    const int n = 200000;
    double a = 2.0, h = (x - a) / n, s = 0;
    for (int i = 0; i <= n; ++i) {
        double t = a + i * h, w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        s += w / std::log(t);
    }
    return 1.045163780117492784 + s * h / 3;
}

const double kSystole = 2.0 * std::acosh(1.0 + std::sqrt(2.0));

}  // namespace

TEST_CASE("word utilities", "[words]") {
    CHECK(canonical_rotation({2, 1, -1}) == Word{1, -1, 2});
    CHECK(canonical_rotation({-1, 1}) == Word{1, -1});
    CHECK(canonical_rotation({-2, 3, 1}) == Word{1, -2, 3});
    CHECK(is_cyclically_reduced({1, 2, -3}));
    CHECK_FALSE(is_cyclically_reduced({1, -1, 2}));
    CHECK_FALSE(is_cyclically_reduced({1, 2, -1}));
    CHECK(is_proper_power({1, 2, 1, 2}));
    CHECK(is_proper_power({3, 3, 3}));
    CHECK_FALSE(is_proper_power({1, 2, 1}));
}

TEST_CASE("class enumeration by word length", "[words]") {
    CHECK(enumerate_classes(bolza(), 0).empty());
    auto one = enumerate_classes(bolza(), 1);
    REQUIRE(one.size() == 8);
    int pairs = 0;
    for (std::size_t i = 0; i < one.size(); ++i) {
        REQUIRE(one[i].inverse >= 0);
        CHECK(one[one[i].inverse].inverse == static_cast<int>(i));
        CHECK(one[i].word.size() == 1);
        if (one[i].inverse > static_cast<int>(i)) ++pairs;
    }
    CHECK(pairs == 4);

    auto three = enumerate_classes(bolza(), 3);
    std::set<Word> seen;
    for (const auto& w : three) {
        CHECK(is_cyclically_reduced(w.word));
        CHECK_FALSE(is_proper_power(w.word));
        CHECK(canonical_rotation(w.word) == w.word);
        CHECK(seen.insert(w.word).second);
    }
    CHECK_THROWS_AS(enumerate_classes(bolza(), 4, 100), Overflow);
}

TEST_CASE("axis segments and cutting sequences", "[cutting]") {
    const auto& G = bolza();
    const double inradius = std::acosh(1.0 / std::tan(kPi / 8));
    for (int l : G.letters()) {
        auto seg = axis_segment_in_domain(G, G.letter(l));
        CHECK(seg.lo == Approx(-inradius).margin(1e-10));
        CHECK(seg.hi == Approx(inradius).margin(1e-10));
        auto cs = cutting_sequence(G, G.letter(l));
        CHECK(cs.word == Word{l});
        CHECK(cs.power == 1);
        CHECK(cs.primitive_length == Approx(kSystole).epsilon(1e-12));
    }
    // a square is recognised as a power of its root
    Mobius h = G.word_matrix({1, 2});
    auto cs2 = cutting_sequence(G, (h * h).normalized());
    CHECK(cs2.power == 2);
    CHECK(cs2.primitive_length == Approx(h.translation_length()).epsilon(1e-10));

    // the product of the cutting word commutes with the first conjugate
    Mobius g = G.word_matrix({1, 3, -2, 4, -1});
    auto red = G.reduce(axis_frame(g).foot);
    Mobius c = (red.g.inverse() * g * red.g).normalized();
    auto cs = cutting_sequence(G, c);
    Mobius root = G.word_matrix(cs.word);
    Mobius k = cs.conjugates.front();
    Mobius comm = root * k * root.inverse() * k.inverse();
    CHECK(std::abs(std::abs(comm.trace()) - 2.0) < 1e-8);
    CHECK(root.translation_length() == Approx(cs.primitive_length).epsilon(1e-10));
}

TEST_CASE("closed geodesic enumeration", "[enumerate]") {
    const auto& cls = classes_to(10.0);
    int systoles = 0;
    for (const auto& c : cls)
        if (c.length < kSystole + 1e-9) ++systoles;
    CHECK(systoles == 24);
    CHECK(cls.front().length == Approx(kSystole).epsilon(1e-13));
    std::set<Word> words;
    for (std::size_t i = 0; i < cls.size(); ++i) {
        const auto& c = cls[i];
        REQUIRE(c.inverse >= 0);
        CHECK(cls[c.inverse].inverse == static_cast<int>(i));
        CHECK(cls[c.inverse].length == Approx(c.length).epsilon(1e-12));
        CHECK(bolza().word_matrix(c.word).translation_length() == Approx(c.length).epsilon(1e-10));
        CHECK(words.insert(c.word).second);
        if (i) CHECK(c.length >= cls[i - 1].length - 1e-12);
    }
    // prime geodesic theorem: counts track li(e^L), loosely at small L where
    // the Bolza length spectrum is highly degenerate
    for (double L : {8.0, 9.0, 10.0}) {
        double n = 0;
        for (const auto& c : cls) n += c.length <= L;
        CHECK(n / li(std::exp(L)) == Approx(1.0).margin(L < 10 ? 0.15 : 0.05));
    }
}

TEST_CASE("constant curvature closure and Poincare data", "[closure]") {
    const auto& G = bolza();
    auto flat = SurfaceModel::perturbed(G, 0.0);
    auto geo = close_geodesic(flat, {1});
    CHECK(geo.length == Approx(3.0571418389619964).epsilon(1e-12));
    CHECK(geo.unstable_exponent == Approx(geo.length).epsilon(1e-12));

    for (const auto& c : classes_to(7.0)) {
        auto g = close_geodesic(flat, c.word);
        CHECK(g.closure_residual <= 1e-9);
        CHECK(std::abs(g.unstable_exponent - g.length) <= 1e-6);
        auto pd = poincare_data(flat, g);
        double expect = 4.0 * std::pow(std::sinh(c.length / 2), 2);
        CHECK(std::abs(pd.det_term / expect - 1.0) <= 1e-6);
        CHECK(std::abs(pd.lambda - c.length) <= 1e-6);
        CHECK(std::abs(pd.det - 1.0) <= 1e-8);
    }

    // Mobius model with curvature -4: lengths halve, exponents do not change
    auto k2 = SurfaceModel::constant(2.0);
    auto g2 = close_geodesic(k2, {1, 2}, {}, &G);
    CHECK(g2.length == Approx(G.word_matrix({1, 2}).translation_length() / 2).epsilon(1e-12));
    auto pd2 = poincare_data(k2, g2);
    CHECK(pd2.lambda == Approx(2.0 * g2.length).epsilon(1e-8));
    CHECK_THROWS_AS(close_geodesic(k2, {1}), InvalidModel);
    CHECK_THROWS_AS(close_geodesic(flat, {1, -1}), NoClosure);
    CHECK_THROWS_AS(close_geodesic(flat, {}), NoClosure);
}

TEST_CASE("perturbed closure and Poincare data", "[closure]") {
    const auto& G = bolza();
    auto model = SurfaceModel::perturbed(G, 0.05);
    for (const auto& c : classes_to(5.9)) {
        auto g = close_geodesic(model, c.word);
        CHECK(g.closure_residual <= 1e-9);
        auto pd = poincare_data(model, g);
        CHECK(std::abs(pd.det - 1.0) <= 1e-8);
        CHECK(pd.lambda > 0);
        // Riccati exponent against the spectral radius of P
        CHECK(std::abs(pd.lambda - g.unstable_exponent) <= 1e-6 * g.length);
        double eu = std::exp(pd.lambda);
        CHECK(std::abs(pd.det_term / ((eu - 1) * (1 - 1 / eu)) - 1.0) <= 1e-6);
        CHECK(4 * std::pow(std::sinh(pd.lambda / 2), 2) <= pd.det_term * (1 + 1e-6));
        CHECK(pd.lambda / g.length >= model.kappa_min() - 1e-6);
        CHECK(pd.lambda / g.length <= model.kappa_max() + 1e-6);
    }
    ClosedGeodesic open;
    open.closure_residual = 1e-3;
    CHECK_THROWS_AS(poincare_data(model, open), NoClosure);
}

TEST_CASE("length continuation in epsilon", "[closure]") {
    // first variation of length: the integral of the conformal factor log
    // along the unperturbed axis, computed here by direct quadrature
    const auto& G = bolza();
    const double r0 = 1.5, ell = kSystole;
    auto ball = elements_within_distance(G, ell / 2 + r0 + 2.0, 100000);
    auto bumpsum = [&](cplx z) {
        double s = 0;
        for (const auto& g : ball.elements) {
            double d = disk_distance(z, g.apply(0.0)) / r0;
            if (d < 1) s += std::exp(1.0 - 1.0 / (1.0 - d * d));
        }
        return s;
    };
    AxisFrame fr = axis_frame(G.letter(1));
    const int n = 4000;
    double first = 0;
    for (int i = 0; i < n; ++i) first += bumpsum(fr.at((i + 0.5) * ell / n).z) * ell / n;

    for (double eps : {0.005, 0.02}) {
        auto g = close_geodesic(SurfaceModel::perturbed(G, eps), {1});
        double slope = (g.length - ell) / eps;
        CHECK(slope == Approx(first).margin(3.0 * eps));
    }
    // regression bound frozen from the run at eps = 0.02
    auto g = close_geodesic(SurfaceModel::perturbed(G, 0.02), {1});
    CHECK(std::abs(g.length - ell) <= 1.9 * 0.02);
}

TEST_CASE("pressure curve in constant curvature", "[pressure]") {
    const auto& cls = classes_to(12.0);
    std::vector<OrbitSample> orbits;
    for (const auto& c : cls) orbits.push_back({c.length, c.length});
    const std::vector<double> qs{0, 0.5, 1, 1.5, 2};
    auto pc = pressure_curve(orbits, qs, 10.0);
    CHECK(pc.at(0).beta == Approx(1.0).margin(0.1));
    CHECK(pc.at(1).beta == Approx(0.0).margin(0.1));
    CHECK(pc.at(2).beta == Approx(-1.0).margin(0.15));
    CHECK(pc.delta0 == Approx(-0.5).margin(0.08));
    CHECK(pc.gamma0 == Approx(1.0).margin(1e-12));
    CHECK(std::abs(pc.at(1).beta) <= 3 * pc.at(1).stderr_ + 1e-3);
    for (std::size_t i = 1; i < pc.samples.size(); ++i) CHECK(pc.samples[i].beta < pc.samples[i - 1].beta);
    // beta(q) = 1 - q holds to within a few standard errors
    for (const auto& s : pc.samples) CHECK(std::abs(s.beta - (1 - s.q)) <= 3 * s.stderr_ + 0.01);
    // bracket -h/2 <= delta0 <= -gamma0/2
    CHECK(pc.delta0 >= -pc.at(0).beta / 2 - 0.05);
    CHECK(pc.delta0 <= -pc.gamma0 / 2 + 0.05);

    // window stability
    auto p8 = pressure_curve(orbits, qs, 8.0), p9 = pressure_curve(orbits, qs, 9.0);
    for (double q : qs) {
        double se = std::hypot(p8.at(q).stderr_, p9.at(q).stderr_);
        CHECK(std::abs(p8.at(q).beta - p9.at(q).beta) <= 3 * se + 1e-3);
    }

    auto rep = appendix_a_report(pc);
    CHECK(std::abs(rep.convexity_margin) <= 3 * rep.convexity_stderr + 1e-3);
    for (const auto& m : rep.margins) CHECK(std::abs(m.value) <= 3 * m.stderr_ + 0.01);
    CHECK_THROWS_AS(pressure_curve(orbits, qs, 40.0), EmptyWindow);
    CHECK_THROWS_AS(pc.at(7.0), OutOfDomain);
}

TEST_CASE("jackknife", "[pressure]") {
    // leave-one-out means of 1..5 give the usual standard error of the mean
    std::vector<double> x{1, 2, 3, 4, 5}, rep;
    for (int k = 0; k < 5; ++k) rep.push_back((15.0 - x[k]) / 4.0);
    CHECK(jackknife_stderr(rep) == Approx(std::sqrt(2.5 / 5)).epsilon(1e-12));
    CHECK(jackknife_stderr({1.0}) == 0.0);
}
