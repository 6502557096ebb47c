#include "hyperlab/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/tools/roots.hpp>

namespace hyperlab {

namespace {

// (e^{b w} - 1) / b, continuous at b = 0
double expm1_ratio(double b, double w) { return std::abs(b) < 1e-12 ? w : std::expm1(b * w) / b; }

// solves sum_k e^{beta a_k} expm1_ratio(beta, w) = target for the given sub-window starts
double invert_window(const std::vector<double>& starts, double w, double target) {
    auto f = [&](double b) {
        double s = 0;
        for (double a : starts) s += std::exp(b * (a - starts.front())) * expm1_ratio(b, w);
        return std::log(s) + b * starts.front() - std::log(target);
    };
    double lo = -20.0, hi = 20.0;
    boost::uintmax_t it = 200;
    auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), it);
    return 0.5 * (r.first + r.second);
}

}  // namespace

double jackknife_stderr(const std::vector<double>& rep) {
    const double n = static_cast<double>(rep.size());
    if (n < 2) return 0.0;
    double mean = std::accumulate(rep.begin(), rep.end(), 0.0) / n;
    double ss = 0;
    for (double r : rep) ss += (r - mean) * (r - mean);
    return std::sqrt((n - 1) / n * ss);
}

const PressureSample& PressureCurve::at(double q) const {
    for (const auto& s : samples)
        if (std::abs(s.q - q) < 1e-12) return s;
    throw OutOfDomain("q not sampled in the pressure curve");
}

PressureCurve pressure_curve(const std::vector<OrbitSample>& orbits, const std::vector<double>& qs, double T,
                             int subwindows) {
    if (orbits.empty()) throw EmptyWindow("no orbits supplied");
    const double w = 1.0 / subwindows;
    std::vector<std::vector<const OrbitSample*>> bins(subwindows);
    for (const auto& o : orbits) {
        if (o.length < T || o.length >= T + 1.0) continue;
        int k = std::min(subwindows - 1, static_cast<int>((o.length - T) / w));
        bins[k].push_back(&o);
    }
    PressureCurve pc;
    pc.T = T;
    for (const auto& b : bins) pc.orbit_count += static_cast<int>(b.size());
    if (pc.orbit_count == 0) throw EmptyWindow("no orbit length in [T, T+1]");
    pc.gamma0 = 1e300;
    for (const auto& o : orbits) pc.gamma0 = std::min(pc.gamma0, o.lambda / o.length);

    std::vector<double> starts(subwindows);
    for (int k = 0; k < subwindows; ++k) starts[k] = T + k * w;
    for (double q : qs) {
        std::vector<double> part(subwindows, 0.0), raw(subwindows, 0.0);
        for (int k = 0; k < subwindows; ++k)
            for (const auto* o : bins[k]) {
                part[k] += o->length * std::exp(-q * o->lambda);
                raw[k] += std::exp(-q * o->lambda);
            }
        auto solve = [&](int skip) {
            std::vector<double> st;
            double target = 0;
            for (int k = 0; k < subwindows; ++k)
                if (k != skip) {
                    st.push_back(starts[k]);
                    target += part[k];
                }
            if (!(target > 0)) throw EmptyWindow("empty jackknife window");
            return invert_window(st, w, target);
        };
        PressureSample s;
        s.q = q;
        s.beta = solve(-1);
        for (int k = 0; k < subwindows; ++k)
            if (!bins[k].empty() && bins[k].size() < static_cast<std::size_t>(pc.orbit_count)) s.replicates.push_back(solve(k));
        s.stderr_ = jackknife_stderr(s.replicates);
        double rawsum = std::accumulate(raw.begin(), raw.end(), 0.0);
        s.literal = std::log(rawsum) / T;
        pc.samples.push_back(std::move(s));
    }
    auto it = std::find_if(pc.samples.begin(), pc.samples.end(), [](const auto& s) { return std::abs(s.q - 2) < 1e-12; });
    if (it != pc.samples.end()) {
        pc.delta0 = it->beta / 2;
        pc.delta0_stderr = it->stderr_ / 2;
    }
    return pc;
}

AppendixAReport appendix_a_report(const PressureCurve& curve) {
    AppendixAReport rep;
    auto s = curve.samples;
    std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.q < b.q; });
    rep.convexity_margin = 1e300;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        double h1 = s[i].q - s[i - 1].q, h2 = s[i + 1].q - s[i].q;
        auto second = [&](double bm, double b0, double bp) {
            return 2.0 * (h1 * bp - (h1 + h2) * b0 + h2 * bm) / (h1 * h2 * (h1 + h2)) * h1 * h2;
        };
        double v = second(s[i - 1].beta, s[i].beta, s[i + 1].beta);
        std::vector<double> reps;
        for (std::size_t k = 0; k < s[i].replicates.size(); ++k)
            reps.push_back(second(s[i - 1].replicates[k], s[i].replicates[k], s[i + 1].replicates[k]));
        double se = jackknife_stderr(reps);
        if (v - 3 * se < rep.convexity_margin - 3 * rep.convexity_stderr || i == 1) {
            rep.convexity_margin = v;
            rep.convexity_stderr = se;
        }
    }
    for (const auto& x : s) {
        if (x.q <= 1.0) continue;
        rep.margins.push_back({x.q, x.beta + (x.q - 1) * curve.gamma0, x.stderr_});
    }
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        double h = s[i + 1].q - s[i].q;
        std::vector<double> reps;
        for (std::size_t k = 0; k < s[i].replicates.size(); ++k)
            reps.push_back((s[i + 1].replicates[k] - s[i].replicates[k]) / h + curve.gamma0);
        rep.derivatives.push_back({0.5 * (s[i].q + s[i + 1].q), (s[i + 1].beta - s[i].beta) / h + curve.gamma0,
                                   jackknife_stderr(reps)});
    }
    return rep;
}

}  // namespace hyperlab
