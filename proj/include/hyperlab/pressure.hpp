#pragma once

#include <vector>

#include "hyperlab/orbits.hpp"

namespace hyperlab {

struct OrbitSample {
    double length = 0;
    double lambda = 0;  // unstable exponent over one period
};

struct PressureSample {
    double q = 0;
    double beta = 0;
    double stderr_ = 0;
    double literal = 0;              // (1/T) log of the raw window sum
    std::vector<double> replicates;  // leave-one-sub-window-out estimates
};

struct PressureCurve {
    std::vector<PressureSample> samples;
    double T = 0;
    int orbit_count = 0;  // orbits in [T, T+1]
    double delta0 = 0, delta0_stderr = 0;
    double gamma0 = 0;
    const PressureSample& at(double q) const;
};

// Window estimate of q -> Pr(-q psi_u) from primitive orbits with lengths in
// [T, T+1]. The weighted window sum of l e^{-q Lambda} is matched against
// the integral of e^{beta t} over the window, which is the prime orbit
// asymptotic with the 1/t density factor removed; the jackknife runs over
// `subwindows` equal parts of the window.
PressureCurve pressure_curve(const std::vector<OrbitSample>& orbits, const std::vector<double>& qs, double T,
                             int subwindows = 10);

struct AppendixAReport {
    double convexity_margin = 0;  // smallest second difference
    double convexity_stderr = 0;
    struct Margin {
        double q, value, stderr_;
    };
    std::vector<Margin> margins;      // beta(q) + (q-1) gamma0 for q > 1
    std::vector<Margin> derivatives;  // forward differences of beta vs -gamma0
};
AppendixAReport appendix_a_report(const PressureCurve& curve);

double jackknife_stderr(const std::vector<double>& replicates);

}  // namespace hyperlab
