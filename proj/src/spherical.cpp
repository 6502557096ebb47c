#include "hyperlab/spherical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Sparse>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

namespace hyperlab {

namespace {

// hyperbolic-distance scale of the model: model distance = hyperbolic / scale
double distance_scale(const SurfaceModel& m) { return m.is_perturbed() ? 1.0 : m.kappa(); }

// radius in the disk of the point at model distance rho from the origin
double disk_radius(const SurfaceModel& m, double rho) { return std::tanh(distance_scale(m) * rho / 2); }

double model_radius(const SurfaceModel& m, cplx z) {
    return 2.0 * std::atanh(std::min(std::abs(z), 1.0 - 1e-16)) / distance_scale(m);
}

// volume density of the model relative to hyperbolic polar coordinates
// (model radius rho, angle): e^{2 phi} sinh(s rho) / s
double polar_density(const SurfaceModel& m, cplx z, double rho) {
    const double s = distance_scale(m);
    double base = std::sinh(s * rho) / s;
    if (m.is_perturbed() && m.epsilon() != 0.0) base *= std::exp(2.0 * m.phi_at(z));
    return base;
}

// endpoint and Jacobi field j (with j(0) = 0, j'(0) = 1) after time t
std::pair<PhasePoint, double> flow_with_jacobian(const SurfaceModel& model, const PhasePoint& p, double t,
                                                 double tol) {
    if (model.is_constant_curvature()) {
        const double k = model.kappa();
        return {mobius_flow(k, p, t), std::sinh(k * t) / k};
    }
    FlowRequest req;
    req.tol = tol;
    req.jacobi = true;
    req.jac1 = {0.0, 1.0};
    FlowResult fr = integrate_flow(model, to_chart(model, p), t, req);
    return {fr.point.absolute(), fr.jac1.j};
}

// length of the short chord between nearby points in the model metric
double metric_chord(const SurfaceModel& model, cplx a, cplx b) {
    if (model.is_constant_curvature()) return disk_distance(a, b) / model.kappa();
    ChartPoint ca = to_chart(model, PhasePoint{a, 0.0});
    Mobius inv = ca.chart.inverse();
    cplx la = ca.local.z, lb = inv.apply(b);
    auto L = model.local(0.5 * (la + lb));
    return std::exp(L.sigma) * std::abs(lb - la);
}

double bump(double s) { return Bump::value(s); }

struct Running {
    double n = 0, mean = 0, m2 = 0;
    void add(double x) {
        n += 1;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double sem() const { return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0; }
};

}  // namespace

// ---------------------------------------------------------------------------
// Jacobians

double radial_jacobian(const SurfaceModel& model, cplx x, double v, double t, double tol) {
    if (t < 0) throw OutOfDomain("radial_jacobian needs t >= 0");
    if (model.is_constant_curvature()) return std::sinh(model.kappa() * t) / model.kappa();
    return jacobi_transport(model, PhasePoint{x, v}, t, JacobiState{0.0, 1.0}, tol).j;
}

double jacobian(const SurfaceModel& model, cplx x, cplx y, double tol) {
    if (model.is_constant_curvature()) return std::sinh(model.kappa() * distance(model, x, y)) / model.kappa();
    Connection c = connect(model, x, y, tol);
    return radial_jacobian(model, x, c.direction, c.distance, tol);
}

double modified_jacobian(const SurfaceModel& model, cplx x, cplx y, double tol) {
    if (distance(model, x, y) <= 1.0) return 1.0;
    return jacobian(model, x, y, tol);
}

SphereQuadrature sphere_quadrature(const SurfaceModel& model, cplx x, double t, int n, double tol) {
    SphereQuadrature q;
    q.center = x;
    q.radius = t;
    for (int k = 0; k < n; ++k) {
        double th = kTwoPi * k / n;
        auto [end, j] = flow_with_jacobian(model, PhasePoint{x, th}, t, tol);
        q.directions.push_back(th);
        q.endpoints.push_back(end.z);
        q.jacobians.push_back(j);
    }
    return q;
}

// ---------------------------------------------------------------------------
// Ball grid

BallGrid::BallGrid(const SurfaceModel& model, double R, double h) : R_(R), h_(h) {
    if (!(R > 0) || !(h > 0)) throw OutOfDomain("ball grid needs R > 0 and h > 0");
    const int nr = std::max(1, static_cast<int>(std::ceil(R / h)));
    hr_ = R / nr;
    const double s = distance_scale(model);
    for (int i = 0; i < nr; ++i) {
        double rho = (i + 0.5) * hr_;
        int m = std::max(8, static_cast<int>(std::ceil(kTwoPi * std::sinh(s * rho) / s / h)));
        ring_start_.push_back(static_cast<int>(nodes_.size()));
        ring_size_.push_back(m);
        ring_radius_.push_back(rho);
        double rd = disk_radius(model, rho);
        for (int k = 0; k < m; ++k) {
            cplx z = std::polar(rd, kTwoPi * k / m);
            nodes_.push_back(z);
            weights_.push_back(polar_density(model, z, rho) * hr_ * kTwoPi / m);
        }
    }
    scale_ = s;
}

bool BallGrid::contains(cplx z) const { return 2.0 * std::atanh(std::min(std::abs(z), 1.0 - 1e-16)) / scale_ <= R_; }

BallGrid::Stencil BallGrid::stencil(cplx z) const {
    Stencil st;
    const double rho = 2.0 * std::atanh(std::min(std::abs(z), 1.0 - 1e-16)) / scale_;
    if (rho > R_) return st;
    const double alpha = wrap_angle(std::arg(z));
    const int nr = static_cast<int>(ring_size_.size());
    auto add_ring = [&](int i, double wr) {
        if (wr == 0.0) return;
        int m = ring_size_[i];
        double pos = alpha * m / kTwoPi;
        int k = static_cast<int>(std::floor(pos));
        double f = pos - k;
        k %= m;
        st.idx[st.count] = ring_start_[i] + k;
        st.w[st.count++] = wr * (1 - f);
        st.idx[st.count] = ring_start_[i] + (k + 1) % m;
        st.w[st.count++] = wr * f;
    };
    double p = rho / hr_ - 0.5;
    int i = static_cast<int>(std::floor(p));
    if (i < 0) {
        add_ring(0, 1.0);
    } else if (i >= nr - 1) {
        add_ring(nr - 1, (R_ - rho) / (R_ - ring_radius_[nr - 1]));
    } else {
        double f = p - i;
        add_ring(i, 1 - f);
        add_ring(i + 1, f);
    }
    return st;
}

BallGrid::WideStencil BallGrid::cubic_stencil(cplx z) const {
    WideStencil out;
    const double rho = 2.0 * std::atanh(std::min(std::abs(z), 1.0 - 1e-16)) / scale_;
    if (rho > R_) return out;
    const int nr = static_cast<int>(ring_size_.size());
    const double p = rho / hr_ - 0.5;
    const int i0 = static_cast<int>(std::floor(p));
    if (i0 < 1 || i0 + 2 > nr - 1) {
        Stencil st = stencil(z);
        for (int k = 0; k < st.count; ++k) {
            out.idx[k] = st.idx[k];
            out.w[k] = st.w[k];
        }
        out.count = st.count;
        return out;
    }
    auto lagrange = [](double f, double w[4]) {
        w[0] = -f * (f - 1) * (f - 2) / 6;
        w[1] = (f + 1) * (f - 1) * (f - 2) / 2;
        w[2] = -(f + 1) * f * (f - 2) / 2;
        w[3] = (f + 1) * f * (f - 1) / 6;
    };
    double wr[4], wa[4];
    lagrange(p - i0, wr);
    const double alpha = wrap_angle(std::arg(z));
    for (int a = 0; a < 4; ++a) {
        int ring = i0 - 1 + a;
        int m = ring_size_[ring];
        double pos = alpha * m / kTwoPi;
        int k0 = static_cast<int>(std::floor(pos));
        lagrange(pos - k0, wa);
        for (int b = 0; b < 4; ++b) {
            out.idx[out.count] = ring_start_[ring] + ((k0 - 1 + b) % m + m) % m;
            out.w[out.count++] = wr[a] * wa[b];
        }
    }
    return out;
}

double BallGridFunction::operator()(cplx z) const {
    if (!grid->contains(z)) throw OutOfDomain("point outside the grid ball");
    auto st = grid->stencil(z);
    double s = 0;
    for (int k = 0; k < st.count; ++k) s += st.w[k] * values[st.idx[k]];
    return s;
}

// ---------------------------------------------------------------------------
// Spherical means

double apply_spherical_mean(const SurfaceModel& model, const Observable& f, cplx x, double t, int n, double tol) {
    if (n < 1) throw OutOfDomain("need at least one direction");
    if (t == 0.0) return f(x);
    double s = 0;
    for (int k = 0; k < n; ++k) s += f(geodesic_flow(model, PhasePoint{x, kTwoPi * k / n}, t, tol).z);
    return s / n;
}

double apply_spherical_mean(const SurfaceModel& model, const BallGridFunction& f, cplx x, double t, int n,
                            double tol) {
    return apply_spherical_mean(model, Observable([&](cplx z) { return f(z); }), x, t, n, tol);
}

double apply_spherical_mean_surface(const SurfaceModel& model, const Observable& f, cplx x, double t, int n,
                                    double tol) {
    if (t == 0.0) return f(x);
    SphereQuadrature q = sphere_quadrature(model, x, t, n, tol);
    std::vector<double> chord(n);
    for (int k = 0; k < n; ++k) chord[k] = metric_chord(model, q.endpoints[k], q.endpoints[(k + 1) % n]);
    double s = 0;
    for (int k = 0; k < n; ++k) {
        double dsigma = 0.5 * (chord[k] + chord[(k + n - 1) % n]);
        s += f(q.endpoints[k]) / q.jacobians[k] * dsigma;
    }
    return s / kTwoPi;
}

double exact_norm_hyperbolic(int d, double t) {
    if (d < 2) throw OutOfDomain("dimension must be at least 2");
    if (t < 0) throw OutOfDomain("t must be nonnegative");
    if (t < 1e-8) return 1.0;
    const double e = (d - 3) / 2.0;
    const double beta = std::exp(std::lgamma(0.5) + std::lgamma((d - 1) / 2.0) - std::lgamma(d / 2.0));
    const double cd = 2.0 / (std::pow(2.0, (3.0 - d) / 2.0) * beta);
    const double ct = std::cosh(t);
    // s = t sin u removes the endpoint singularity at s = t
    auto integrand = [&](double u) {
        double s = t * std::sin(u);
        double gap = ct - std::cosh(s);
        if (gap <= 0) return d == 2 ? std::sqrt(2.0 * t / std::sinh(t)) : 0.0;
        return std::pow(gap, e) * t * std::cos(u);
    };
    double I = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, kPi / 2, 15, 1e-14);
    return cd * std::pow(std::sinh(t), 2 - d) * I;
}

// ---------------------------------------------------------------------------
// Power iteration

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

NormEstimate power_iterate(const SpMat& A, const Eigen::VectorXd& w, Eigen::VectorXd x, const GridSpec& spec) {
    auto wnorm = [&](const Eigen::VectorXd& v) { return std::sqrt((w.array() * v.array().square()).sum()); };
    SpMat At = A.transpose();
    NormEstimate est;
    x /= wnorm(x);
    double prev = 0;
    for (int it = 1; it <= spec.max_iterations; ++it) {
        Eigen::VectorXd y = A * x;
        double nrm = wnorm(y);  // Rayleigh quotient of A^*A at x, square-rooted
        Eigen::VectorXd z = (At * (w.array() * y.array()).matrix()).array() / w.array();
        est.iterations = it;
        est.norm = nrm;
        double zn = wnorm(z);
        if (!(zn > 0)) return est;
        x = z / zn;
        if (it > 1 && std::abs(nrm - prev) <= spec.rel_change * nrm) return est;
        prev = nrm;
    }
    throw NoConvergence("power iteration did not settle in " + std::to_string(spec.max_iterations) + " steps");
}

NormEstimate radial_norm(const SurfaceModel& model, double t, double R, const GridSpec& spec) {
    const double k = model.kappa();
    const int n = std::max(2, static_cast<int>(std::ceil(R / spec.h)));
    const double h = R / n;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd w(n), x0(n);
    auto deposit = [&](int i, double rho, double mass) {
        if (rho > R) return;
        double p = rho / h - 0.5;
        int j = static_cast<int>(std::floor(p));
        if (j < 0) {
            trip.emplace_back(i, 0, mass);
        } else if (j >= n - 1) {
            trip.emplace_back(i, n - 1, mass * (R - rho) / (R - (n - 0.5) * h));
        } else {
            double f = p - j;
            trip.emplace_back(i, j, mass * (1 - f));
            trip.emplace_back(i, j + 1, mass * f);
        }
    };
    for (int i = 0; i < n; ++i) {
        double r = (i + 0.5) * h;
        // weights relative to sinh(kR) to stay in range
        w[i] = std::exp(k * (r - R)) * (1 - std::exp(-2 * k * r)) / (1 - std::exp(-2 * k * R)) * h;
        x0[i] = std::exp(-0.5 * k * r) * (1 + k * r);
        if (t == 0.0) {
            deposit(i, r, 1.0);
            continue;
        }
        // The sphere of radius t about a point at radius r is parametrised by
        // the endpoint radius rho in [|r - t|, r + t]; the angle alpha(rho)
        // comes from half-angle forms of the cosine law.
        const double lo = std::abs(r - t), hi = r + t;
        const double B2 = 2 * std::sinh(k * r) * std::sinh(k * t);
        auto alpha = [&](double rho) {
            double s2 = 2 * std::sinh(0.5 * k * (rho + lo)) * std::sinh(0.5 * k * (rho - lo)) / B2;
            double c2 = 2 * std::sinh(0.5 * k * (hi + rho)) * std::sinh(0.5 * k * (hi - rho)) / B2;
            return 2 * std::atan2(std::sqrt(std::max(0.0, s2)), std::sqrt(std::max(0.0, c2)));
        };
        const int K = std::max(spec.directions / 2, static_cast<int>(std::ceil((hi - lo) / (0.5 * h))));
        double a_prev = alpha(lo);
        for (int q = 0; q < K; ++q) {
            double r1 = lo + (hi - lo) * (q + 1) / K;
            double a1 = alpha(r1);
            deposit(i, lo + (hi - lo) * (q + 0.5) / K, std::abs(a_prev - a1) / kPi);
            a_prev = a1;
        }
    }
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    NormEstimate est = power_iterate(A, w, x0, spec);
    est.R = R;
    est.h = h;
    est.nodes = n;
    return est;
}

NormEstimate grid_norm(const SurfaceModel& model, double t, double R, const GridSpec& spec) {
    BallGrid grid(model, R, spec.h);
    const int n = static_cast<int>(grid.size());
    const int N = spec.directions;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd w(n), x0(n);
    for (int i = 0; i < n; ++i) {
        cplx z = grid.nodes()[i];
        w[i] = grid.weights()[i];
        x0[i] = std::exp(-0.5 * model_radius(model, z));
        for (int a = 0; a < N; ++a) {
            cplx e = geodesic_flow(model, PhasePoint{z, kTwoPi * (a + 0.5) / N}, t, spec.tol).z;
            auto st = grid.stencil(e);
            for (int q = 0; q < st.count; ++q) trip.emplace_back(i, st.idx[q], st.w[q] / N);
        }
    }
    SpMat A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    double wmax = w.maxCoeff();
    NormEstimate est = power_iterate(A, w / wmax, x0, spec);
    est.R = R;
    est.h = grid.spacing();
    est.nodes = n;
    return est;
}

}  // namespace

NormEstimate sm_norm_power(const SurfaceModel& model, double t, double R, const GridSpec& spec) {
    if (t < 0) throw OutOfDomain("t must be nonnegative");
    if (R < t + 2) throw OutOfDomain("truncation radius must satisfy R >= t + 2");
    if (model.is_constant_curvature() && !spec.force_generic) return radial_norm(model, t, R, spec);
    return grid_norm(model, t, R, spec);
}

// ---------------------------------------------------------------------------
// Lower bound through the annulus test function

namespace {

// fraction of directions at distance r from x0 whose time-t endpoint lies in B(x0, 1)
double hit_fraction_constant(double k, double r, double t) {
    double c = (std::cosh(k * r) * std::cosh(k * t) - std::cosh(k)) / (std::sinh(k * r) * std::sinh(k * t));
    if (c <= -1) return 1.0;
    if (c >= 1) return 0.0;
    return std::acos(c) / kPi;
}

double hit_fraction_numeric(const SurfaceModel& model, cplx x0, const PhasePoint& back, double t, double tol) {
    auto hits = [&](double a) {
        cplx e = geodesic_flow(model, PhasePoint{back.z, back.theta + a}, t, tol).z;
        if (disk_distance(e, x0) > 2.0) return false;  // far outside the unit ball for small perturbations
        return distance(model, e, x0) <= 1.0;
    };
    auto edge = [&](double sign) {
        double lo = 0.0, hi = kPi;
        if (hits(sign * hi)) return kPi;
        for (int it = 0; it < 18; ++it) {
            double mid = 0.5 * (lo + hi);
            (hits(sign * mid) ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    return std::min(1.0, (edge(1.0) + edge(-1.0)) / kTwoPi);
}

double unit_ball_volume(const SurfaceModel& model, cplx x0, double tol) {
    if (model.is_constant_curvature()) {
        double k = model.kappa();
        return kTwoPi * (std::cosh(k) - 1) / (k * k);
    }
    const auto& gl = boost::math::quadrature::gauss<double, 16>::abscissa();
    const auto& gw = boost::math::quadrature::gauss<double, 16>::weights();
    const int nth = 32;
    double s = 0;
    for (int a = 0; a < nth; ++a) {
        double th = kTwoPi * (a + 0.5) / nth;
        for (std::size_t i = 0; i < gl.size(); ++i) {
            for (double sgn : {-1.0, 1.0}) {
                if (gl[i] == 0.0 && sgn > 0) continue;
                double r = 0.5 * (1 + sgn * gl[i]);
                s += 0.5 * gw[i] * radial_jacobian(model, x0, th, r, tol);
            }
        }
    }
    return s * kTwoPi / nth;
}

}  // namespace

McEstimate sm_norm_lower(const SurfaceModel& model, cplx x0, double t, int samples, std::uint64_t seed, double tol) {
    if (samples < 1) throw OutOfDomain("need samples");
    if (t < 1) throw OutOfDomain("t must be at least 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    const bool cc = model.is_constant_curvature();
    const double k = model.kappa();
    Running num, finv;
    for (int i = 0; i < samples; ++i) {
        double r = t - 1 + 2 * U(rng);
        double th = kTwoPi * (i + U(rng)) / samples;
        double hit, J;
        if (cc) {
            hit = hit_fraction_constant(k, r, t);
            J = std::sinh(k * r) / k;
        } else {
            auto [end, j] = flow_with_jacobian(model, PhasePoint{x0, th}, r, tol);
            J = j;
            hit = hit_fraction_numeric(model, x0, PhasePoint{end.z, end.theta + kPi}, t, tol);
        }
        num.add(hit);
        finv.add(1.0 / J);
    }
    const double area = 2.0 * kTwoPi;
    double fnorm2;
    double fnorm2_rel = 0;
    if (cc) {
        auto F = [&](double r) { return std::log(std::tanh(k * r / 2)); };
        fnorm2 = kTwoPi * (F(t + 1) - F(t - 1 > 0 ? t - 1 : 1e-12));
    } else {
        fnorm2 = area * finv.mean;
        fnorm2_rel = finv.sem() / finv.mean;
    }
    const double bnorm = std::sqrt(unit_ball_volume(model, x0, tol));
    McEstimate out;
    out.value = area * num.mean / (std::sqrt(fnorm2) * bnorm);
    double rel = num.mean > 0 ? num.sem() / num.mean : 0.0;
    out.stderr_ = out.value * std::sqrt(rel * rel + 0.25 * fnorm2_rel * fnorm2_rel);
    return out;
}

// ---------------------------------------------------------------------------
// Annulus integrals

McEstimate annulus_log_integral(const SurfaceModel& model, double q, double r, double c, int samples,
                                std::uint64_t seed, double tol) {
    if (!(c > 0) || r - c < 0) throw OutOfDomain("annulus needs c > 0 and r >= c");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    std::vector<double> logs;
    logs.reserve(samples);
    const double area = 2 * c * kTwoPi;
    for (int i = 0; i < samples; ++i) {
        double rho = r - c + 2 * c * U(rng);
        double th = kTwoPi * (i + U(rng)) / samples;
        double logJ, psi;
        if (model.is_constant_curvature()) {
            double k = model.kappa();
            logJ = k * rho + std::log1p(-std::exp(-2 * k * rho)) - std::log(2 * k);
            psi = k * rho;
        } else {
            PhasePoint p{0.0, th};
            FlowRequest req;
            req.tol = tol;
            req.jacobi = true;
            req.jac1 = {0.0, 1.0};
            req.riccati = true;
            req.u0 = unstable_riccati(model, p, 12.0, tol);
            req.u_lo = 0.0;
            req.u_hi = 2.0 * model.kappa_max();
            FlowResult fr = integrate_flow(model, to_chart(model, p), rho, req);
            logJ = std::log(fr.jac1.j);
            psi = fr.u_integral;
        }
        logs.push_back(logJ - q * psi);
    }
    double mx = *std::max_element(logs.begin(), logs.end());
    Running run;
    for (double l : logs) run.add(std::exp(l - mx));
    McEstimate out;
    out.value = std::log(area * run.mean) + mx;
    out.stderr_ = run.sem() / run.mean;
    return out;
}

AnnulusPressure annulus_pressure(const SurfaceModel& model, double q, double r, double c, int samples,
                                 std::uint64_t seed, double tol) {
    McEstimate a = annulus_log_integral(model, q, r, c, samples, seed, tol);
    McEstimate b = annulus_log_integral(model, q, r + 1, c, samples, seed + 0x9e3779b97f4a7c15ULL, tol);
    AnnulusPressure out;
    out.slope = b.value - a.value;
    out.slope_stderr = std::hypot(a.stderr_, b.stderr_);
    out.raw = a.value / r;
    return out;
}

// ---------------------------------------------------------------------------
// Poincare series

namespace {

struct ShellData {
    std::vector<std::vector<double>> dist, psi;  // per word length
};

ShellData shell_data(const SurfaceModel& model, const FuchsianGroup& G, int L, double tol) {
    GroupBall ball = elements_within_word_length(G, L, 50'000'000);
    ShellData sd;
    sd.dist.resize(L + 1);
    sd.psi.resize(L + 1);
    for (std::size_t i = 1; i < ball.elements.size(); ++i) {
        cplx y = ball.elements[i].apply(0.0);
        double d, psi;
        if (model.is_constant_curvature()) {
            d = disk_distance(0.0, y) / model.kappa();
            psi = model.kappa() * d;
        } else {
            Connection cn = connect(model, 0.0, y, tol);
            d = cn.distance;
            PhasePoint p{0.0, cn.direction};
            FlowRequest req;
            req.tol = tol;
            req.riccati = true;
            req.u0 = unstable_riccati(model, p, 12.0, tol);
            req.u_lo = 0.0;
            req.u_hi = 2.0 * model.kappa_max();
            psi = integrate_flow(model, to_chart(model, p), d, req).u_integral;
        }
        sd.dist[ball.word_length[i]].push_back(d);
        sd.psi[ball.word_length[i]].push_back(psi);
    }
    return sd;
}

double log_shell_sum(const ShellData& sd, int L, double q, double s) {
    const auto& d = sd.dist[L];
    const auto& p = sd.psi[L];
    double mx = -1e300;
    for (std::size_t i = 0; i < d.size(); ++i) mx = std::max(mx, -s * d[i] - q * p[i]);
    double sum = 0;
    for (std::size_t i = 0; i < d.size(); ++i) sum += std::exp(-s * d[i] - q * p[i] - mx);
    return std::log(sum) + mx;
}

}  // namespace

CriticalExponent poincare_critical_exponent(const SurfaceModel& model, const FuchsianGroup& G, double q,
                                            int max_word_length, double tol) {
    if (max_word_length < 2) throw OutOfDomain("need at least two shells");
    ShellData sd = shell_data(model, G, max_word_length, tol);
    CriticalExponent out;
    for (int L = 2; L <= max_word_length; ++L) {
        auto f = [&](double s) { return log_shell_sum(sd, L, q, s) - log_shell_sum(sd, L - 1, q, s); };
        double lo = -20, hi = 20;
        boost::uintmax_t it = 200;
        auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(48), it);
        out.shell_exponents.push_back(0.5 * (r.first + r.second));
    }
    out.s = out.shell_exponents.back();
    if (out.shell_exponents.size() >= 2)
        out.stderr_ = std::abs(out.s - out.shell_exponents[out.shell_exponents.size() - 2]);
    return out;
}

double poincare_partial_sum(const SurfaceModel& model, const FuchsianGroup& G, double q, double s, int L,
                            double tol) {
    ShellData sd = shell_data(model, G, L, tol);
    double total = 1.0;  // identity
    for (int k = 1; k <= L; ++k)
        if (!sd.dist[k].empty()) total += std::exp(log_shell_sum(sd, k, q, s));
    return total;
}

// ---------------------------------------------------------------------------
// Gromov hyperbolicity and divergence

double gromov_delta(const SurfaceModel& model, cplx x, cplx y, cplx z, double tol) {
    Connection xy = connect(model, x, y, tol), xz = connect(model, x, z, tol), yz = connect(model, y, z, tol);
    const double a = yz.distance, b = xz.distance, c = xy.distance;
    auto along = [&](cplx from, const Connection& cn, double s) {
        if (cn.distance == 0.0 || s <= 0.0) return from;
        return geodesic_flow(model, PhasePoint{from, cn.direction}, std::min(s, cn.distance), tol).z;
    };
    cplx zp = along(x, xy, 0.5 * (b + c - a));
    cplx yp = along(x, xz, 0.5 * (b + c - a));
    cplx xp = along(y, yz, 0.5 * (a + c - b));
    return std::max({distance(model, xp, yp), distance(model, yp, zp), distance(model, xp, zp)});
}

DivergenceFit geodesic_divergence(const SurfaceModel& model, cplx x, double v, double w, double r, double eta,
                                  int samples, double tol) {
    if (samples < 4) throw OutOfDomain("need at least four samples");
    PhasePoint pv{x, v}, pw{x, w};
    PhasePoint ev = geodesic_flow(model, pv, r, tol), ew = geodesic_flow(model, pw, r, tol);
    if (distance(model, ev.z, ew.z) > eta * (1 + 1e-9)) throw OutOfDomain("endpoints farther apart than eta");
    std::vector<double> ts, ls;
    double prev = 0;
    for (int i = 1; i <= samples; ++i) {
        double t = r * i / samples;
        double sep = phase_distance(model, geodesic_flow(model, pv, t, tol), geodesic_flow(model, pw, t, tol));
        if (sep < prev * (1 - 1e-3)) throw FitFailure("separation is not monotone");
        prev = sep;
        if (t >= std::min(1.0, r / 2)) {
            ts.push_back(t);
            ls.push_back(std::log(sep));
        }
    }
    const double slope = fit_slope(ts, ls);
    DivergenceFit out;
    out.rate = slope;
    for (std::size_t i = 0; i < ts.size(); ++i)
        out.prefactor = std::max(out.prefactor, std::exp(ls[i] + slope * (r - ts[i])));
    out.end_separation = std::exp(ls.back());
    return out;
}

// ---------------------------------------------------------------------------
// Correlation lower bound

Correlation correlation_lower_bound(const SurfaceModel& model, const FuchsianGroup& G, cplx x0, double t,
                                    int samples, std::uint64_t seed, std::size_t cap, double tol) {
    const double s = distance_scale(model);
    const double D = G.domain_radius() / s;  // in model units
    const double rchi = D + 1;               // bump radius, model units
    const double rchi_h = rchi * s;          // hyperbolic units
    // chi is radial about x0 in the hyperbolic distance of the disk
    auto chi_at_h = [&](double dh) { return bump(dh / rchi_h); };

    GroupBall ball = elements_within_distance(G, s * (t + D) + 2 * disk_distance(0.0, x0), cap);
    std::vector<cplx> centres;
    std::vector<double> coef;
    for (const auto& g : ball.elements) {
        cplx gx = g.apply(x0);
        double d = distance(model, x0, gx);
        if (d < t - D || d > t + D) continue;
        centres.push_back(gx);
        coef.push_back(1.0 / jacobian(model, x0, gx, tol));
    }
    Correlation out;
    out.orbit_terms = centres.size();
    if (centres.empty()) return out;
    auto ftilde = [&](cplx y, int* mult) {
        double v = 0;
        int m = 0;
        for (std::size_t i = 0; i < centres.size(); ++i) {
            double dh = disk_distance(centres[i], y);
            if (dh < rchi_h) {
                v += coef[i] * chi_at_h(dh);
                ++m;
            }
        }
        if (mult) *mult = m;
        return v;
    };
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    // uniform point of the hyperbolic ball of radius rchi_h about c
    const double chmax = std::cosh(rchi_h);
    const double vol_h = kTwoPi * (chmax - 1);
    auto sample_ball = [&](cplx c) {
        double rho = std::acosh(1 + U(rng) * (chmax - 1));
        cplx local = std::polar(std::tanh(rho / 2), kTwoPi * U(rng));
        return Mobius::translate_to(c).apply(local);
    };
    auto vol_factor = [&](cplx z) {
        double f = 1.0 / (s * s);
        if (model.is_perturbed() && model.epsilon() != 0.0) f *= std::exp(2 * model.phi_at(z));
        return f;
    };
    Running val, nrm;
    for (int i = 0; i < samples; ++i) {
        cplx x = sample_ball(x0);
        double th = kTwoPi * (i + U(rng)) / samples;
        double cx = chi_at_h(disk_distance(x0, x));
        double contrib = 0;
        if (cx > 0) contrib = cx * ftilde(geodesic_flow(model, PhasePoint{x, th}, t, tol).z, nullptr);
        val.add(vol_h * vol_factor(x) * contrib);

        std::size_t gi = std::min(centres.size() - 1, static_cast<std::size_t>(U(rng) * centres.size()));
        cplx y = sample_ball(centres[gi]);
        int m = 0;
        double fv = ftilde(y, &m);
        nrm.add(m > 0 ? centres.size() * vol_h * vol_factor(y) * fv * fv / m : 0.0);
    }
    out.value = val.mean;
    out.value_stderr = val.sem();
    out.norm = std::sqrt(nrm.mean);
    out.norm_stderr = nrm.mean > 0 ? 0.5 * nrm.sem() / out.norm : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Swap identity, temperness, split points

SwapPair swap_integrals(const SurfaceModel& model, const std::function<double(cplx, cplx)>& h, double R, double t,
                        int radial_nodes, int n_directions, double tol) {
    const double s = distance_scale(model);
    std::vector<double> xs(radial_nodes), ws(radial_nodes);
    // Gauss-Legendre nodes on [0, R] by Newton iteration on P_n
    for (int i = 0; i < radial_nodes; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (radial_nodes + 0.5));
        double pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1, p2 = 0;
            for (int j = 1; j <= radial_nodes; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) * z * p2 - (j - 1) * p3) / j;
            }
            pp = radial_nodes * (z * p1 - p2) / (z * z - 1);
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        xs[i] = 0.5 * R * (1 + z);
        ws[i] = R / ((1 - z * z) * pp * pp);
    }
    const int nth = 2 * radial_nodes;
    SwapPair out;
    for (int i = 0; i < radial_nodes; ++i) {
        double rd = std::tanh(s * xs[i] / 2);
        for (int a = 0; a < nth; ++a) {
            cplx x = std::polar(rd, kTwoPi * (a + 0.5) / nth);
            double w = ws[i] * kTwoPi / nth * polar_density(model, x, xs[i]);
            double f = 0, b = 0;
            for (int k = 0; k < n_directions; ++k) {
                cplx y = geodesic_flow(model, PhasePoint{x, kTwoPi * (k + 0.5) / n_directions}, t, tol).z;
                f += h(x, y);
                b += h(y, x);
            }
            out.forward += w * f / n_directions;
            out.backward += w * b / n_directions;
        }
    }
    return out;
}

double temperness_constant(const SurfaceModel& model, int samples, std::uint64_t seed, double max_distance,
                           double tol) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    std::vector<double> a, d;
    for (int i = 0; i < samples; ++i) {
        cplx x = std::polar(disk_radius(model, 2.0 * U(rng)), kTwoPi * U(rng));
        double ry = 1 + (max_distance - 1) * U(rng), rz = 1 + (max_distance - 1) * U(rng);
        auto [py, jy] = flow_with_jacobian(model, PhasePoint{x, kTwoPi * U(rng)}, ry, tol);
        auto [pz, jz] = flow_with_jacobian(model, PhasePoint{x, kTwoPi * U(rng)}, rz, tol);
        a.push_back(std::log(jy) - std::log(jz));
        d.push_back(distance(model, py.z, pz.z));
    }
    auto excess = [&](double C) {
        double m = -1e300;
        for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, a[i] - C * d[i]);
        return m - std::log(C);
    };
    if (excess(1.0) <= 0) return 1.0;
    double lo = 1.0, hi = 2.0;
    while (excess(hi) > 0) {
        hi *= 2;
        if (hi > 1e12) throw NoConvergence("temperness constant unbounded on the sample");
    }
    for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        (excess(mid) > 0 ? lo : hi) = mid;
    }
    return hi;
}

double split_point_distance(const SurfaceModel& model, double t, int samples, std::uint64_t seed, double tol) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0, 1);
    double worst = 0;
    int used = 0;
    for (int i = 0; i < samples * 20 && used < samples; ++i) {
        double rx = 2 * t * U(rng);
        double v = kTwoPi * U(rng);
        cplx x = geodesic_flow(model, PhasePoint{0.0, v}, rx, tol).z;
        cplx y = geodesic_flow(model, PhasePoint{x, kTwoPi * U(rng)}, t, tol).z;
        Connection oy = connect(model, 0.0, y, tol);
        double ry = oy.distance;
        double j = std::floor(ry - rx);
        double rj = (t - j) / 2, rmj = (t + j) / 2;
        if (rx < rj || ry < rmj) continue;
        cplx xm = geodesic_flow(model, PhasePoint{0.0, v}, rx - rj, tol).z;
        cplx yp = geodesic_flow(model, PhasePoint{0.0, oy.direction}, ry - rmj, tol).z;
        worst = std::max(worst, distance(model, xm, yp));
        ++used;
    }
    if (used == 0) throw NoConvergence("no admissible sample pairs");
    return worst;
}

}  // namespace hyperlab
