#include "hyperlab/fourier.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss.hpp>
#include <unsupported/Eigen/FFT>

namespace hyperlab {

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(kTwoPi);

// e^{i m a} for m = -N..N, column m + N
void mode_phases(double a, int N, std::vector<cplx>& out) {
    out.resize(2 * N + 1);
    const cplx step = std::polar(1.0, a);
    out[N] = 1.0;
    for (int m = 1; m <= N; ++m) {
        out[N + m] = out[N + m - 1] * step;
        out[N - m] = std::conj(out[N + m]);
    }
}

}  // namespace

double PhaseGridFunction::norm() const {
    double s = 0;
    for (Eigen::Index i = 0; i < coeffs.rows(); ++i) s += grid->weights()[i] * coeffs.row(i).squaredNorm();
    return std::sqrt(s);
}

cplx PhaseGridFunction::evaluate(cplx z, double theta, int interp_order) const {
    if (!grid->contains(z)) throw OutOfDomain("phase point outside the grid ball");
    Eigen::RowVectorXcd c = Eigen::RowVectorXcd::Zero(2 * N + 1);
    if (interp_order == 3) {
        auto st = grid->cubic_stencil(z);
        for (int k = 0; k < st.count; ++k) c += st.w[k] * coeffs.row(st.idx[k]);
    } else {
        auto st = grid->stencil(z);
        for (int k = 0; k < st.count; ++k) c += st.w[k] * coeffs.row(st.idx[k]);
    }
    std::vector<cplx> ph;
    mode_phases(theta, N, ph);
    cplx v = 0;
    for (int m = 0; m <= 2 * N; ++m) v += c[m] * ph[m];
    return v * kInvSqrt2Pi;
}

PhaseGridFunction fiber_transform(const BallGrid& grid, const Eigen::MatrixXcd& samples, int N) {
    const int M = static_cast<int>(samples.cols());
    if (N < 0) throw OutOfDomain("negative mode bound");
    if (M < 2 * N + 2) throw Aliasing("fiber grid of " + std::to_string(M) + " samples cannot carry modes up to " +
                                      std::to_string(N));
    if (static_cast<std::size_t>(samples.rows()) != grid.size()) throw OutOfDomain("sample rows must match nodes");
    PhaseGridFunction u{&grid, N, Eigen::MatrixXcd(samples.rows(), 2 * N + 1)};
    Eigen::FFT<double> fft;
    std::vector<cplx> in(M), out(M);
    const double scale = std::sqrt(kTwoPi) / M;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
        for (int k = 0; k < M; ++k) in[k] = samples(i, k);
        fft.fwd(out, in);
        for (int n = -N; n <= N; ++n) u.coeffs(i, n + N) = scale * out[(n + M) % M];
    }
    return u;
}

Eigen::MatrixXcd inverse_fiber_transform(const PhaseGridFunction& u, int M) {
    if (M < 2 * u.N + 2) throw Aliasing("fiber grid too coarse for the stored modes");
    Eigen::MatrixXcd s(u.coeffs.rows(), M);
    Eigen::FFT<double> fft;
    std::vector<cplx> freq(M), time(M);
    const double scale = M / std::sqrt(kTwoPi);
    for (Eigen::Index i = 0; i < u.coeffs.rows(); ++i) {
        std::fill(freq.begin(), freq.end(), cplx(0));
        for (int n = -u.N; n <= u.N; ++n) freq[(n + M) % M] = scale * u.coeffs(i, n + u.N);
        fft.inv(time, freq);
        for (int k = 0; k < M; ++k) s(i, k) = time[k];
    }
    return s;
}

double plateau_profile(double s) {
    const double a = std::abs(s);
    if (a <= 2) return 1.0;
    if (a >= 4) return 0.0;
    auto psi = [](double x) { return x > 0 ? std::exp(-1.0 / x) : 0.0; };
    double up = psi(4 - a), down = psi(a - 2);
    return up / (up + down);
}

Profile scaled_plateau(double support) {
    return [support](double s) { return plateau_profile(4.0 * s / support); };
}

int filter_bandwidth(const Profile& g, double h) {
    constexpr int cap = 100000;
    int last = -1;
    for (int m = 0; m <= cap; ++m)
        if (g(h * h * double(m) * m) != 0.0) last = m;
    if (last == cap) throw OutOfDomain("filter profile is not compactly supported on the mode range");
    return last;
}

PhaseGridFunction vertical_filter(const PhaseGridFunction& u, const Profile& g, double h) {
    PhaseGridFunction out = u;
    for (int n = -u.N; n <= u.N; ++n) out.coeffs.col(n + u.N) *= g(h * h * double(n) * n);
    return out;
}

PhaseGridFunction pullback_flow(const SurfaceModel& model, const PhaseGridFunction& u, double t,
                                const PullbackOptions& opts) {
    if (t == 0.0) return u;
    const BallGrid& grid = *u.grid;
    const int M = opts.theta_samples > 0 ? opts.theta_samples : 4 * u.N + 4;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) / opts.max_step - 1e-12)));
    const double dt = t / steps;
    std::vector<PhasePoint> feet(grid.size() * M);
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (int k = 0; k < M; ++k)
            feet[i * M + k] = geodesic_flow(model, PhasePoint{grid.nodes()[i], kTwoPi * k / M}, -dt, opts.tol);
    PhaseGridFunction cur = u;
    Eigen::MatrixXcd samples(grid.size(), M);
    for (int s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int k = 0; k < M; ++k) {
                const PhasePoint& f = feet[i * M + k];
                if (!grid.contains(f.z)) {
                    if (!opts.dirichlet) throw OutOfDomain("characteristic leaves the grid ball");
                    samples(i, k) = 0.0;
                } else {
                    samples(i, k) = cur.evaluate(f.z, f.theta, opts.interp_order);
                }
            }
        cur = fiber_transform(grid, samples, u.N);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Filtered propagator norm

namespace {

// One quadrature sample of the discrete transport: row r receives
// w * conj(omega_n(psi)) * e^{i k beta} * sum_m v_m(foot) omega_m(psi_foot).
struct TransportSample {
    int row;
    double w, psi, beta, psi_foot;
    int count;
    int idx[4];
    double c[4];
};

struct Transport {
    int rows = 0;
    int N = 0;
    std::vector<TransportSample> samples;
    Eigen::VectorXd weight;  // row weights of the L^2 inner product

    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& v, int k) const {
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows, 2 * N + 1);
        std::vector<cplx> pf, pp;
        Eigen::RowVectorXcd V(2 * N + 1);
        for (const auto& s : samples) {
            V.setZero();
            for (int q = 0; q < s.count; ++q) V += s.c[q] * v.row(s.idx[q]);
            mode_phases(s.psi_foot, N, pf);
            cplx val = 0;
            for (int m = 0; m <= 2 * N; ++m) val += V[m] * pf[m];
            val *= s.w / kTwoPi * std::polar(1.0, k * s.beta);
            mode_phases(-s.psi, N, pp);
            for (int n = 0; n <= 2 * N; ++n) out(s.row, n) += val * pp[n];
        }
        return out;
    }
    // conjugate transpose of apply
    Eigen::MatrixXcd apply_h(const Eigen::MatrixXcd& y, int k) const {
        Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(rows, 2 * N + 1);
        std::vector<cplx> pf, pp;
        for (const auto& s : samples) {
            mode_phases(s.psi, N, pp);
            cplx Y = 0;
            for (int n = 0; n <= 2 * N; ++n) Y += y(s.row, n) * pp[n];
            Y *= s.w / kTwoPi * std::polar(1.0, -k * s.beta);
            mode_phases(-s.psi_foot, N, pf);
            for (int q = 0; q < s.count; ++q)
                for (int m = 0; m <= 2 * N; ++m) out(s.idx[q], m) += s.c[q] * Y * pf[m];
        }
        return out;
    }
};

struct PowerResult {
    double norm = 0;
    int iterations = 0;
};

PowerResult filtered_power(const Transport& T, const Eigen::VectorXd& gdiag, int k, Eigen::MatrixXcd x,
                           const FilteredNormOptions& opts) {
    const Eigen::VectorXd& W = T.weight;
    auto wnorm = [&](const Eigen::MatrixXcd& v) {
        double s = 0;
        for (int r = 0; r < T.rows; ++r) s += W[r] * v.row(r).squaredNorm();
        return std::sqrt(s);
    };
    auto filt = [&](Eigen::MatrixXcd v) {
        for (int m = 0; m < v.cols(); ++m) v.col(m) *= gdiag[m];
        return v;
    };
    PowerResult res;
    double n0 = wnorm(x);
    if (!(n0 > 0)) return res;
    x /= n0;
    double prev = 0;
    for (int it = 1; it <= opts.max_iterations; ++it) {
        Eigen::MatrixXcd y = filt(T.apply(filt(x), k));
        double nrm = wnorm(y);
        res.iterations = it;
        res.norm = nrm;
        if (!(nrm > 0)) return res;
        for (int r = 0; r < T.rows; ++r) y.row(r) *= W[r];
        Eigen::MatrixXcd z = filt(T.apply_h(filt(y), k));
        for (int r = 0; r < T.rows; ++r) z.row(r) /= W[r];
        double zn = wnorm(z);
        if (!(zn > 0)) return res;
        x = z / zn;
        if (it > 1 && std::abs(nrm - prev) <= opts.rel_change * nrm) return res;
        prev = nrm;
    }
    throw NoConvergence("filtered power iteration did not settle");
}

struct Foot {
    double rho, beta, psi;
};

// Rotation sector transport for constant curvature: functions
// e^{i k beta} sum_m v_m(r) omega_m(theta - beta), piecewise constant on
// radial cells. Each output row is the cell average over Gauss points in r,
// so the discrete operator is the compression of e^{-tX} to the cell space.
Transport sector_transport(double kappa, int N, int kmax, double t, double R, double dr_req) {
    const int J = std::max(2, static_cast<int>(std::ceil(R / dr_req)));
    const double dr = R / J;
    Transport T;
    T.rows = J;
    T.N = N;
    T.weight.resize(J);
    constexpr int S = 4;
    const auto& gx = boost::math::quadrature::gauss<double, 2 * S>::abscissa();
    const auto& gw = boost::math::quadrature::gauss<double, 2 * S>::weights();
    std::vector<double> sub_x, sub_w;
    for (int g = 0; g < S; ++g) {
        sub_x.push_back(gx[g]);
        sub_w.push_back(gw[g]);
        if (gx[g] != 0.0) {
            sub_x.push_back(-gx[g]);
            sub_w.push_back(gw[g]);
        }
    }
    const int n0 = std::max(256, 16 * (N + kmax + 1));
    const double band = std::max(1, N + kmax);
    for (int j = 0; j < J; ++j) {
        const double lo = j * dr, hi = (j + 1) * dr;
        // cell measure (cosh(k hi) - cosh(k lo)) / k^2
        const double cell = 2 * std::sinh(0.5 * kappa * (hi + lo)) * std::sinh(0.5 * kappa * dr) / (kappa * kappa);
        T.weight[j] = cell * std::exp(-kappa * R);
        for (std::size_t g = 0; g < sub_x.size(); ++g) {
            const double r = 0.5 * (lo + hi) + 0.5 * dr * sub_x[g];
            const double share = 0.5 * dr * sub_w[g] * std::sinh(kappa * r) / kappa / cell;
            const cplx z = std::tanh(kappa * r / 2);
            auto foot = [&](double psi) {
                PhasePoint f = mobius_flow(kappa, PhasePoint{z, psi}, -t);
                double a = std::abs(f.z);
                double beta = a > 0 ? std::arg(f.z) : 0.0;
                return Foot{2 * std::atanh(std::min(a, 1.0 - 1e-16)) / kappa, beta, f.theta - beta};
            };
            auto add = [&](double a, double b) {
                double psi = 0.5 * (a + b);
                Foot f = foot(psi);
                if (f.rho >= R) return;
                TransportSample s;
                s.row = j;
                s.w = (b - a) * share;
                s.psi = psi;
                s.beta = f.beta;
                s.psi_foot = f.psi;
                s.count = 1;
                s.idx[0] = std::min(J - 1, static_cast<int>(f.rho / dr));
                s.c[0] = 1.0;
                T.samples.push_back(s);
            };
            // adaptive partition of the fiber circle: refine while the foot
            // radius, foot angle or foot direction moves too far
            std::function<void(double, double, const Foot&, const Foot&, int)> refine =
                [&](double a, double b, const Foot& fa, const Foot& fb, int depth) {
                    if (fa.rho > R + dr && fb.rho > R + dr && depth > 0) return;
                    double d = std::max({std::abs(fb.rho - fa.rho) / (0.5 * dr),
                                         band * std::abs(angle_diff(fb.beta, fa.beta)) / 0.5,
                                         band * std::abs(angle_diff(fb.psi, fa.psi)) / 0.5});
                    if (d <= 1.0 || depth >= 40) {
                        add(a, b);
                        return;
                    }
                    double mid = 0.5 * (a + b);
                    Foot fm = foot(mid);
                    refine(a, mid, fa, fm, depth + 1);
                    refine(mid, b, fm, fb, depth + 1);
                };
            Foot prev = foot(0.0);
            for (int q = 0; q < n0; ++q) {
                double a = kTwoPi * q / n0, b = kTwoPi * (q + 1) / n0;
                Foot next = foot(b);
                refine(a, b, prev, next, 0);
                prev = next;
            }
        }
    }
    return T;
}

Transport grid_transport(const SurfaceModel& model, const BallGrid& grid, int N, double t, int Q, double tol) {
    Transport T;
    T.rows = static_cast<int>(grid.size());
    T.N = N;
    T.weight.resize(T.rows);
    double wmax = *std::max_element(grid.weights().begin(), grid.weights().end());
    for (int i = 0; i < T.rows; ++i) {
        T.weight[i] = grid.weights()[i] / wmax;
        for (int q = 0; q < Q; ++q) {
            double psi = kTwoPi * (q + 0.5) / Q;
            PhasePoint f = geodesic_flow(model, PhasePoint{grid.nodes()[i], psi}, -t, tol);
            auto st = grid.stencil(f.z);
            if (st.count == 0) continue;
            TransportSample s;
            s.row = i;
            s.w = kTwoPi / Q;
            s.psi = psi;
            s.beta = 0;
            s.psi_foot = f.theta;
            s.count = st.count;
            for (int c = 0; c < st.count; ++c) {
                s.idx[c] = st.idx[c];
                s.c[c] = st.w[c];
            }
            T.samples.push_back(s);
        }
    }
    return T;
}

}  // namespace

FilteredNorm filtered_norm(const SurfaceModel& model, const Profile& g, double h, double t, double R,
                           const FilteredNormOptions& opts) {
    if (!(h > 0) || h > 1) throw OutOfDomain("h must lie in (0, 1]");
    if (R < t + 2) throw OutOfDomain("truncation radius must satisfy R >= t + 2");
    FilteredNorm out;
    const int N = filter_bandwidth(g, h);
    out.bound_value = (1 + 1 / h) * sm_norm_power(model, t, R).norm;
    if (N < 0) return out;
    out.modes = 2 * N + 1;
    Eigen::VectorXd gdiag(2 * N + 1);
    for (int m = -N; m <= N; ++m) gdiag[m + N] = g(h * h * double(m) * m);

    auto start = [&](const Transport& T, auto radius_of_row) {
        Eigen::MatrixXcd x(T.rows, 2 * N + 1);
        for (int r = 0; r < T.rows; ++r) {
            double rho = radius_of_row(r);
            for (int m = 0; m <= 2 * N; ++m) x(r, m) = std::exp(-0.5 * rho) * (1 + rho) * (1.0 + 0.1 * m);
        }
        return x;
    };

    if (model.is_constant_curvature() && !opts.force_generic) {
        const double k = model.kappa();
        Transport T = sector_transport(k, N, opts.max_sector, t, R, opts.dr);
        out.grid_h = R / T.rows;
        for (int sector = 0; sector <= opts.max_sector; ++sector) {
            auto res = filtered_power(T, gdiag, sector,
                                      start(T, [&](int r) { return k * (r + 0.5) * out.grid_h; }), opts);
            out.sector_norms.push_back(res.norm);
            out.iterations += res.iterations;
            if (res.norm > out.norm) {
                out.norm = res.norm;
                out.best_sector = sector;
            }
        }
    } else {
        BallGrid grid(model, R, opts.grid_h);
        const int Q = opts.theta_samples > 0 ? opts.theta_samples : 4 * (2 * N + 1);
        Transport T = grid_transport(model, grid, N, t, Q, opts.tol);
        out.grid_h = grid.spacing();
        auto res = filtered_power(T, gdiag, 0, start(T, [&](int r) {
                                      return 2 * std::atanh(std::abs(grid.nodes()[r]));
                                  }), opts);
        out.norm = res.norm;
        out.iterations = res.iterations;
        out.sector_norms.push_back(res.norm);
    }
    out.ratio = out.bound_value > 0 ? out.norm / out.bound_value : 0.0;
    return out;
}

double circle_weyl_sum(double lambda, double theta) {
    if (lambda < 0) return 0.0;
    double s = 0;
    const int top = static_cast<int>(std::floor(std::sqrt(lambda)));
    for (int n = -top - 1; n <= top + 1; ++n)
        if (double(n) * n <= lambda) s += std::norm(std::polar(kInvSqrt2Pi, n * theta));
    return s;
}

double vertical_mode_tail(const SurfaceModel& model, const std::function<cplx(cplx, double)>& u, cplx x, double t,
                          int cutoff, int M, double tol) {
    if (M < 2 * cutoff + 2) throw Aliasing("too few fiber samples for the cutoff");
    std::vector<cplx> in(M), out(M);
    for (int k = 0; k < M; ++k) {
        PhasePoint f = geodesic_flow(model, PhasePoint{x, kTwoPi * k / M}, -t, tol);
        in[k] = u(f.z, f.theta);
    }
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    double total = 0, tail = 0;
    for (int k = 0; k < M; ++k) {
        int n = k <= M / 2 ? k : k - M;
        double e = std::norm(out[k]);
        total += e;
        if (std::abs(n) > cutoff) tail += e;
    }
    return total > 0 ? tail / total : 0.0;
}

}  // namespace hyperlab
