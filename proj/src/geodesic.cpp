#include "hyperlab/geodesic.hpp"

#include <boost/numeric/odeint.hpp>

namespace hyperlab {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, 9>;  // x, y, theta, j1, dj1, j2, dj2, u, int u

PhasePoint ChartPoint::absolute() const { return deck_transform(chart, local); }

PhasePoint deck_transform(const Mobius& g, const PhasePoint& p) {
    return {g.apply(p.z), g.push_angle(p.z, p.theta)};
}

ChartPoint to_chart(const SurfaceModel& model, const PhasePoint& p) {
    if (std::norm(p.z) >= 1.0) throw PointOutsideDisk("phase point");
    ChartPoint c;
    if (model.is_perturbed()) {
        auto red = model.group()->reduce(p.z);
        c.chart = red.g;
    } else {
        c.chart = Mobius::translate_to(p.z);
    }
    c.local = deck_transform(c.chart.inverse(), p);
    return c;
}

namespace {

struct Rhs {
    const SurfaceModel& model;
    bool jacobi, riccati;
    void operator()(const State& s, State& ds, double) const {
        cplx z(s[0], s[1]);
        if (!(std::norm(z) < 1.0)) { ds.fill(std::numeric_limits<double>::quiet_NaN()); return; }
        auto L = model.local(z);
        double e = std::exp(-L.sigma), c = std::cos(s[2]), sn = std::sin(s[2]);
        ds[0] = e * c;
        ds[1] = e * sn;
        ds[2] = e * (L.sy * c - L.sx * sn);
        if (jacobi) {
            ds[3] = s[4]; ds[4] = -L.K * s[3];
            ds[5] = s[6]; ds[6] = -L.K * s[5];
        } else {
            ds[3] = ds[4] = ds[5] = ds[6] = 0;
        }
        if (riccati) {
            ds[7] = -L.K - s[7] * s[7];
            ds[8] = s[7];
        } else {
            ds[7] = ds[8] = 0;
        }
    }
};

bool finite(const State& s) {
    for (double v : s)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

FlowResult integrate_flow(const SurfaceModel& model, const ChartPoint& start, double t, const FlowRequest& req) {
    FlowResult out;
    out.point = start;
    State s{start.local.z.real(), start.local.z.imag(), start.local.theta, req.jac1.j, req.jac1.dj,
            req.jac2.j, req.jac2.dj, req.u0, 0.0};
    Rhs rhs{model, req.jacobi, req.riccati};
    auto stepper = odeint::make_controlled(1e-4 * req.tol, 1e-4 * req.tol, odeint::runge_kutta_fehlberg78<State>());
    const double sign = t >= 0 ? 1.0 : -1.0;
    const double max_step = 0.5;
    const double recenter = model.is_perturbed() ? std::tanh(model.recenter_radius() / 2) : 0.5;
    double now = 0, dt = sign * std::min(0.1, std::abs(t));
    int rejects = 0;
    while (sign * (t - now) > 1e-15 * std::max(1.0, std::abs(t))) {
        if (std::abs(dt) > max_step) dt = sign * max_step;
        if (sign * (now + dt - t) > 0) dt = t - now;
        State backup = s;
        double now_backup = now;
        auto res = stepper.try_step(rhs, s, now, dt);
        if (res == odeint::fail || !finite(s)) {
            if (res != odeint::fail) { s = backup; now = now_backup; dt *= 0.25; }
            if (++rejects > 200 || std::abs(dt) < 1e-13)
                throw StepFailure("adaptive control cannot meet tolerance " + std::to_string(req.tol));
            continue;
        }
        rejects = 0;
        ++out.steps;
        if (req.riccati && (s[7] < req.u_lo || s[7] > req.u_hi))
            throw RiccatiBlowup("u = " + std::to_string(s[7]) + " left the admissible band");
        cplx z(s[0], s[1]);
        if (std::abs(z) > recenter) {
            ChartPoint moved = to_chart(model, PhasePoint{z, s[2]});
            out.point.chart = out.point.chart * moved.chart;
            s[0] = moved.local.z.real();
            s[1] = moved.local.z.imag();
            s[2] = moved.local.theta;
        }
    }
    out.point.local = PhasePoint{cplx(s[0], s[1]), wrap_angle(s[2])};
    out.jac1 = {s[3], s[4]};
    out.jac2 = {s[5], s[6]};
    out.u = s[7];
    out.u_integral = s[8];
    return out;
}

PhasePoint mobius_flow(double kappa, const PhasePoint& p, double t) {
    if (std::norm(p.z) >= 1.0) throw PointOutsideDisk("mobius_flow");
    Mobius M = Mobius::translate_to(p.z);
    double tau = kappa * t;
    PhasePoint local{std::polar(std::tanh(tau / 2), p.theta), p.theta};
    if (tau < 0) local.z = -std::polar(std::tanh(-tau / 2), p.theta);
    return deck_transform(M, local);
}

PhasePoint integrate_geodesic(const SurfaceModel& model, const PhasePoint& p, double t, double tol) {
    FlowRequest req;
    req.tol = tol;
    return integrate_flow(model, to_chart(model, p), t, req).point.absolute();
}

PhasePoint geodesic_flow(const SurfaceModel& model, const PhasePoint& p, double t, double tol) {
    if (!(tol > 0)) throw StepFailure("tolerance must be positive");
    if (model.is_constant_curvature()) return mobius_flow(model.kappa(), p, t);
    return integrate_geodesic(model, p, t, tol);
}

JacobiState jacobi_transport(const SurfaceModel& model, const PhasePoint& p, double t, const JacobiState& init,
                             double tol) {
    if (!std::isfinite(init.j) || !std::isfinite(init.dj)) throw StepFailure("non-finite Jacobi data");
    FlowRequest req;
    req.tol = tol;
    req.jacobi = true;
    req.jac1 = init;
    return integrate_flow(model, to_chart(model, p), t, req).jac1;
}

double unstable_riccati(const SurfaceModel& model, const PhasePoint& p, double burn_in, double tol) {
    if (!model.is_perturbed()) return model.kappa();
    // The Riccati solution started at u0 at time -burn_in equals j'/j for the
    // Jacobi field with (j, j')(-burn_in) = (1, u0). Propagating a Jacobi basis
    // backward from p gives that field without re-integrating the (chaotic)
    // orbit forward.
    FlowRequest req;
    req.tol = tol;
    req.jacobi = true;
    req.jac1 = {1.0, 0.0};
    req.jac2 = {0.0, 1.0};
    FlowResult fr = integrate_flow(model, to_chart(model, p), -burn_in, req);
    const double a = fr.jac1.j, b = fr.jac2.j, c = fr.jac1.dj, d = fr.jac2.dj;
    const double u0 = model.kappa_max();
    const double j = d - b * u0, dj = -c + a * u0;
    const double u = dj / j;
    if (!(u >= 0.0 && u <= 2.0 * model.kappa_max()))
        throw RiccatiBlowup("u = " + std::to_string(u) + " left the admissible band");
    return u;
}

Connection hyperbolic_connect(cplx x, cplx y) {
    Mobius M = Mobius::translate_to(x);
    cplx w = M.inverse().apply(y);
    Connection c;
    c.distance = 2.0 * std::atanh(std::abs(w));
    c.direction = std::abs(w) > 0 ? wrap_angle(std::arg(w)) : 0.0;
    return c;
}

Connection connect(const SurfaceModel& model, cplx x, cplx y, double tol) {
    if (std::norm(x) >= 1.0 || std::norm(y) >= 1.0) throw PointOutsideDisk("connect");
    Connection seed = hyperbolic_connect(x, y);
    if (model.is_constant_curvature()) {
        seed.distance /= model.kappa();
        return seed;
    }
    if (std::abs(x - y) == 0.0) return {0.0, 0.0, 0.0};
    ChartPoint base = to_chart(model, PhasePoint{x, 0.0});
    const Mobius to_local = base.chart.inverse();
    auto attempt = [&](double d, double th, Connection& out) {
        for (int it = 0; it < 60; ++it) {
            ChartPoint start = base;
            start.local.theta = to_local.push_angle(x, th);
            FlowRequest req;
            req.tol = tol;
            req.jacobi = true;
            req.jac1 = {0.0, 1.0};
            FlowResult fr = integrate_flow(model, start, d, req);
            const Mobius& C = fr.point.chart;
            cplx y_loc = C.inverse().apply(y);
            cplx zl = fr.point.local.z;
            cplx r = zl - y_loc;
            double abs_res = std::abs(fr.point.absolute().z - y);
            if (std::abs(r) < 1e-12 || (abs_res < 1e-11 && it > 0)) {
                out = {d, wrap_angle(th), abs_res};
                return true;
            }
            double e = std::exp(-model.local(zl).sigma);
            cplx vel = e * std::polar(1.0, fr.point.local.theta);
            cplx nrm = fr.jac1.j * vel * cplx(0, 1);
            double a11 = vel.real(), a12 = nrm.real(), a21 = vel.imag(), a22 = nrm.imag();
            double det = a11 * a22 - a12 * a21;
            if (std::abs(det) < 1e-300) return false;
            double dd = (-r.real() * a22 + r.imag() * a12) / det;
            double dth = (-a11 * r.imag() + a21 * r.real()) / det;
            // stalled at the integrator noise floor
            if (abs_res < 1e-9 && std::abs(dd) < 1e-8 && std::abs(dth) < 1e-8) {
                out = {d, wrap_angle(th), abs_res};
                return true;
            }
            double scale = std::max({1.0, std::abs(dd) / 1.0, std::abs(dth) / 0.3});
            d += dd / scale;
            th += dth / scale;
            if (d < 0) { d = -d; th += kPi; }
        }
        return false;
    };
    Connection out;
    if (attempt(seed.distance, seed.direction, out) && out.residual <= 1e-8) return out;
    // angle scan around the seed, then Newton again
    double best_th = seed.direction, best = 1e300;
    for (int k = -32; k <= 32; ++k) {
        double th = seed.direction + 0.6 * k / 32.0;
        PhasePoint e = integrate_geodesic(model, PhasePoint{x, th}, seed.distance, 1e-8);
        double dist = disk_distance(e.z, y);
        if (dist < best) { best = dist; best_th = th; }
    }
    if (attempt(seed.distance, best_th, out) && out.residual <= 1e-8) return out;
    throw NoConvergence("connect: shooting did not converge");
}

double distance(const SurfaceModel& model, cplx x, cplx y) {
    if (model.is_constant_curvature()) return disk_distance(x, y) / model.kappa();
    return connect(model, x, y).distance;
}

double phase_distance(const SurfaceModel& model, const PhasePoint& p, const PhasePoint& q) {
    ChartPoint cp = to_chart(model, p);
    Mobius inv = cp.chart.inverse();
    PhasePoint a = cp.local, b = deck_transform(inv, q);
    cplx mid = 0.5 * (a.z + b.z);
    auto L = model.local(mid);
    double dx = b.z.real() - a.z.real(), dy = b.z.imag() - a.z.imag();
    double dth = angle_diff(b.theta, a.theta);
    double base2 = std::exp(2 * L.sigma) * (dx * dx + dy * dy);
    double vert = dth + L.sx * dy - L.sy * dx;
    return std::sqrt(base2 + vert * vert);
}

}  // namespace hyperlab
