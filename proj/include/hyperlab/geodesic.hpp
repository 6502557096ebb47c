#pragma once

#include <array>

#include "hyperlab/model.hpp"

namespace hyperlab {

struct PhasePoint {
    cplx z;
    double theta = 0;  // Euclidean angle of the unit tangent in disk coordinates
};

struct JacobiState {
    double j = 0, dj = 0;
};

// A phase point expressed in a chart: absolute = chart(local).
struct ChartPoint {
    Mobius chart;
    PhasePoint local;
    PhasePoint absolute() const;
};

PhasePoint deck_transform(const Mobius& g, const PhasePoint& p);

// Move a phase point into the preferred chart of the model (the fundamental
// domain for perturbed models, the origin otherwise).
ChartPoint to_chart(const SurfaceModel& model, const PhasePoint& p);

struct FlowRequest {
    double tol = 1e-10;
    bool jacobi = false;          // transport jac1 and jac2
    bool riccati = false;         // integrate u' = -K - u^2 and its integral
    JacobiState jac1{}, jac2{};
    double u0 = 0;
    double u_lo = -1e300, u_hi = 1e300;  // Riccati admissible band
};

struct FlowResult {
    ChartPoint point;
    JacobiState jac1, jac2;
    double u = 0, u_integral = 0;
    int steps = 0;
};

// Adaptive Runge-Kutta-Fehlberg 7(8) integration of the geodesic equations
// with deck-transformation re-centering. t may be negative.
FlowResult integrate_flow(const SurfaceModel& model, const ChartPoint& start, double t, const FlowRequest& req);

// Exact flow for the metric of constant curvature -kappa^2.
PhasePoint mobius_flow(double kappa, const PhasePoint& p, double t);

// Numerical flow regardless of model.
PhasePoint integrate_geodesic(const SurfaceModel& model, const PhasePoint& p, double t, double tol = 1e-10);

// Closed form for constant curvature, numerical integration otherwise.
PhasePoint geodesic_flow(const SurfaceModel& model, const PhasePoint& p, double t, double tol = 1e-10);

JacobiState jacobi_transport(const SurfaceModel& model, const PhasePoint& p, double t, const JacobiState& init,
                             double tol = 1e-10);

double unstable_riccati(const SurfaceModel& model, const PhasePoint& p, double burn_in, double tol = 1e-10);

struct Connection {
    double distance = 0;
    double direction = 0;
    double residual = 0;
};
Connection connect(const SurfaceModel& model, cplx x, cplx y, double tol = 1e-10);

// Hyperbolic (kappa = 1) closed forms used as seeds and oracles.
Connection hyperbolic_connect(cplx x, cplx y);

// Approximate Sasaki distance between nearby phase points.
double phase_distance(const SurfaceModel& model, const PhasePoint& p, const PhasePoint& q);

// Metric distance: exact for constant curvature, via connect otherwise.
double distance(const SurfaceModel& model, cplx x, cplx y);

}  // namespace hyperlab
