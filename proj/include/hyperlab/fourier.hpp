#pragma once

#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "hyperlab/spherical.hpp"

namespace hyperlab {

// Function on the unit tangent bundle over a ball grid, stored per node as
// coefficients of the fiber modes e^{i n theta}/sqrt(2 pi), |n| <= N.
struct PhaseGridFunction {
    const BallGrid* grid = nullptr;
    int N = 0;
    Eigen::MatrixXcd coeffs;  // rows: nodes, column n + N

    cplx coefficient(std::size_t node, int n) const { return coeffs(node, n + N); }
    double norm() const;  // L^2 with the grid weights and the fiber measure
    // value at a phase point; interp_order 1 (bilinear) or 3 (cubic)
    cplx evaluate(cplx z, double theta, int interp_order = 3) const;
};

// samples(i, k) = u(node_i, 2 pi k / M). Requires M >= 2N + 2.
PhaseGridFunction fiber_transform(const BallGrid& grid, const Eigen::MatrixXcd& samples, int N);
Eigen::MatrixXcd inverse_fiber_transform(const PhaseGridFunction& u, int M);

using Profile = std::function<double(double)>;
// smooth, even, 1 on [-2, 2], vanishing outside (-4, 4)
double plateau_profile(double s);
Profile scaled_plateau(double support);  // 1 on [-support/2, support/2], zero beyond support

// u_n <- g(h^2 n^2) u_n
PhaseGridFunction vertical_filter(const PhaseGridFunction& u, const Profile& g, double h);
// largest |n| with g(h^2 n^2) != 0
int filter_bandwidth(const Profile& g, double h);

struct PullbackOptions {
    int interp_order = 3;
    double max_step = 1.0;  // the flow time is split into steps no longer than this
    int theta_samples = 0;  // fiber samples per node, 0 means 4N + 4
    bool dirichlet = false;  // feet outside the grid ball read zero instead of throwing
    double tol = 1e-10;
};
// Semi-Lagrangian e^{-tX}: (e^{-tX}u)(xi) = u(phi_{-t} xi).
PhaseGridFunction pullback_flow(const SurfaceModel& model, const PhaseGridFunction& u, double t,
                                const PullbackOptions& opts = {});

struct FilteredNormOptions {
    double dr = 0.1;          // radial spacing of the sector path
    int max_sector = 4;       // rotation sectors 0..max_sector are searched
    bool force_generic = false;
    double grid_h = 0.1;      // ball grid spacing of the generic path
    int theta_samples = 0;    // generic path fiber samples, 0 means 4(2N+1)
    double tol = 1e-10;
    int max_iterations = 500;
    double rel_change = 1e-4;
};
struct FilteredNorm {
    double norm = 0;
    double bound_value = 0;  // (1 + 1/h) times the spherical mean norm estimate
    double ratio = 0;        // norm / bound_value
    int iterations = 0;
    int modes = 0;           // fiber modes kept, 2N + 1
    double grid_h = 0;
    int best_sector = 0;
    std::vector<double> sector_norms;
};
// |g(h^2 Delta_V) e^{-tX} g(h^2 Delta_V)| by power iteration on the discrete
// operator and its weighted adjoint, with Dirichlet truncation to B(o, R).
FilteredNorm filtered_norm(const SurfaceModel& model, const Profile& g, double h, double t, double R,
                           const FilteredNormOptions& opts = {});

// sum over n^2 <= lambda of |e^{i n theta}/sqrt(2 pi)|^2
double circle_weyl_sum(double lambda, double theta);

// Fraction of the fiber L^2 mass of (e^{-tX}u)(x, .) above |n| = cutoff,
// from M equally spaced fiber samples.
double vertical_mode_tail(const SurfaceModel& model, const std::function<cplx(cplx, double)>& u, cplx x,
                          double t, int cutoff, int M, double tol = 1e-10);

}  // namespace hyperlab
