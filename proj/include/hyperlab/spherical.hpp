#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hyperlab/geodesic.hpp"

namespace hyperlab {

// Jacobian of the exponential map: J(x, exp_x(t v)) for the direction with
// Euclidean angle v at x.
double radial_jacobian(const SurfaceModel& model, cplx x, double v, double t, double tol = 1e-10);
// J(x, y) along the connecting geodesic
double jacobian(const SurfaceModel& model, cplx x, cplx y, double tol = 1e-10);
// 1 when d(x, y) <= 1, J(x, y) otherwise
double modified_jacobian(const SurfaceModel& model, cplx x, cplx y, double tol = 1e-10);

struct SphereQuadrature {
    cplx center;
    double radius = 0;
    std::vector<double> directions;
    std::vector<cplx> endpoints;
    std::vector<double> jacobians;
};
SphereQuadrature sphere_quadrature(const SurfaceModel& model, cplx x, double t, int n, double tol = 1e-10);

// Polar grid on the ball B(o, R): rings at radii (i + 1/2) h_r with roughly
// arc-length-h spacing along each ring.
class BallGrid {
public:
    BallGrid(const SurfaceModel& model, double R, double h);

    double radius() const { return R_; }
    double spacing() const { return h_; }
    std::size_t size() const { return nodes_.size(); }
    const std::vector<cplx>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }

    struct Stencil {
        int idx[4];
        double w[4];
        int count = 0;
    };
    // bilinear interpolation stencil; empty outside the ball
    Stencil stencil(cplx z) const;
    struct WideStencil {
        int idx[16];
        double w[16];
        int count = 0;
    };
    // cubic Lagrange in radius and angle, bilinear next to the centre and the rim
    WideStencil cubic_stencil(cplx z) const;
    bool contains(cplx z) const;

private:
    double R_, h_, hr_, scale_ = 1;
    std::vector<int> ring_start_, ring_size_;
    std::vector<double> ring_radius_;
    std::vector<cplx> nodes_;
    std::vector<double> weights_;
};

struct BallGridFunction {
    const BallGrid* grid = nullptr;
    std::vector<double> values;
    double operator()(cplx z) const;  // throws OutOfDomain outside the ball
};

using Observable = std::function<double(cplx)>;

// Direction average (1/N) sum f(pi phi_t(x, v_i)).
double apply_spherical_mean(const SurfaceModel& model, const Observable& f, cplx x, double t, int n_directions = 64,
                            double tol = 1e-10);
double apply_spherical_mean(const SurfaceModel& model, const BallGridFunction& f, cplx x, double t,
                            int n_directions = 64, double tol = 1e-10);
// Surface form (1/2pi) \int_{S(x,t)} J^{-1} f dsigma with the arclength measured
// on the computed sphere.
double apply_spherical_mean_surface(const SurfaceModel& model, const Observable& f, cplx x, double t,
                                    int n_directions = 256, double tol = 1e-10);

// Norm of the spherical mean operator on L^2 of hyperbolic d-space.
double exact_norm_hyperbolic(int d, double t);

struct GridSpec {
    double h = 0.05;       // grid spacing
    int directions = 96;   // sphere quadrature size
    double tol = 1e-8;     // flow tolerance for numerical endpoints
    int max_iterations = 500;
    double rel_change = 1e-4;
    bool force_generic = false;  // use the 2D grid even when a radial reduction applies
};
struct NormEstimate {
    double norm = 0;
    int iterations = 0;
    double R = 0, h = 0;
    std::size_t nodes = 0;
};
// Power iteration on L_t^* L_t restricted to B(o, R) with Dirichlet
// truncation. Constant curvature uses the radial reduction (the top
// eigenfunction is rotation invariant), other models the polar grid.
NormEstimate sm_norm_power(const SurfaceModel& model, double t, double R, const GridSpec& spec = {});

struct McEstimate {
    double value = 0;
    double stderr_ = 0;
};
// <L_t f, 1_B> / (|f| |1_B|) for f = 1_{d(x0,.) in [t-1,t+1]} J(x0,.)^{-1} and B = B(x0, 1).
McEstimate sm_norm_lower(const SurfaceModel& model, cplx x0, double t, int samples, std::uint64_t seed,
                         double tol = 1e-8);

// log of the annulus integral of exp(-q int psi_u) over A(o, r, c)
McEstimate annulus_log_integral(const SurfaceModel& model, double q, double r, double c, int samples,
                                std::uint64_t seed, double tol = 1e-8);
struct AnnulusPressure {
    double slope = 0, slope_stderr = 0;  // log I(r+1) - log I(r)
    double raw = 0;                      // (1/r) log I(r)
};
AnnulusPressure annulus_pressure(const SurfaceModel& model, double q, double r, double c, int samples,
                                 std::uint64_t seed, double tol = 1e-8);

struct CriticalExponent {
    double s = 0;
    double stderr_ = 0;                    // spread between the last two shells
    std::vector<double> shell_exponents;  // root for each consecutive shell pair
};
// Growth exponent of word-length shells of sum exp(-s d(o, g o) - q int psi_u).
CriticalExponent poincare_critical_exponent(const SurfaceModel& model, const FuchsianGroup& group, double q,
                                            int max_word_length, double tol = 1e-8);
// partial Poincare sum over word length <= L at exponent s
double poincare_partial_sum(const SurfaceModel& model, const FuchsianGroup& group, double q, double s, int L,
                            double tol = 1e-8);

// Diameter of the inscribed triangle (points where the incircle of the
// comparison triangle touches the sides).
double gromov_delta(const SurfaceModel& model, cplx x, cplx y, cplx z, double tol = 1e-10);

struct DivergenceFit {
    double rate = 0;
    double prefactor = 0;  // max of separation(t) * e^{rate (r - t)}
    double end_separation = 0;
};
// Separation of phi_t(x, v) and phi_t(x, w) for t in [0, r]; fits
// separation ~ e^{-rate (r - t)}.
DivergenceFit geodesic_divergence(const SurfaceModel& model, cplx x, double v, double w, double r, double eta,
                                  int samples = 64, double tol = 1e-10);

struct Correlation {
    double value = 0, value_stderr = 0;
    double norm = 0, norm_stderr = 0;
    std::size_t orbit_terms = 0;
};
// <L_t f~, chi> and |f~| for f~ = sum J(x0, g x0)^{-1} chi(g^{-1} .) over the
// orbit annulus t - D <= d(x0, g x0) <= t + D; chi is a smooth bump of radius D + 1.
Correlation correlation_lower_bound(const SurfaceModel& model, const FuchsianGroup& group, cplx x0, double t,
                                    int samples, std::uint64_t seed, std::size_t cap = 4'000'000,
                                    double tol = 1e-8);

// Both iterated integrals of h(x, y) over {d(x, y) = t}, integrated in x over B(o, R).
struct SwapPair {
    double forward = 0, backward = 0;
};
SwapPair swap_integrals(const SurfaceModel& model, const std::function<double(cplx, cplx)>& h, double R, double t,
                        int radial_nodes = 64, int n_directions = 64, double tol = 1e-10);

// Smallest C with log J(x,y) - log J(x,z) <= C d(y,z) + log C on sampled triples.
double temperness_constant(const SurfaceModel& model, int samples, std::uint64_t seed, double max_distance = 8.0,
                           double tol = 1e-8);

// Largest d(x_{-j}, y_{+j}) over sampled pairs at distance t (see the
// splitting of [x, y] at the shell index j).
double split_point_distance(const SurfaceModel& model, double t, int samples, std::uint64_t seed,
                            double tol = 1e-8);

}  // namespace hyperlab
