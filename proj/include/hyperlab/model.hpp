#pragma once

#include <memory>
#include <vector>

#include "hyperlab/fuchsian.hpp"

namespace hyperlab {

// Compactly supported bump with value 1 at 0, vanishing for |s| >= 1.
struct Bump {
    static double value(double s);
    // value, first and second derivative in s
    static void eval(double s, double& b, double& db, double& ddb);
};

// Metric e^{2 sigma}|dz|^2 on the disk: either the constant-curvature metric
// with K = -kappa^2, or e^{2 phi} times the hyperbolic metric where phi is a
// Gamma-periodic sum of bumps.
class SurfaceModel {
public:
    static SurfaceModel constant(double kappa);
    static SurfaceModel perturbed(const FuchsianGroup& group, double epsilon, double bump_radius = 1.5,
                                  cplx bump_center = 0.0);

    bool is_perturbed() const { return group_ != nullptr; }
    // exactly constant curvature (constant model, or perturbation with epsilon = 0)
    bool is_constant_curvature() const { return !is_perturbed() || epsilon_ == 0.0; }
    double kappa() const { return kappa_; }  // curvature is -kappa^2 when constant
    double epsilon() const { return epsilon_; }
    double bump_radius() const { return bump_radius_; }
    cplx bump_center() const { return bump_center_; }
    const FuchsianGroup* group() const { return group_.get(); }
    std::shared_ptr<const FuchsianGroup> group_ptr() const { return group_; }

    // square roots of the extreme values of |K| over the surface
    double kappa_min() const { return kappa_min_; }
    double kappa_max() const { return kappa_max_; }

    struct Local {
        double sigma, sx, sy;  // log conformal factor and its Euclidean gradient
        double K;              // Gauss curvature
    };
    // Local metric data. For perturbed models z must lie in the chart region
    // (hyperbolic distance <= chart_radius() from the origin).
    Local local(cplx z) const;
    double chart_radius() const { return chart_radius_; }
    // hyperbolic radius beyond which integrators move back into the domain
    double recenter_radius() const { return recenter_radius_; }

    double curvature_at(cplx z) const;
    double phi_at(cplx z) const;  // conformal exponent relative to the hyperbolic metric

private:
    SurfaceModel() = default;
    void sample_curvature_brackets();

    double kappa_ = 1.0;
    std::shared_ptr<const FuchsianGroup> group_;
    double epsilon_ = 0.0, bump_radius_ = 1.0;
    cplx bump_center_ = 0.0;
    std::vector<cplx> bump_points_;  // orbit of the bump centre near the chart region
    double chart_radius_ = 1e300, recenter_radius_ = 1e300;
    double kappa_min_ = 1.0, kappa_max_ = 1.0;
};

}  // namespace hyperlab
