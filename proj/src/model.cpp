#include "hyperlab/model.hpp"

#include <algorithm>

namespace hyperlab {

double Bump::value(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

void Bump::eval(double s, double& b, double& db, double& ddb) {
    if (std::abs(s) >= 1.0) { b = db = ddb = 0.0; return; }
    double u = 1.0 - s * s;
    b = std::exp(1.0 - 1.0 / u);
    double f1 = -2.0 * s / (u * u);
    double f2 = -2.0 / (u * u) - 8.0 * s * s / (u * u * u);
    db = b * f1;
    ddb = b * (f1 * f1 + f2);
}

SurfaceModel SurfaceModel::constant(double kappa) {
    if (!(kappa > 0)) throw InvalidModel("kappa must be positive");
    SurfaceModel m;
    m.kappa_ = kappa;
    m.kappa_min_ = m.kappa_max_ = kappa;
    return m;
}

SurfaceModel SurfaceModel::perturbed(const FuchsianGroup& group, double epsilon, double bump_radius,
                                     cplx bump_center) {
    if (!(epsilon >= 0)) throw InvalidModel("epsilon must be non-negative");
    if (!(bump_radius > 0)) throw InvalidModel("bump radius must be positive");
    if (std::norm(bump_center) >= 1.0) throw PointOutsideDisk("bump centre");
    SurfaceModel m;
    m.group_ = std::make_shared<FuchsianGroup>(group);
    m.epsilon_ = epsilon;
    m.bump_radius_ = bump_radius;
    m.bump_center_ = bump_center;
    double sep = group.min_displacement(bump_center);
    if (!(bump_radius < 0.5 * sep))
        throw InvalidModel("bump radius " + std::to_string(bump_radius) + " is not below half the orbit separation " +
                           std::to_string(sep));
    const double R = group.domain_radius();
    m.recenter_radius_ = R + 0.5;
    m.chart_radius_ = R + 1.5;
    double c0 = disk_distance(0.0, bump_center);
    GroupBall ball = elements_within_distance(group, m.chart_radius_ + bump_radius + c0, 1 << 22);
    for (const auto& g : ball.elements) {
        cplx p = g.apply(bump_center);
        if (disk_distance(p, 0.0) <= m.chart_radius_ + bump_radius) m.bump_points_.push_back(p);
    }
    m.sample_curvature_brackets();
    return m;
}

SurfaceModel::Local SurfaceModel::local(cplx z) const {
    const double r2 = std::norm(z);
    if (r2 >= 1.0) throw PointOutsideDisk("local metric");
    const double w = 1.0 - r2;
    Local L;
    L.sigma = std::log(2.0 / w);
    L.sx = 2.0 * z.real() / w;
    L.sy = 2.0 * z.imag() / w;
    if (!is_perturbed()) {
        L.sigma -= std::log(kappa_);
        L.K = -kappa_ * kappa_;
        return L;
    }
    if (epsilon_ == 0.0) { L.K = -1.0; return L; }
    double phi = 0, lap_hyp = 0;
    cplx grad = 0;
    const double r0 = bump_radius_;
    for (cplx p : bump_points_) {
        double wp = 1.0 - std::norm(p);
        double A = std::norm(z - p) / (w * wp);
        double ch = 1.0 + 2.0 * A;
        if (ch >= std::cosh(r0)) continue;
        double d = std::acosh(ch);
        double b, db, ddb;
        Bump::eval(d / r0, b, db, ddb);
        double B1 = db / r0, B2 = ddb / (r0 * r0);
        double g = d < 1e-8 ? -2.0 / (r0 * r0) : B1 / std::sinh(d);
        cplx gradA = (2.0 * (z - p) * w + 2.0 * z * std::norm(z - p)) / (w * w * wp);
        phi += b;
        grad += g * 2.0 * gradA;
        lap_hyp += B2 + ch * g;
    }
    phi *= epsilon_;
    grad *= epsilon_;
    lap_hyp *= epsilon_;
    L.sigma += phi;
    L.sx += grad.real();
    L.sy += grad.imag();
    L.K = std::exp(-2.0 * phi) * (-1.0 - lap_hyp);
    return L;
}

double SurfaceModel::curvature_at(cplx z) const {
    if (std::norm(z) >= 1.0) throw PointOutsideDisk("curvature_at");
    if (!is_perturbed()) return -kappa_ * kappa_;
    if (epsilon_ == 0.0) return -1.0;
    return local(group_->reduce(z).z).K;
}

double SurfaceModel::phi_at(cplx z) const {
    if (std::norm(z) >= 1.0) throw PointOutsideDisk("phi_at");
    if (!is_perturbed()) return 0.0;
    cplx zr = group_->reduce(z).z;
    return local(zr).sigma - std::log(2.0 / (1.0 - std::norm(zr)));
}

void SurfaceModel::sample_curvature_brackets() {
    if (epsilon_ == 0.0) { kappa_min_ = kappa_max_ = 1.0; return; }
    const double R = group_->domain_radius();
    double kmin = 1e300, kmax = 0;
    const int nr = 160, na = 320;
    for (int i = 0; i <= nr; ++i) {
        double rho = R * i / nr;
        double rad = std::tanh(rho / 2);
        for (int j = 0; j < na; ++j) {
            cplx z = std::polar(rad, kTwoPi * (j + 0.5 * (i % 2)) / na);
            double K = local(z).K;
            if (!(K < 0)) throw InvalidModel("sampled curvature " + std::to_string(K) + " is not negative");
            kmin = std::min(kmin, -K);
            kmax = std::max(kmax, -K);
        }
    }
    kappa_min_ = std::sqrt(kmin);
    kappa_max_ = std::sqrt(kmax);
}

}  // namespace hyperlab
