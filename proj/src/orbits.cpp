#include "hyperlab/orbits.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include <Eigen/Dense>

namespace hyperlab {

namespace {

using Vec3 = std::array<double, 3>;

Vec3 hyperboloid(cplx z) {
    double r2 = std::norm(z), w = 1.0 - r2;
    return {(1.0 + r2) / w, 2.0 * z.real() / w, 2.0 * z.imag() / w};
}

// hyperboloid image of a unit tangent vector at z with Euclidean angle theta
Vec3 hyperboloid_tangent(cplx z, double theta) {
    double x = z.real(), y = z.imag(), w = 1.0 - std::norm(z), w2 = w * w;
    cplx v = 0.5 * w * std::polar(1.0, theta);
    double vx = v.real(), vy = v.imag();
    return {4 * x / w2 * vx + 4 * y / w2 * vy, (2 / w + 4 * x * x / w2) * vx + 4 * x * y / w2 * vy,
            4 * x * y / w2 * vx + (2 / w + 4 * y * y / w2) * vy};
}

double lorentz(const Vec3& a, const Vec3& b) { return a[0] * b[0] - a[1] * b[1] - a[2] * b[2]; }

bool same_element(const Mobius& x, const Mobius& y) {
    double scale = 1e-8 * (1.0 + std::abs(x.a) + std::abs(x.b));
    auto diff = [&](double s) {
        return std::abs(x.a - s * y.a) + std::abs(x.b - s * y.b) + std::abs(x.c - s * y.c) + std::abs(x.d - s * y.d);
    };
    return diff(1.0) < scale || diff(-1.0) < scale;
}

int letter_rank(int l) { return 2 * (std::abs(l) - 1) + (l < 0 ? 1 : 0); }

bool word_less(const Word& a, const Word& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](int x, int y) { return letter_rank(x) < letter_rank(y); });
}

}  // namespace

PhasePoint AxisFrame::at(double s) const { return mobius_flow(1.0, PhasePoint{foot, theta}, s); }

AxisFrame axis_frame(const Mobius& h) {
    auto ends = axis_endpoints(h);
    auto [foot, theta] = geodesic_foot_from_origin(ends[0], ends[1]);
    return {foot, theta};
}

AxisSegment axis_segment_in_domain(const FuchsianGroup& G, const Mobius& h) {
    AxisFrame fr = axis_frame(h);
    Vec3 F = hyperboloid(fr.foot), V = hyperboloid_tangent(fr.foot, fr.theta);
    Vec3 N = hyperboloid_tangent(fr.foot, fr.theta + kPi / 2);
    const Vec3 O{1, 0, 0};
    AxisSegment seg{-1e300, 1e300};
    for (int l : G.letters()) {
        Vec3 W = hyperboloid(G.letter(l).apply(0.0));
        double alpha = lorentz(F, W) - lorentz(F, O);
        double beta = lorentz(V, W) - lorentz(V, O);
        // axis along a side: it counts for the tile on its left
        if (std::abs(alpha) < 1e-8 && std::abs(beta) < 1e-8) {
            if (lorentz(N, W) - lorentz(N, O) > 0) continue;
            return {0, 0};
        }
        if (alpha > std::abs(beta)) continue;
        if (alpha <= -std::abs(beta)) return {0, 0};
        double s = std::atanh(-alpha / beta);
        if (beta > 0) seg.lo = std::max(seg.lo, s);
        else seg.hi = std::min(seg.hi, s);
    }
    if (seg.empty()) return {0, 0};
    return seg;
}

CuttingSequence cutting_sequence(const FuchsianGroup& G, const Mobius& h) {
    const double ell = h.translation_length();
    if (!(ell > 0)) throw DegenerateOrbit("element is not hyperbolic");
    std::vector<Mobius> seq;
    std::vector<double> lengths;
    std::vector<Word> steps;
    Mobius c = h;
    for (int iter = 0; iter < 100000; ++iter) {
        AxisSegment seg = axis_segment_in_domain(G, c);
        if (seg.empty() && iter == 0) throw DegenerateOrbit("axis does not cross the domain");
        seq.push_back(c);
        lengths.push_back(seg.length());
        double exit = seg.empty() ? 0.0 : seg.hi;
        PhasePoint a = axis_frame(c).at(exit + 1e-7);
        cplx q = mobius_flow(1.0, PhasePoint{a.z, a.theta + kPi / 2}, 1e-9).z;
        auto red = G.reduce(q);
        c = (red.g.inverse() * c * red.g).normalized();
        steps.push_back(red.word);
        for (std::size_t j = 0; j < seq.size(); ++j) {
            if (!same_element(seq[j], c)) continue;
            CuttingSequence cs;
            for (std::size_t k = j; k < seq.size(); ++k) {
                cs.word.insert(cs.word.end(), steps[k].begin(), steps[k].end());
                cs.primitive_length += lengths[k];
                cs.conjugates.push_back(seq[k]);
            }
            cs.power = static_cast<int>(std::lround(ell / cs.primitive_length));
            return cs;
        }
    }
    throw NoConvergence("cutting sequence did not close");
}

Word canonical_rotation(const Word& w) {
    Word best = w;
    for (std::size_t k = 1; k < w.size(); ++k) {
        Word r(w.begin() + k, w.end());
        r.insert(r.end(), w.begin(), w.begin() + k);
        if (word_less(r, best)) best = r;
    }
    return best;
}

bool is_cyclically_reduced(const Word& w) {
    for (std::size_t i = 0; i + 1 < w.size(); ++i)
        if (w[i] == -w[i + 1]) return false;
    return w.size() < 2 || w.front() != -w.back();
}

bool is_proper_power(const Word& w) {
    const std::size_t n = w.size();
    for (std::size_t p = 1; p < n; ++p) {
        if (n % p) continue;
        bool periodic = true;
        for (std::size_t i = p; i < n && periodic; ++i) periodic = w[i] == w[i - p];
        if (periodic) return true;
    }
    return false;
}

namespace {

// conjugate of h whose axis crosses the domain
Mobius conjugate_into_domain(const FuchsianGroup& G, const Mobius& h) {
    const AxisFrame fr = axis_frame(h);
    const double ell = h.translation_length();
    for (double s = 0.0; s < ell; s += 0.037) {
        PhasePoint a = fr.at(s);
        auto red = G.reduce(mobius_flow(1.0, PhasePoint{a.z, a.theta + kPi / 2}, 1e-9).z);
        Mobius c = (red.g.inverse() * h * red.g).normalized();
        if (axis_segment_in_domain(G, c).length() > 1e-9) return c;
    }
    throw DegenerateOrbit("no conjugate axis crosses the domain");
}

}  // namespace

std::vector<ClassRecord> enumerate_closed_geodesics(const FuchsianGroup& G, double max_length, std::size_t cap) {
    const double R = G.domain_radius();
    const double D = max_length + 2.0 * std::log(std::cosh(R)) + 0.1;
    GroupBall ball = elements_within_distance(G, D, cap);
    OrbitPointSet seen;
    std::vector<int> seen_class;
    std::vector<ClassRecord> out;
    std::vector<Mobius> reps;
    for (std::size_t i = 1; i < ball.elements.size(); ++i) {
        const Mobius& h = ball.elements[i];
        double ell = h.translation_length();
        if (!(ell > 0) || ell > max_length + 1e-9) continue;
        if (seen.find(h.apply(0.0)) >= 0) continue;
        if (axis_segment_in_domain(G, h).length() < 1e-9) continue;
        CuttingSequence cs = cutting_sequence(G, h);
        int existing = -3;
        for (const auto& c : cs.conjugates) {
            int idx = seen.find(c.apply(0.0));
            if (idx >= 0) existing = seen_class[idx];
        }
        int cls = existing != -3 ? existing : (cs.power == 1 ? static_cast<int>(out.size()) : -2);
        for (const auto& c : cs.conjugates) {
            std::size_t before = seen.size();
            int idx = seen.insert(c.apply(0.0));
            if (seen.size() > before) seen_class.push_back(cls);
            (void)idx;
        }
        {
            std::size_t before = seen.size();
            seen.insert(h.apply(0.0));
            if (seen.size() > before) seen_class.push_back(cls);
        }
        if (existing != -3 || cs.power != 1) continue;
        ClassRecord rec;
        rec.word = canonical_rotation(cs.word);
        rec.element = G.word_matrix(rec.word);
        rec.length = ell;
        out.push_back(rec);
        reps.push_back(cs.conjugates.front());
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        int idx = seen.find(reps[i].inverse().apply(0.0));
        if (idx < 0) {
            for (const auto& c : cutting_sequence(G, conjugate_into_domain(G, reps[i].inverse())).conjugates)
                if ((idx = seen.find(c.apply(0.0))) >= 0) break;
        }
        if (idx >= 0 && seen_class[idx] >= 0) out[i].inverse = seen_class[idx];
    }
    std::vector<std::size_t> order(out.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (std::abs(out[a].length - out[b].length) > 1e-9) return out[a].length < out[b].length;
        return word_less(out[a].word, out[b].word);
    });
    std::vector<int> where(out.size());
    for (std::size_t k = 0; k < order.size(); ++k) where[order[k]] = static_cast<int>(k);
    std::vector<ClassRecord> sorted;
    sorted.reserve(out.size());
    for (std::size_t k : order) {
        sorted.push_back(out[k]);
        if (sorted.back().inverse >= 0) sorted.back().inverse = where[sorted.back().inverse];
    }
    return sorted;
}


std::vector<WordClass> enumerate_classes(const FuchsianGroup& G, int max_word_length, std::size_t cap) {
    std::vector<WordClass> out;
    if (max_word_length < 1) return out;
    const auto letters = G.letters();
    std::map<Word, int, decltype(&word_less)> index(&word_less);
    std::vector<Word> kept;
    Word w;
    std::size_t visited = 0;
    // depth-first generation of reduced words
    std::function<void()> rec = [&]() {
        if (!w.empty() && is_cyclically_reduced(w) && canonical_rotation(w) == w && !is_proper_power(w)) {
            if (++visited > cap) throw Overflow("class enumeration exceeds cap");
            Mobius h = conjugate_into_domain(G, G.word_matrix(w));
            if (h.translation_length() > 0) {
                CuttingSequence cs = cutting_sequence(G, h);
                if (cs.power == 1 && canonical_rotation(cs.word) == w) {
                    index[w] = static_cast<int>(kept.size());
                    kept.push_back(w);
                }
            }
        }
        if (static_cast<int>(w.size()) == max_word_length) return;
        for (int l : letters) {
            if (!w.empty() && w.back() == -l) continue;
            w.push_back(l);
            rec();
            w.pop_back();
        }
    };
    rec();
    std::sort(kept.begin(), kept.end(), [](const Word& a, const Word& b) {
        if (a.size() != b.size()) return a.size() < b.size();
        return word_less(a, b);
    });
    index.clear();
    for (std::size_t i = 0; i < kept.size(); ++i) index[kept[i]] = static_cast<int>(i);
    for (const auto& k : kept) {
        WordClass wc{k, -1};
        Mobius hinv = conjugate_into_domain(G, G.word_matrix(k).inverse());
        Word iw = canonical_rotation(cutting_sequence(G, hinv).word);
        auto it = index.find(iw);
        if (it != index.end()) wc.inverse = it->second;
        out.push_back(wc);
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

// integrates the requested quantities once around the orbit, restarting the
// trajectory at each shooting node and carrying the scalar fields across
FlowResult around_orbit(const SurfaceModel& model, const ClosedGeodesic& geo, FlowRequest req) {
    if (geo.nodes.empty()) return integrate_flow(model, to_chart(model, geo.base), geo.length, req);
    FlowResult total;
    for (const auto& node : geo.nodes) {
        FlowResult fr = integrate_flow(model, node, geo.segment_time, req);
        req.jac1 = fr.jac1;
        req.jac2 = fr.jac2;
        req.u0 = fr.u;
        total.jac1 = fr.jac1;
        total.jac2 = fr.jac2;
        total.u = fr.u;
        total.u_integral += fr.u_integral;
        total.steps += fr.steps;
        total.point = fr.point;
    }
    return total;
}

struct PeriodicSplit {
    double u_unstable, u_stable;
};

PeriodicSplit periodic_split(const SurfaceModel& model, const ClosedGeodesic& geo, double tol) {
    FlowRequest req;
    req.tol = tol;
    req.jacobi = true;
    req.jac1 = {1.0, 0.0};
    req.jac2 = {0.0, 1.0};
    FlowResult fr = around_orbit(model, geo, req);
    double a = fr.jac1.j, b = fr.jac2.j, d = fr.jac2.dj;
    double tr = a + d;
    double disc = std::sqrt(std::max(tr * tr - 4.0, 0.0));
    double lu = 0.5 * (tr + (tr >= 0 ? disc : -disc));
    double ls = 1.0 / lu;
    return {(lu - a) / b, (ls - a) / b};
}

std::array<double, 3> phase_mismatch(const PhasePoint& a, const PhasePoint& b) {
    return {a.z.real() - b.z.real(), a.z.imag() - b.z.imag(), angle_diff(a.theta, b.theta)};
}

}  // namespace

ClosedGeodesic close_geodesic(const SurfaceModel& model, const Word& word, const CloseOptions& opt,
                              const FuchsianGroup* group) {
    if (word.empty() || !is_cyclically_reduced(word)) throw NoClosure("word must be nontrivial and cyclically reduced");
    const FuchsianGroup* G = model.is_perturbed() ? model.group() : group;
    if (!G) throw InvalidModel("constant-curvature closure needs a group to evaluate the word");
    const Mobius h = G->word_matrix(word);
    const double ell0 = h.translation_length();
    if (!(ell0 > 0)) throw NoClosure("word is not hyperbolic");
    const AxisFrame frame = axis_frame(h);

    ClosedGeodesic geo;
    geo.word = word;
    if (!model.is_perturbed()) {
        geo.length = ell0 / model.kappa();
        geo.unstable_exponent = ell0;
        geo.base = frame.at(0.0);
        PhasePoint end = mobius_flow(model.kappa(), geo.base, geo.length);
        PhasePoint target = deck_transform(h, geo.base);
        geo.closure_residual = std::max(std::abs(end.z - target.z), std::abs(angle_diff(end.theta, target.theta)));
        return geo;
    }

    // multiple shooting: N nodes on the unperturbed axis, unknowns are the
    // local phase coordinates of every node and the common segment time
    const int N = std::max(1, static_cast<int>(std::ceil(ell0 / opt.segment_length)));
    std::vector<Mobius> charts(N + 1);
    std::vector<PhasePoint> local(N);
    for (int i = 0; i < N; ++i) {
        PhasePoint a = frame.at(ell0 * i / N);
        ChartPoint c = to_chart(model, a);
        charts[i] = c.chart;
        local[i] = c.local;
    }
    charts[N] = h * charts[0];
    double tau = ell0 / N;
    const PhasePoint anchor = local[0];
    double flow_tol = opt.flow_tol;

    auto segment_end = [&](int i, const PhasePoint& start, double t) {
        FlowRequest req;
        req.tol = flow_tol;
        FlowResult fr = integrate_flow(model, ChartPoint{charts[i], start}, t, req);
        return deck_transform(charts[i + 1].inverse() * fr.point.chart, fr.point.local);
    };
    const int n = 3 * N + 1;
    auto perturb = [](PhasePoint p, int k, double d) {
        if (k == 0) p.z += d;
        else if (k == 1) p.z += cplx(0, d);
        else p.theta += d;
        return p;
    };

    std::vector<PhasePoint> ends(N);
    auto evaluate = [&](const std::vector<PhasePoint>& loc, double t, std::vector<PhasePoint>& e) {
        Eigen::VectorXd res(n);
        for (int i = 0; i < N; ++i) {
            e[i] = segment_end(i, loc[i], t);
            auto m = phase_mismatch(e[i], loc[(i + 1) % N]);
            for (int k = 0; k < 3; ++k) res[3 * i + k] = m[k];
        }
        res[3 * N] = (loc[0].z.real() - anchor.z.real()) * std::cos(anchor.theta) +
                     (loc[0].z.imag() - anchor.z.imag()) * std::sin(anchor.theta);
        return res;
    };
    Eigen::VectorXd r = evaluate(local, tau, ends);
    double rn = r.lpNorm<Eigen::Infinity>();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool refresh = true;
    for (int it = 0; it < opt.max_newton && rn > opt.tol && model.epsilon() > 0; ++it) {
        if (refresh) {
            // forward-difference Jacobian, kept while Newton contracts fast
            Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
            const double hs = 1e-7;
            for (int i = 0; i < N; ++i) {
                const int next = (i + 1) % N;
                for (int k = 0; k < 3; ++k) {
                    auto d = phase_mismatch(segment_end(i, perturb(local[i], k, hs), tau), ends[i]);
                    for (int m = 0; m < 3; ++m) J(3 * i + m, 3 * i + k) += d[m] / hs;
                    J(3 * i + k, 3 * next + k) -= 1.0;
                }
                auto d = phase_mismatch(segment_end(i, local[i], tau + hs), ends[i]);
                for (int m = 0; m < 3; ++m) J(3 * i + m, 3 * N) = d[m] / hs;
            }
            J(3 * N, 0) = std::cos(anchor.theta);
            J(3 * N, 1) = std::sin(anchor.theta);
            lu.compute(J);
        }
        Eigen::VectorXd dx = lu.solve(-r);
        if (!dx.allFinite()) throw NoClosure("singular shooting Jacobian");
        double step = 1.0;
        bool improved = false;
        const double before = rn;
        std::vector<PhasePoint> en(N);
        for (int ls = 0; ls < 10 && !improved; ++ls, step *= 0.5) {
            std::vector<PhasePoint> ln(local);
            for (int i = 0; i < N; ++i) {
                ln[i].z += step * cplx(dx[3 * i], dx[3 * i + 1]);
                ln[i].theta += step * dx[3 * i + 2];
            }
            double tn = tau + step * dx[3 * N];
            Eigen::VectorXd rnew;
            try {
                rnew = evaluate(ln, tn, en);
            } catch (const LabError&) {
                continue;
            }
            double nn = rnew.lpNorm<Eigen::Infinity>();
            if (nn < rn) {
                local = ln;
                tau = tn;
                r = rnew;
                rn = nn;
                ends = en;
                improved = true;
            }
        }
        if (improved) {
            refresh = step < 1.0 || rn > 0.1 * before;
            continue;
        }
        if (!refresh) {
            refresh = true;
            continue;
        }
        // stalled at the integration noise floor: one retry with a tighter flow tolerance
        if (flow_tol < opt.flow_tol) break;
        flow_tol = 0.1 * opt.flow_tol;
        r = evaluate(local, tau, ends);
        rn = r.lpNorm<Eigen::Infinity>();
    }
    if (!(rn <= opt.tol) && model.epsilon() > 0)
        throw NoClosure("closure residual " + std::to_string(rn) + " above tolerance");

    geo.length = N * tau;
    geo.segment_time = tau;
    geo.closure_residual = rn;
    for (int i = 0; i < N; ++i) {
        local[i].theta = wrap_angle(local[i].theta);
        geo.nodes.push_back(ChartPoint{charts[i], local[i]});
    }
    geo.base = geo.nodes.front().absolute();
    if (model.epsilon() == 0.0) {
        geo.unstable_exponent = geo.length;
        return geo;
    }
    PeriodicSplit split = periodic_split(model, geo, opt.flow_tol);
    FlowRequest req;
    req.tol = opt.flow_tol;
    req.riccati = true;
    req.u0 = split.u_unstable;
    req.u_lo = 0.0;
    req.u_hi = 2.0 * model.kappa_max();
    geo.unstable_exponent = around_orbit(model, geo, req).u_integral;
    return geo;
}

PoincareData poincare_data(const SurfaceModel& model, const ClosedGeodesic& geo, double tol, double closure_tol) {
    if (!(geo.closure_residual <= closure_tol)) throw NoClosure("orbit is not closed to tolerance");
    PeriodicSplit split = model.is_perturbed() && model.epsilon() > 0 ? periodic_split(model, geo, tol)
                                                                      : PeriodicSplit{model.kappa(), -model.kappa()};
    FlowRequest req;
    req.tol = tol;
    req.jacobi = true;
    req.jac1 = {1.0, split.u_unstable};
    req.jac2 = {1.0, split.u_stable};
    FlowResult fr = around_orbit(model, geo, req);
    // P = M_end * M_0^{-1} with columns the two transported fields
    const double m0det = split.u_stable - split.u_unstable;
    const double e11 = fr.jac1.j, e12 = fr.jac2.j, e21 = fr.jac1.dj, e22 = fr.jac2.dj;
    const double i11 = split.u_stable / m0det, i12 = -1.0 / m0det, i21 = -split.u_unstable / m0det, i22 = 1.0 / m0det;
    PoincareData pd;
    pd.P = {e11 * i11 + e12 * i21, e11 * i12 + e12 * i22, e21 * i11 + e22 * i21, e21 * i12 + e22 * i22};
    pd.det = (e11 * e22 - e12 * e21) / m0det;
    const double tr = pd.P[0] + pd.P[3];
    const double disc = std::sqrt(std::max(tr * tr - 4.0 * pd.det, 0.0));
    const double lu = 0.5 * (std::abs(tr) + disc);
    if (std::abs(lu - 1.0) < 1e-6) throw DegenerateOrbit("Poincare map has eigenvalues on the unit circle");
    pd.lambda = std::log(lu);
    pd.det_term = std::abs(1.0 - tr + pd.det);
    return pd;
}

}  // namespace hyperlab
