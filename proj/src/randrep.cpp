#include "hyperlab/randrep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include <boost/math/distributions/chi_squared.hpp>

#include "hyperlab/fuchsian.hpp"

namespace hyperlab {

using boost::multiprecision::cpp_int;

Permutation compose(const Permutation& p, const Permutation& q) {
    Permutation r(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) r[j] = p[q[j]];
    return r;
}

Permutation invert(const Permutation& p) {
    Permutation r(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) r[p[j]] = static_cast<int>(j);
    return r;
}

bool is_identity(const Permutation& p) {
    for (std::size_t j = 0; j < p.size(); ++j)
        if (p[j] != static_cast<int>(j)) return false;
    return true;
}

Word surface_relation(int genus) {
    Word w;
    for (int i = 0; i < genus; ++i) {
        int a = 2 * i + 1, b = 2 * i + 2;
        w.insert(w.end(), {a, b, -a, -b});
    }
    return w;
}

Permutation PermutationHom::word_image(const Word& w) const {
    Permutation r(n);
    std::iota(r.begin(), r.end(), 0);
    for (int l : w) {
        int k = std::abs(l) - 1;
        if (k < 0 || k >= rank()) throw InvalidGroup("letter " + std::to_string(l) + " outside the generators");
        const Permutation& p = images[k];
        Permutation next(n);
        if (l > 0) {
            for (int j = 0; j < n; ++j) next[j] = r[p[j]];
        } else {
            for (int j = 0; j < n; ++j) next[p[j]] = r[j];  // r o p^{-1}
        }
        r.swap(next);
    }
    return r;
}

bool PermutationHom::satisfies_relation() const {
    if (genus == 0) return true;
    return is_identity(word_image(surface_relation(genus)));
}

namespace {

Permutation random_permutation(int n, std::mt19937_64& rng) {
    Permutation p(n);
    std::iota(p.begin(), p.end(), 0);
    std::shuffle(p.begin(), p.end(), rng);
    return p;
}

}  // namespace

PermutationHom sample_hom_free(int n, int rank, std::uint64_t seed) {
    if (n < 1 || rank < 1) throw ConfigError("sample_hom_free needs n >= 1 and rank >= 1");
    std::mt19937_64 rng(seed);
    PermutationHom hom{n, 0, {}, seed};
    for (int i = 0; i < rank; ++i) hom.images.push_back(random_permutation(n, rng));
    return hom;
}

PermutationHom sample_hom_surface(int n, int genus, std::uint64_t seed, std::uint64_t max_rejects) {
    if (n < 1 || genus < 1) throw ConfigError("sample_hom_surface needs n >= 1 and genus >= 1");
    std::mt19937_64 rng(seed);
    PermutationHom hom{n, genus, {}, seed};
    const Word rel = surface_relation(genus);
    for (std::uint64_t attempt = 0; attempt <= max_rejects; ++attempt) {
        hom.images.clear();
        for (int i = 0; i < 2 * genus; ++i) hom.images.push_back(random_permutation(n, rng));
        if (is_identity(hom.word_image(rel))) return hom;
    }
    throw RejectionBudgetExceeded("no surface relation hit after " + std::to_string(max_rejects) +
                                  " rejections (n = " + std::to_string(n) + ")");
}

std::vector<std::vector<int>> partitions(int n) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    auto rec = [&](auto&& self, int rest, int max_part) -> void {
        if (rest == 0) {
            out.push_back(cur);
            return;
        }
        for (int k = std::min(rest, max_part); k >= 1; --k) {
            cur.push_back(k);
            self(self, rest - k, k);
            cur.pop_back();
        }
    };
    rec(rec, n, n);
    return out;
}

cpp_int hook_dimension(const std::vector<int>& lambda) {
    int n = std::accumulate(lambda.begin(), lambda.end(), 0);
    cpp_int num = 1, den = 1;
    for (int k = 2; k <= n; ++k) num *= k;
    for (std::size_t i = 0; i < lambda.size(); ++i)
        for (int j = 0; j < lambda[i]; ++j) {
            int arm = lambda[i] - j - 1;
            int leg = 0;
            for (std::size_t k = i + 1; k < lambda.size() && lambda[k] > j; ++k) ++leg;
            den *= arm + leg + 1;
        }
    return num / den;
}

cpp_int hom_count_surface(int n, int genus) {
    if (n < 1 || n > 20 || genus < 0) throw ConfigError("hom_count_surface needs 1 <= n <= 20 and genus >= 0");
    cpp_int fact = 1;
    for (int k = 2; k <= n; ++k) fact *= k;
    cpp_int total = 0;
    if (genus == 0) {
        for (const auto& lambda : partitions(n)) {
            cpp_int d = hook_dimension(lambda);
            total += d * d;
        }
        return total / fact;
    }
    for (const auto& lambda : partitions(n)) {
        cpp_int q = fact / hook_dimension(lambda);
        cpp_int term = fact;
        for (int k = 0; k < 2 * genus - 2; ++k) term *= q;
        total += term;
    }
    return total;
}

// ---------------------------------------------------------------------------

Word free_reduce(const Word& w) {
    Word r;
    for (int l : w) {
        if (l == 0) throw ConfigError("letter 0 in word");
        if (!r.empty() && r.back() == -l)
            r.pop_back();
        else
            r.push_back(l);
    }
    return r;
}

GroupAlgebraElement GroupAlgebraElement::delta(const Word& w, cplx c) {
    GroupAlgebraElement e;
    e.add(w, c);
    return e;
}

GroupAlgebraElement GroupAlgebraElement::adjacency(int generators) {
    GroupAlgebraElement e;
    for (int i = 1; i <= generators; ++i) {
        e.add({i}, 1.0);
        e.add({-i}, 1.0);
    }
    return e;
}

void GroupAlgebraElement::add(const Word& w, cplx c) {
    Word r = free_reduce(w);
    cplx& slot = terms_[r];
    slot += c;
    if (slot == cplx(0.0)) terms_.erase(r);
}

bool GroupAlgebraElement::self_adjoint(double tol) const {
    for (const auto& [w, c] : terms_) {
        auto it = terms_.find(inverse_word(w));
        cplx other = it == terms_.end() ? cplx(0.0) : it->second;
        if (std::abs(other - std::conj(c)) > tol) return false;
    }
    return true;
}

GroupAlgebraElement GroupAlgebraElement::adjoint() const {
    GroupAlgebraElement e;
    for (const auto& [w, c] : terms_) e.add(inverse_word(w), std::conj(c));
    return e;
}

double GroupAlgebraElement::l1_norm() const {
    double s = 0;
    for (const auto& [w, c] : terms_) s += std::abs(c);
    return s;
}

int GroupAlgebraElement::max_length() const {
    int m = 0;
    for (const auto& [w, c] : terms_) m = std::max(m, static_cast<int>(w.size()));
    return m;
}

// ---------------------------------------------------------------------------

namespace {

void require_zero_sum(const Eigen::VectorXcd& x) {
    double scale = std::max(1.0, x.cwiseAbs().sum());
    if (std::abs(x.sum()) > 1e-12 * scale) throw NotZeroSum("coordinate sum " + std::to_string(std::abs(x.sum())));
}

// rho(w) with the word images precomputed
struct StdOperator {
    int n = 0;
    std::vector<std::pair<Permutation, cplx>> terms;

    StdOperator(const PermutationHom& hom, const GroupAlgebraElement& w) : n(hom.n) {
        for (const auto& [word, c] : w.terms()) terms.emplace_back(hom.word_image(word), c);
    }
    // y[p(j)] += c x[j]
    Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const {
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
        for (const auto& [p, c] : terms)
            for (int j = 0; j < n; ++j) y[p[j]] += c * x[j];
        return y;
    }
    Eigen::VectorXcd apply_adjoint(const Eigen::VectorXcd& x) const {
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
        for (const auto& [p, c] : terms)
            for (int j = 0; j < n; ++j) y[j] += std::conj(c) * x[p[j]];
        return y;
    }
};

void project_zero_sum(Eigen::VectorXcd& x) { x.array() -= x.mean(); }

Eigen::VectorXcd random_vector(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Eigen::VectorXcd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = cplx(g(rng), g(rng));
    return x;
}

using LinearMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

struct RitzResult {
    Eigen::VectorXd values;  // ascending
    Eigen::MatrixXcd vectors;  // Ritz vectors, only with full reorthogonalisation
    int steps = 0;
    bool converged = false;
    bool exhausted = false;  // Krylov space became invariant
};

// Hermitian Lanczos from x0. With full reorthogonalisation the basis is kept
// and Ritz vectors are returned; otherwise the three-term recurrence is used.
// Convergence: the extreme Ritz values of interest move less than tol
// (relative) between checks.
RitzResult lanczos(const LinearMap& op, Eigen::VectorXcd x0, int max_steps, double tol, bool full_reorth,
                   const std::function<void(Eigen::VectorXcd&)>& project, int track_top, bool track_abs) {
    RitzResult res;
    if (project) project(x0);
    double nrm = x0.norm();
    if (nrm == 0) {
        res.exhausted = true;
        res.converged = true;
        return res;
    }
    Eigen::VectorXcd q = x0 / nrm, q_prev = Eigen::VectorXcd::Zero(x0.size());
    std::vector<double> alpha, beta;
    Eigen::MatrixXcd basis;
    if (full_reorth) basis.resize(x0.size(), 0);
    double beta_prev = 0;
    std::vector<double> last;
    int stable = 0;
    auto ritz_values = [&](bool vectors, Eigen::MatrixXd* evecs) {
        const int m = static_cast<int>(alpha.size());
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
        if (evecs) *evecs = es.eigenvectors();
        return Eigen::VectorXd(es.eigenvalues());
    };
    auto tracked = [&](const Eigen::VectorXd& ev) {
        std::vector<double> t;
        const int m = static_cast<int>(ev.size());
        if (track_abs) {
            t.push_back(std::max(std::abs(ev[0]), std::abs(ev[m - 1])));
        } else {
            for (int i = 0; i < std::min(track_top, m); ++i) t.push_back(ev[m - 1 - i]);
        }
        return t;
    };
    for (int step = 0; step < max_steps; ++step) {
        if (full_reorth) {
            basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
            basis.col(basis.cols() - 1) = q;
        }
        Eigen::VectorXcd v = op(q);
        if (project) project(v);
        double a = q.dot(v).real();
        v -= a * q + beta_prev * q_prev;
        if (full_reorth) {
            for (int pass = 0; pass < 2; ++pass) v -= basis * (basis.adjoint() * v);
        }
        alpha.push_back(a);
        double b = v.norm();
        res.steps = step + 1;
        bool invariant = b <= 1e-12 * std::max(1.0, std::abs(a)) || (full_reorth && basis.cols() >= x0.size());
        if (invariant || step % 5 == 4 || step + 1 == max_steps) {
            Eigen::VectorXd ev = ritz_values(false, nullptr);
            auto t = tracked(ev);
            if (invariant) {
                res.exhausted = true;
                res.converged = true;
            } else if (last.size() == t.size()) {
                double change = 0, scale = 1e-300;
                for (std::size_t i = 0; i < t.size(); ++i) {
                    change = std::max(change, std::abs(t[i] - last[i]));
                    scale = std::max(scale, std::abs(t[i]));
                }
                stable = change <= tol * scale ? stable + 1 : 0;
                if (stable >= 2) res.converged = true;
            }
            last = t;
            if (res.converged) break;
        }
        beta.push_back(b);
        q_prev = q;
        q = v / b;
        beta_prev = b;
    }
    if (beta.size() == alpha.size()) beta.pop_back();
    Eigen::MatrixXd evecs;
    res.values = ritz_values(full_reorth, full_reorth ? &evecs : nullptr);
    if (full_reorth) res.vectors = basis.leftCols(alpha.size()) * evecs.cast<cplx>();
    return res;
}

}  // namespace

Eigen::VectorXcd apply_std(const PermutationHom& hom, const Word& w, const Eigen::VectorXcd& x) {
    return apply_std(hom, GroupAlgebraElement::delta(w), x);
}

Eigen::VectorXcd apply_std(const PermutationHom& hom, const GroupAlgebraElement& w, const Eigen::VectorXcd& x) {
    if (x.size() != hom.n) throw ConfigError("vector length differs from the degree");
    require_zero_sum(x);
    return StdOperator(hom, w).apply(x);
}

RepNorm rep_norm(const GroupAlgebraElement& w, const PermutationHom& hom, int iters, double tol, std::uint64_t seed) {
    if (w.max_length() > 32) throw ConfigError("rep_norm supports words of length <= 32");
    RepNorm out;
    if (hom.n <= 1 || w.terms().empty()) return out;
    StdOperator A(hom, w);
    const bool hermitian = w.self_adjoint();
    LinearMap op = hermitian ? LinearMap([&](const Eigen::VectorXcd& x) { return A.apply(x); })
                             : LinearMap([&](const Eigen::VectorXcd& x) { return A.apply_adjoint(A.apply(x)); });
    const int steps = std::min(iters, hom.n - 1);
    for (int restart = 0; restart <= 5; ++restart) {
        RitzResult r = lanczos(op, random_vector(hom.n, seed + 7919ULL * restart), steps, tol, hom.n <= 4000,
                               project_zero_sum, 1, hermitian);
        out.iterations += r.steps;
        out.restarts = restart;
        if (r.converged || r.steps >= hom.n - 1) {
            const auto& v = r.values;
            double top = v.size() ? std::max(std::abs(v[0]), std::abs(v[v.size() - 1])) : 0.0;
            out.norm = hermitian ? top : std::sqrt(std::max(0.0, top));
            return out;
        }
    }
    throw NoConvergence("rep_norm did not settle after 5 restarts");
}

std::vector<double> new_spectrum(const PermutationHom& hom, const GroupAlgebraElement& w, int k, double tol) {
    if (!w.self_adjoint()) throw ConfigError("new_spectrum needs a self-adjoint element");
    std::vector<double> out;
    if (hom.n <= 1 || k <= 0) return out;
    k = std::min(k, hom.n - 1);
    StdOperator A(hom, w);
    std::vector<Eigen::VectorXcd> locked;
    auto project = [&](Eigen::VectorXcd& x) {
        project_zero_sum(x);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& u : locked) x -= u * u.dot(x);
    };
    LinearMap op = [&](const Eigen::VectorXcd& x) { return A.apply(x); };
    for (int attempt = 0; static_cast<int>(out.size()) < k; ++attempt) {
        const int room = hom.n - 1 - static_cast<int>(locked.size());
        RitzResult r = lanczos(op, random_vector(hom.n, 1000003ULL + attempt), room, tol, true, project, 1, false);
        if (!r.converged && r.steps < room) {
            if (attempt > 5 * k + 5) throw NoConvergence("new_spectrum Lanczos stalled");
            continue;
        }
        const Eigen::Index m = r.values.size();
        if (m == 0) break;
        if (r.exhausted && r.steps >= room) {
            // the complement is spanned: every Ritz pair is exact
            for (Eigen::Index i = m - 1; i >= 0 && static_cast<int>(out.size()) < k; --i) out.push_back(r.values[i]);
            break;
        }
        out.push_back(r.values[m - 1]);
        Eigen::VectorXcd u = r.vectors.col(m - 1);
        project(u);
        locked.push_back(u / u.norm());
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

std::vector<double> permutation_spectrum(const PermutationHom& hom, const GroupAlgebraElement& w) {
    StdOperator A(hom, w);
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(hom.n, hom.n);
    for (const auto& [p, c] : A.terms)
        for (int j = 0; j < hom.n; ++j) M(p[j], j) += c;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M, Eigen::EigenvaluesOnly);
    std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + hom.n);
    std::sort(v.begin(), v.end(), std::greater<>());
    return v;
}

// ---------------------------------------------------------------------------

namespace {

// Cayley ball in BFS order with the right-multiplication table
// next[g * L + letter_index] (or -1 beyond the built radius).
struct CayleyBall {
    int letters = 0;
    std::vector<int> depth;
    std::vector<int> next;
    int index(int l) const { return l > 0 ? l - 1 : letters / 2 - l - 1; }
};

CayleyBall free_ball(int rank, int R, std::size_t cap) {
    double size = 1, sphere = 2.0 * rank;
    for (int k = 1; k <= R; ++k, sphere *= 2.0 * rank - 1) size += sphere;
    if (size > static_cast<double>(cap))
        throw BallTooLarge("free ball of radius " + std::to_string(R) + " has " + std::to_string(size) + " elements");
    CayleyBall B;
    B.letters = 2 * rank;
    const std::size_t N = static_cast<std::size_t>(size);
    B.depth.reserve(N);
    B.next.assign(N * B.letters, -1);
    std::vector<int> last{0};
    B.depth.push_back(0);
    for (std::size_t head = 0; head < B.depth.size(); ++head) {
        if (B.depth[head] == R) continue;
        for (int li = 0; li < B.letters; ++li) {
            int l = li < rank ? li + 1 : -(li - rank + 1);
            if (last[head] == -l) continue;
            int child = static_cast<int>(B.depth.size());
            B.depth.push_back(B.depth[head] + 1);
            last.push_back(l);
            B.next[head * B.letters + li] = child;
            B.next[static_cast<std::size_t>(child) * B.letters + B.index(-l)] = static_cast<int>(head);
        }
    }
    return B;
}

// Genus-2 surface group through the Bolza side pairings. Elements are told
// apart by the orbit point g(0): distinct elements move it at least the
// systole apart, so a coarse tolerance is exact.
CayleyBall bolza_ball(int R, std::size_t cap) {
    FuchsianGroup G = FuchsianGroup::bolza();
    const std::vector<int> ls = G.letters();
    CayleyBall B;
    B.letters = static_cast<int>(ls.size());
    std::vector<int> to_slot(B.letters);
    for (int i = 0; i < B.letters; ++i) to_slot[i] = B.index(ls[i]);
    struct SU11 { cplx a, b; };  // [[a, b], [conj b, conj a]]
    std::vector<SU11> gens;
    for (int l : ls) {
        const Mobius& m = G.letter(l);
        gens.push_back({m.a, m.b});
    }
    auto mul = [](const SU11& x, const SU11& y) {
        return SU11{x.a * y.a + x.b * std::conj(y.b), x.a * y.b + x.b * std::conj(y.a)};
    };
    auto same = [](const SU11& x, const SU11& y) {
        // |(x^{-1} y)_{11}| = cosh(d(x0, y0) / 2)
        return std::abs(std::conj(x.a) * y.a - x.b * std::conj(y.b)) < 1.5;
    };
    constexpr double delta = 1e-3;
    auto keys = [&](const SU11& x) {
        double rho = 2.0 * std::asinh(std::abs(x.b));
        double alpha = wrap_angle(std::arg(x.a * x.b));
        std::vector<std::int64_t> out;
        auto i0 = static_cast<std::int64_t>(std::floor(rho));
        std::vector<std::int64_t> is{i0};
        if (rho - i0 < delta && i0 > 0) is.push_back(i0 - 1);
        if (rho - i0 > 1 - delta) is.push_back(i0 + 1);
        for (auto i : is) {
            if (i == 0) {  // only the identity lies this close; its angle is noise
                out.push_back(0);
                continue;
            }
            double scale = std::sinh(std::max<double>(static_cast<double>(i), 1.0));
            double s = alpha * scale;
            auto jmax = static_cast<std::int64_t>(std::floor(kTwoPi * scale));
            auto j0 = std::min(static_cast<std::int64_t>(std::floor(s)), jmax);
            out.push_back((i << 42) ^ j0);
            if (s - j0 < delta) out.push_back((i << 42) ^ (j0 == 0 ? jmax : j0 - 1));
            if (s - j0 > 1 - delta) out.push_back((i << 42) ^ (j0 + 1 > jmax ? 0 : j0 + 1));
            if (kTwoPi * scale - s < delta) out.push_back(i << 42);
        }
        return out;
    };
    std::vector<SU11> elems{{1.0, 0.0}};
    std::unordered_multimap<std::int64_t, int> table;
    table.emplace(keys(elems[0]).front(), 0);
    B.depth.push_back(0);
    B.next.assign(B.letters, -1);
    for (std::size_t head = 0; head < elems.size(); ++head) {
        const bool outer = B.depth[head] == R;  // links back into the ball only
        for (int li = 0; li < B.letters; ++li) {
            SU11 h = mul(elems[head], gens[li]);
            int found = -1;
            for (auto k : keys(h)) {
                auto [lo, hi] = table.equal_range(k);
                for (auto it = lo; it != hi && found < 0; ++it)
                    if (same(elems[it->second], h)) found = it->second;
                if (found >= 0) break;
            }
            if (found < 0 && outer) continue;
            if (found < 0) {
                if (elems.size() >= cap) throw BallTooLarge("surface ball exceeds cap " + std::to_string(cap));
                found = static_cast<int>(elems.size());
                elems.push_back(h);
                B.depth.push_back(B.depth[head] + 1);
                B.next.resize(B.next.size() + B.letters, -1);
                table.emplace(keys(h).front(), found);
            }
            B.next[head * B.letters + to_slot[li]] = found;
        }
    }
    return B;
}

// Extreme singular value of the compression of the right-regular action to
// the first `size` elements of the ball.
double compressed_norm(const CayleyBall& B, const std::vector<std::pair<Word, cplx>>& terms, int R, bool hermitian) {
    std::size_t size = 0;
    while (size < B.depth.size() && B.depth[size] <= R) ++size;
    const std::size_t T = terms.size();
    std::vector<int> target(size * T, -1);
    for (std::size_t g = 0; g < size; ++g)
        for (std::size_t t = 0; t < T; ++t) {
            long idx = static_cast<long>(g);
            for (int l : terms[t].first) {
                idx = B.next[idx * B.letters + B.index(l)];
                if (idx < 0) break;
            }
            if (idx >= 0 && static_cast<std::size_t>(idx) < size) target[g * T + t] = static_cast<int>(idx);
        }
    // (A x)(g) = sum_t c_t x(g u_t)
    auto apply = [&](const Eigen::VectorXcd& x) {
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(size);
        for (std::size_t g = 0; g < size; ++g) {
            cplx s = 0;
            for (std::size_t t = 0; t < T; ++t) {
                int j = target[g * T + t];
                if (j >= 0) s += terms[t].second * x[j];
            }
            y[g] = s;
        }
        return y;
    };
    auto apply_adjoint = [&](const Eigen::VectorXcd& x) {
        Eigen::VectorXcd y = Eigen::VectorXcd::Zero(size);
        for (std::size_t g = 0; g < size; ++g)
            for (std::size_t t = 0; t < T; ++t) {
                int j = target[g * T + t];
                if (j >= 0) y[j] += std::conj(terms[t].second) * x[g];
            }
        return y;
    };
    LinearMap op = hermitian ? LinearMap(apply)
                             : LinearMap([&](const Eigen::VectorXcd& x) { return apply_adjoint(apply(x)); });
    Eigen::VectorXcd x0(size);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (std::size_t i = 0; i < size; ++i) x0[i] = u(rng);
    const int steps = static_cast<int>(std::min<std::size_t>(size, 3000));
    RitzResult r = lanczos(op, x0, steps, 1e-11, size <= 2000, nullptr, 1, hermitian);
    if (r.values.size() == 0) return 0.0;
    double top = std::max(std::abs(r.values[0]), std::abs(r.values[r.values.size() - 1]));
    return hermitian ? top : std::sqrt(std::max(0.0, top));
}

}  // namespace

BallNorm regular_norm_ball(const GroupAlgebraElement& w, GroupKind kind, int generators, int R, std::size_t cap) {
    if (R < 0) throw ConfigError("ball radius must be nonnegative");
    BallNorm out;
    if (w.terms().empty()) return out;
    int extra = 0;
    CayleyBall B;
    if (kind == GroupKind::Free) {
        if (generators < 1) throw InvalidGroup("free group rank must be positive");
        B = free_ball(generators, R, cap);
    } else {
        if (generators != 2) throw InvalidGroup("surface-group balls are realised for genus 2 only");
        // a path g -> g u leaves B_R by at most half the word length
        extra = w.max_length() / 2;
        B = bolza_ball(R + extra, cap);
    }
    for (const auto& [word, c] : w.terms())
        for (int l : word)
            if (std::abs(l) > B.letters / 2) throw InvalidGroup("letter " + std::to_string(l) + " outside the generators");
    std::vector<std::pair<Word, cplx>> terms(w.terms().begin(), w.terms().end());
    const bool hermitian = w.self_adjoint();
    out.norm = compressed_norm(B, terms, R, hermitian);
    double prev = R >= 2 ? compressed_norm(B, terms, R - 2, hermitian) : 0.0;
    out.increment = out.norm - prev;
    out.ball_size = static_cast<std::size_t>(std::count_if(B.depth.begin(), B.depth.end(), [&](int d) { return d <= R; }));
    return out;
}

// ---------------------------------------------------------------------------

SchreierReport schreier_diagnostics(const PermutationHom& hom) {
    const int n = hom.n, r = hom.rank();
    constexpr int kCap = 7;
    SchreierReport rep;
    rep.n = n;
    // neighbour along letter slot s: s < r is a_s, otherwise a_{s-r}^{-1}
    std::vector<Permutation> step;
    for (const auto& p : hom.images) step.push_back(p);
    for (const auto& p : hom.images) step.push_back(invert(p));
    auto inverse_slot = [r](int s) { return s < r ? s + r : s - r; };

    std::vector<int> stamp(n, -1);
    rep.treelike_radius.assign(n, kCap);
    for (int v = 0; v < n; ++v) {
        stamp[v] = v;
        std::vector<std::pair<int, int>> frontier{{v, -1}}, next;
        for (int d = 1; d <= kCap; ++d) {
            next.clear();
            bool collision = false;
            for (auto [x, in] : frontier) {
                for (int s = 0; s < 2 * r && !collision; ++s) {
                    if (in >= 0 && s == inverse_slot(in)) continue;
                    int y = step[s][x];
                    if (stamp[y] == v) {
                        collision = true;
                    } else {
                        stamp[y] = v;
                        next.emplace_back(y, s);
                    }
                }
                if (collision) break;
            }
            if (collision) {
                rep.treelike_radius[v] = d - 1;
                break;
            }
            frontier.swap(next);
        }
    }
    rep.treelike_fraction.assign(6, 0.0);
    for (int R = 1; R <= 6; ++R)
        rep.treelike_fraction[R - 1] =
            static_cast<double>(std::count_if(rep.treelike_radius.begin(), rep.treelike_radius.end(),
                                              [R](int x) { return x >= R; })) / n;
    std::vector<int> sorted = rep.treelike_radius;
    std::sort(sorted.begin(), sorted.end());
    rep.median_radius = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    std::vector<int> dist(n);
    std::vector<int> queue(n);
    for (int v = 0; v < n; ++v) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[v] = 0;
        int head = 0, tail = 0;
        queue[tail++] = v;
        while (head < tail) {
            int x = queue[head++];
            for (const auto& p : step) {
                int y = p[x];
                if (dist[y] < 0) {
                    dist[y] = dist[x] + 1;
                    queue[tail++] = y;
                }
            }
        }
        if (tail < n) rep.connected = false;
        rep.diameter = std::max(rep.diameter, dist[queue[tail - 1]]);
    }
    return rep;
}

std::pair<cplx, cplx> resonance_map(double lambda) {
    if (!(lambda >= 0)) throw OutOfDomain("resonance_map needs lambda >= 0");
    if (lambda < 0.25) {
        double s = std::sqrt(0.25 - lambda);
        return {cplx(-0.5 + s, 0.0), cplx(-0.5 - s, 0.0)};
    }
    double s = std::sqrt(lambda - 0.25);
    return {cplx(-0.5, s), cplx(-0.5, -s)};
}

SpectralReport strong_convergence_trials(const GroupAlgebraElement& w, GroupKind kind, int generators, int n,
                                         int trials, std::uint64_t seed0, double norm_regular, double eps,
                                         int word_id) {
    SpectralReport rep;
    rep.n = n;
    rep.trials = trials;
    rep.word_id = word_id;
    rep.norm_regular = norm_regular;
    const bool hermitian = w.self_adjoint();
    int accepted = 0;
    double gap_sum = 0;
    for (int t = 0; t < trials; ++t) {
        std::uint64_t seed = seed0 + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(t + 1);
        PermutationHom hom = kind == GroupKind::Free ? sample_hom_free(n, generators, seed)
                                                     : sample_hom_surface(n, generators, seed);
        double norm = rep_norm(w, hom, 1000, 1e-9, seed ^ 0xABCDEFULL).norm;
        rep.seeds.push_back(seed);
        rep.norm_rep.push_back(norm);
        rep.top_new.push_back(hermitian && n > 1 ? new_spectrum(hom, w, 1)[0] : std::nan(""));
        gap_sum += norm - norm_regular;
        if (norm <= norm_regular + eps) ++accepted;
    }
    rep.gap_mean = trials ? gap_sum / trials : 0.0;
    rep.aas_fraction = trials ? static_cast<double>(accepted) / trials : 0.0;
    return rep;
}

std::pair<double, double> chi_square_uniform(const std::vector<std::uint64_t>& counts) {
    if (counts.size() < 2) throw ConfigError("chi-square test needs at least two cells");
    double total = 0;
    for (auto c : counts) total += static_cast<double>(c);
    const double expected = total / counts.size();
    double stat = 0;
    for (auto c : counts) stat += (c - expected) * (c - expected) / expected;
    boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    return {stat, boost::math::cdf(boost::math::complement(dist, stat))};
}

}  // namespace hyperlab
