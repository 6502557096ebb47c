#include "hyperlab/fuchsian.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

namespace hyperlab {

namespace {

Word default_relation(int genus) {
    Word r;
    for (int k = 0; k < genus; ++k) {
        int a = 2 * k + 1, b = 2 * k + 2;
        r.insert(r.end(), {a, b, -a, -b});
    }
    return r;
}

}  // namespace

FuchsianGroup::FuchsianGroup(int genus, std::vector<std::array<double, 4>> generators, Word relation)
    : genus_(genus), halfplane_(std::move(generators)), relation_(std::move(relation)) {
    if (genus_ < 1) throw InvalidGroup("genus must be positive");
    if (static_cast<int>(halfplane_.size()) != 2 * genus_)
        throw InvalidGroup("expected " + std::to_string(2 * genus_) + " generators");
    if (relation_.empty()) relation_ = default_relation(genus_);
    for (std::size_t i = 0; i < halfplane_.size(); ++i) {
        const auto& m = halfplane_[i];
        double det = m[0] * m[3] - m[1] * m[2];
        if (std::abs(det - 1.0) > 1e-12)
            throw InvalidGroup("generator " + std::to_string(i + 1) + " has det " + std::to_string(det));
        if (std::abs(m[0] + m[3]) <= 2.0)
            throw InvalidGroup("generator " + std::to_string(i + 1) + " is not hyperbolic");
        disk_.push_back(Mobius::from_halfplane(m));
        disk_inv_.push_back(disk_.back().inverse());
    }
    for (int l : relation_)
        if (l == 0 || std::abs(l) > rank()) throw InvalidGroup("relation letter out of range");
    Mobius r = word_matrix(relation_);
    double err = std::min(std::max({std::abs(r.a - 1.0), std::abs(r.b), std::abs(r.c), std::abs(r.d - 1.0)}),
                          std::max({std::abs(r.a + 1.0), std::abs(r.b), std::abs(r.c), std::abs(r.d + 1.0)}));
    if (err > 1e-9) throw InvalidGroup("relation product is not +-identity (error " + std::to_string(err) + ")");

    for (int l : letters()) images_.push_back(letter(l).apply(0.0));

    // boundary distance along each ray from o, maximised over the direction
    auto boundary = [&](double alpha) {
        double best = 1e300;
        for (cplx w : images_) {
            double D = 2.0 * std::atanh(std::abs(w));
            double c = std::cos(alpha - std::arg(w));
            if (c <= 0) continue;
            double arg = (std::cosh(D) - 1.0) / (std::sinh(D) * c);
            if (arg < 1.0) best = std::min(best, std::atanh(arg));
        }
        return best;
    };
    const int n = 4096;
    double best = 0, best_alpha = 0;
    for (int i = 0; i < n; ++i) {
        double a = kTwoPi * i / n;
        double r = boundary(a);
        if (r > best) { best = r; best_alpha = a; }
    }
    double lo = best_alpha - kTwoPi / n, hi = best_alpha + kTwoPi / n;
    for (int it = 0; it < 200; ++it) {
        double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (boundary(m1) < boundary(m2)) lo = m1; else hi = m2;
    }
    domain_radius_ = std::max(best, boundary(0.5 * (lo + hi)));
    if (!(domain_radius_ < 1e299)) throw InvalidGroup("generators do not bound a compact domain");
}

FuchsianGroup FuchsianGroup::bolza() {
    const double r_in = std::acosh(1.0 / std::tan(kPi / 8));
    std::vector<std::array<double, 4>> gens;
    for (int k = 0; k < 4; ++k) {
        Mobius m = Mobius::rotation(k * kPi / 4) * Mobius::axis_translation(2 * r_in) *
                   Mobius::rotation(-k * kPi / 4);
        auto h = m.to_halfplane();
        // restore det = 1 exactly to the printed precision
        double det = h[0] * h[3] - h[1] * h[2];
        double s = 1.0 / std::sqrt(det);
        for (double& x : h) x *= s;
        gens.push_back(h);
    }
    return FuchsianGroup(2, gens, Word{1, -2, 3, -4, -1, 2, -3, 4});
}

FuchsianGroup FuchsianGroup::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int genus = -1;
    std::vector<std::array<double, 4>> gens;
    Word rel;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) continue;
        if (head == "genus") {
            if (!(ls >> genus)) throw InvalidGroup("line " + std::to_string(lineno) + ": bad genus");
        } else if (head == "relation") {
            int l;
            while (ls >> l) rel.push_back(l);
        } else {
            std::istringstream row(line);
            std::array<double, 4> m{};
            for (double& x : m)
                if (!(row >> x)) throw InvalidGroup("line " + std::to_string(lineno) + ": expected four reals");
            gens.push_back(m);
        }
    }
    if (genus < 0) throw InvalidGroup("missing 'genus' header");
    return FuchsianGroup(genus, gens, rel);
}

FuchsianGroup FuchsianGroup::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw InvalidGroup("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

std::string FuchsianGroup::to_text() const {
    std::ostringstream out;
    out.precision(17);
    out << "genus " << genus_ << "\n";
    for (const auto& m : halfplane_) out << m[0] << " " << m[1] << " " << m[2] << " " << m[3] << "\n";
    out << "relation";
    for (int l : relation_) out << " " << l;
    out << "\n";
    return out.str();
}

Mobius FuchsianGroup::word_matrix(const Word& w) const {
    Mobius m;
    for (int l : w) m = m * letter(l);
    return m;
}

std::vector<int> FuchsianGroup::letters() const {
    std::vector<int> out;
    for (int i = 1; i <= rank(); ++i) { out.push_back(i); out.push_back(-i); }
    return out;
}

bool FuchsianGroup::in_domain(cplx z, double slack) const {
    double c0 = disk_cosh_distance(z, 0.0);
    for (cplx w : images_)
        if (disk_cosh_distance(z, w) < c0 * (1.0 - slack)) return false;
    return true;
}

FuchsianGroup::Reduction FuchsianGroup::reduce(cplx z) const {
    if (std::norm(z) >= 1.0) throw PointOutsideDisk("reduce");
    Reduction r{z, Mobius::identity(), {}};
    const auto ls = letters();
    for (int iter = 0; iter < 100000; ++iter) {
        double c0 = disk_cosh_distance(r.z, 0.0);
        int best = -1;
        double bc = c0 * (1.0 - 1e-13);
        for (std::size_t i = 0; i < images_.size(); ++i) {
            double c = disk_cosh_distance(r.z, images_[i]);
            if (c < bc) { bc = c; best = static_cast<int>(i); }
        }
        if (best < 0) return r;
        const Mobius& g = letter(ls[best]);
        r.z = g.inverse().apply(r.z);
        r.g = r.g * g;
        r.word.push_back(ls[best]);
    }
    throw NoConvergence("domain reduction did not terminate");
}

double FuchsianGroup::min_displacement(cplx c) const {
    GroupBall ball = elements_within_word_length(*this, 3, 1 << 20);
    double best = 1e300;
    for (std::size_t i = 1; i < ball.elements.size(); ++i)
        best = std::min(best, disk_distance(c, ball.elements[i].apply(c)));
    return best;
}

// ---------------------------------------------------------------------------

std::vector<std::int64_t> OrbitPointSet::candidate_keys(cplx w) const {
    constexpr double delta = 1e-6;
    double rho = 2.0 * std::atanh(std::min(std::abs(w), 1.0 - 1e-16));
    double alpha = wrap_angle(std::arg(w));
    double scale = std::sinh(std::max(rho, 1e-3));
    double s = alpha * scale;
    auto i0 = static_cast<std::int64_t>(std::floor(rho));
    auto j0 = static_cast<std::int64_t>(std::floor(s));
    auto jmax = static_cast<std::int64_t>(std::floor(kTwoPi * scale));
    std::vector<std::int64_t> is{i0}, js{j0};
    if (rho - i0 < delta && i0 > 0) is.push_back(i0 - 1);
    if (rho - i0 > 1 - delta) is.push_back(i0 + 1);
    if (s - j0 < delta) js.push_back(j0 == 0 ? jmax : j0 - 1);
    if (s - j0 > 1 - delta) js.push_back(j0 + 1 > jmax ? 0 : j0 + 1);
    if (kTwoPi * scale - s < delta) js.push_back(0);
    std::vector<std::int64_t> keys;
    for (auto i : is)
        for (auto j : js) keys.push_back((i << 34) ^ j);
    return keys;
}

int OrbitPointSet::find(cplx w) const {
    for (auto k : candidate_keys(w)) {
        auto [lo, hi] = map_.equal_range(k);
        for (auto it = lo; it != hi; ++it)
            if (disk_distance(points_[it->second], w) < 1e-6) return it->second;
    }
    return -1;
}

int OrbitPointSet::insert(cplx w) {
    int idx = find(w);
    if (idx >= 0) return idx;
    idx = static_cast<int>(points_.size());
    points_.push_back(w);
    map_.emplace(candidate_keys(w).front(), idx);
    return idx;
}

Word GroupBall::word_of(int idx) const {
    Word w;
    while (idx > 0) {
        w.push_back(last_letter[idx]);
        idx = parent[idx];
    }
    std::reverse(w.begin(), w.end());
    return w;
}

namespace {

template <class Accept>
GroupBall bfs_ball(const FuchsianGroup& G, std::size_t cap, Accept accept,
                   std::vector<std::vector<int>>* neighbours) {
    GroupBall ball;
    OrbitPointSet set;
    const auto ls = G.letters();
    ball.elements.push_back(Mobius::identity());
    ball.parent.push_back(-1);
    ball.last_letter.push_back(0);
    ball.word_length.push_back(0);
    set.insert(0.0);
    if (neighbours) neighbours->assign(1, std::vector<int>(ls.size(), -1));
    for (std::size_t head = 0; head < ball.elements.size(); ++head) {
        for (std::size_t li = 0; li < ls.size(); ++li) {
            Mobius h = ball.elements[head] * G.letter(ls[li]);
            int depth = ball.word_length[head] + 1;
            if (!accept(h, depth)) continue;
            cplx w = h.apply(0.0);
            std::size_t before = set.size();
            int idx = set.insert(w);
            if (set.size() > before) {
                if (ball.elements.size() >= cap) throw Overflow("group ball exceeds cap " + std::to_string(cap));
                ball.elements.push_back(h);
                ball.parent.push_back(static_cast<int>(head));
                ball.last_letter.push_back(ls[li]);
                ball.word_length.push_back(depth);
                if (neighbours) neighbours->emplace_back(ls.size(), -1);
            }
            if (neighbours) (*neighbours)[head][li] = idx;
        }
    }
    return ball;
}

}  // namespace

GroupBall elements_within_distance(const FuchsianGroup& G, double radius, std::size_t cap) {
    const double c = std::cosh(radius);
    return bfs_ball(G, cap, [&](const Mobius& h, int) {
        return disk_cosh_distance(h.apply(0.0), 0.0) <= c;
    }, nullptr);
}

GroupBall elements_within_word_length(const FuchsianGroup& G, int L, std::size_t cap,
                                      std::vector<std::vector<int>>* neighbours) {
    return bfs_ball(G, cap, [&](const Mobius&, int depth) { return depth <= L; }, neighbours);
}

}  // namespace hyperlab
