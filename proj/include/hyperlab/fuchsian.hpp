#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyperlab/common.hpp"
#include "hyperlab/mobius.hpp"

namespace hyperlab {

// Cocompact surface group acting on the disk. Generators are stored both as
// real SL(2) matrices (half-plane) and as disk automorphisms.
class FuchsianGroup {
public:
    FuchsianGroup(int genus, std::vector<std::array<double, 4>> generators, Word relation);

    static FuchsianGroup bolza();
    static FuchsianGroup from_text(const std::string& text);
    static FuchsianGroup from_file(const std::string& path);
    std::string to_text() const;

    int genus() const { return genus_; }
    int rank() const { return static_cast<int>(halfplane_.size()); }
    const std::vector<std::array<double, 4>>& generators() const { return halfplane_; }
    const Word& relation() const { return relation_; }

    // disk action of a signed letter
    const Mobius& letter(int l) const { return l > 0 ? disk_[l - 1] : disk_inv_[-l - 1]; }
    Mobius word_matrix(const Word& w) const;
    std::vector<int> letters() const;  // all signed letters

    struct Reduction {
        cplx z;        // point inside the domain
        Mobius g;      // original point = g(z)
        Word word;     // g as a product of letters
    };
    // Greedy reduction into the domain bounded by the bisectors of o and
    // letter(l)(o); this is the Dirichlet domain when the letters are its
    // side pairings (true for the Bolza generators).
    Reduction reduce(cplx z) const;
    bool in_domain(cplx z, double slack = 1e-12) const;
    double domain_radius() const { return domain_radius_; }
    // shortest displacement d(c, g c) over nontrivial g of short word length
    double min_displacement(cplx c) const;

private:
    int genus_;
    std::vector<std::array<double, 4>> halfplane_;
    std::vector<Mobius> disk_, disk_inv_;
    std::vector<cplx> images_;  // letter(l)(0) for each signed letter, indexed by letters()
    Word relation_;
    double domain_radius_ = 0;
};

// Set of group elements keyed by where they send the origin (the action is
// free, so this determines the element).
class OrbitPointSet {
public:
    // index of the element sending 0 to w, or -1
    int find(cplx w) const;
    int insert(cplx w);  // returns new index or existing
    std::size_t size() const { return points_.size(); }
    const std::vector<cplx>& points() const { return points_; }
    void reserve(std::size_t n) { points_.reserve(n); map_.reserve(n); }

private:
    std::vector<std::int64_t> candidate_keys(cplx w) const;
    std::vector<cplx> points_;
    std::unordered_multimap<std::int64_t, int> map_;
};

struct GroupBall {
    std::vector<Mobius> elements;   // elements[0] is the identity
    std::vector<int> parent;        // BFS parent index, -1 for identity
    std::vector<int> last_letter;   // element = parent * letter(last_letter)
    std::vector<int> word_length;   // BFS depth
    Word word_of(int idx) const;
};

// all elements with d(o, g o) <= radius
GroupBall elements_within_distance(const FuchsianGroup& G, double radius, std::size_t cap);
// all elements of word length <= L (with the right-multiplication neighbour
// table when requested)
GroupBall elements_within_word_length(const FuchsianGroup& G, int L, std::size_t cap,
                                      std::vector<std::vector<int>>* neighbours = nullptr);

}  // namespace hyperlab
