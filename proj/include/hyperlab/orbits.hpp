#pragma once

#include <array>
#include <optional>

#include "hyperlab/geodesic.hpp"

namespace hyperlab {

// Portion of the axis of a hyperbolic element inside the domain, in the
// arclength parameter of the axis measured from its point nearest o.
struct AxisSegment {
    double lo = 0, hi = 0;
    bool empty() const { return !(hi > lo); }
    double length() const { return empty() ? 0.0 : hi - lo; }
};

struct AxisFrame {
    cplx foot;     // axis point closest to the origin
    double theta;  // direction of translation at the foot
    PhasePoint at(double s) const;  // unit-speed point on the axis
};
AxisFrame axis_frame(const Mobius& h);
AxisSegment axis_segment_in_domain(const FuchsianGroup& G, const Mobius& h);

// Closed geodesic traced through the domain: the sequence of side pairings
// crossed during one primitive period.
struct CuttingSequence {
    Word word;              // product equals a conjugate of the primitive root
    double primitive_length = 0;
    int power = 1;          // h = root^power
    std::vector<Mobius> conjugates;  // conjugates of h whose axis crosses the domain
};
CuttingSequence cutting_sequence(const FuchsianGroup& G, const Mobius& h);

// Lexicographically minimal rotation under the order 1 < -1 < 2 < -2 < ...
Word canonical_rotation(const Word& w);
bool is_cyclically_reduced(const Word& w);
bool is_proper_power(const Word& w);

struct ClassRecord {
    Word word;       // canonical cutting word
    Mobius element;  // product of the word
    double length = 0;
    int inverse = -1;  // index of the inverse class in the same list
};

// Primitive oriented conjugacy classes with translation length <= max_length,
// sorted by length, found geometrically from the orbit ball.
std::vector<ClassRecord> enumerate_closed_geodesics(const FuchsianGroup& G, double max_length,
                                                    std::size_t cap = 20'000'000);

// Primitive cyclically reduced words of length <= max_word_length, one per
// conjugacy class: a word is kept when it is its own canonical cutting word.
struct WordClass {
    Word word;
    int inverse = -1;  // index of the inverse class, -1 if its cutting word is longer
};
std::vector<WordClass> enumerate_classes(const FuchsianGroup& G, int max_word_length, std::size_t cap = 5'000'000);

struct ClosedGeodesic {
    Word word;
    double length = 0;
    double unstable_exponent = 0;  // integral of the unstable Jacobian over one period
    PhasePoint base;
    double closure_residual = 0;
    // shooting nodes, each in a deck-transformation chart; empty when the
    // orbit is integrated in one piece from base
    std::vector<ChartPoint> nodes;
    double segment_time = 0;
};

struct CloseOptions {
    double tol = 1e-9;      // closure residual target
    double flow_tol = 1e-11;
    int max_newton = 25;
    double segment_length = 1.0;  // shooting segment length
};
// For constant curvature models without a group, `group` supplies the word action.
ClosedGeodesic close_geodesic(const SurfaceModel& model, const Word& word, const CloseOptions& opt = {},
                              const FuchsianGroup* group = nullptr);

struct PoincareData {
    std::array<double, 4> P{};  // row-major, acting on (j, j')
    double lambda = 0;          // log spectral radius
    double det_term = 0;        // |det(I - P)|
    double det = 1;
};
PoincareData poincare_data(const SurfaceModel& model, const ClosedGeodesic& geo, double tol = 1e-11,
                           double closure_tol = 1e-8);

}  // namespace hyperlab
