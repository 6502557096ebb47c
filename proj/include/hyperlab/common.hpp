#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperlab {

using cplx = std::complex<double>;
using Word = std::vector<int>;  // letters +-(i+1); negative means inverse

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Failure categories map onto CLI exit codes.
enum class ErrorKind { Config = 1, Numerical = 2, Invariant = 3 };

class LabError : public std::runtime_error {
public:
    LabError(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

#define HYPERLAB_ERROR(Name, Kind)                                              \
    struct Name : LabError {                                                    \
        explicit Name(const std::string& w) : LabError(ErrorKind::Kind, #Name ": " + w) {} \
    };

HYPERLAB_ERROR(PointOutsideDisk, Invariant)
HYPERLAB_ERROR(StepFailure, Numerical)
HYPERLAB_ERROR(RiccatiBlowup, Numerical)
HYPERLAB_ERROR(NoConvergence, Numerical)
HYPERLAB_ERROR(NoClosure, Numerical)
HYPERLAB_ERROR(DegenerateOrbit, Invariant)
HYPERLAB_ERROR(EmptyWindow, Numerical)
HYPERLAB_ERROR(Overflow, Numerical)
HYPERLAB_ERROR(OutOfDomain, Numerical)
HYPERLAB_ERROR(FitFailure, Numerical)
HYPERLAB_ERROR(Aliasing, Config)
HYPERLAB_ERROR(NotZeroSum, Invariant)
HYPERLAB_ERROR(RejectionBudgetExceeded, Numerical)
HYPERLAB_ERROR(BallTooLarge, Numerical)
HYPERLAB_ERROR(InvalidModel, Config)
HYPERLAB_ERROR(InvalidGroup, Config)
HYPERLAB_ERROR(ConfigError, Config)

#undef HYPERLAB_ERROR

inline double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    return a < 0 ? a + kTwoPi : a;
}

// signed difference a-b folded into (-pi, pi]
inline double angle_diff(double a, double b) {
    double d = std::fmod(a - b, kTwoPi);
    if (d > kPi) d -= kTwoPi;
    if (d <= -kPi) d += kTwoPi;
    return d;
}

inline Word inverse_word(const Word& w) {
    Word r(w.rbegin(), w.rend());
    for (int& l : r) l = -l;
    return r;
}

// least-squares slope of y against x
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= n; my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace hyperlab
