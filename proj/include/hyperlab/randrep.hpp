#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "hyperlab/common.hpp"

namespace hyperlab {

using Permutation = std::vector<int>;  // j -> p[j] on {0, ..., n-1}

// phi in Hom(Gamma, S_n) given by the images of the generators. Surface
// groups use generators a_1, b_1, ..., a_g, b_g (letters 1..2g) with the
// relation [a_1, b_1] ... [a_g, b_g] = 1.
struct PermutationHom {
    int n = 0;
    int genus = 0;  // 0 for free groups
    std::vector<Permutation> images;
    std::uint64_t seed = 0;

    int rank() const { return static_cast<int>(images.size()); }
    // image of a word: phi(l_1 ... l_k) = phi(l_1) o ... o phi(l_k)
    Permutation word_image(const Word& w) const;
    bool satisfies_relation() const;
};

Permutation compose(const Permutation& p, const Permutation& q);  // p o q
Permutation invert(const Permutation& p);
bool is_identity(const Permutation& p);
Word surface_relation(int genus);

PermutationHom sample_hom_free(int n, int rank, std::uint64_t seed);
PermutationHom sample_hom_surface(int n, int genus, std::uint64_t seed, std::uint64_t max_rejects = 10'000'000);

// |Hom(Gamma_g, S_n)| = |S_n|^{2g-1} sum_lambda (dim lambda)^{2-2g}
boost::multiprecision::cpp_int hom_count_surface(int n, int genus);
std::vector<std::vector<int>> partitions(int n);
boost::multiprecision::cpp_int hook_dimension(const std::vector<int>& lambda);

// Finitely supported element of C[Gamma], keyed by freely reduced words.
class GroupAlgebraElement {
public:
    GroupAlgebraElement() = default;
    static GroupAlgebraElement delta(const Word& w, cplx c = 1.0);
    // sum of a_i + a_i^{-1} over the given number of generators
    static GroupAlgebraElement adjacency(int generators);

    void add(const Word& w, cplx c);
    const std::map<Word, cplx>& terms() const { return terms_; }
    bool self_adjoint(double tol = 1e-12) const;
    GroupAlgebraElement adjoint() const;
    double l1_norm() const;
    int max_length() const;

private:
    std::map<Word, cplx> terms_;
};

Word free_reduce(const Word& w);

// rho_n(gamma) x, the permutation action restricted to zero-sum vectors
Eigen::VectorXcd apply_std(const PermutationHom& hom, const Word& w, const Eigen::VectorXcd& x);
Eigen::VectorXcd apply_std(const PermutationHom& hom, const GroupAlgebraElement& w, const Eigen::VectorXcd& x);

struct RepNorm {
    double norm = 0;
    int iterations = 0;
    int restarts = 0;
};
// |rho_n(w)| on V_n^0 by Lanczos on rho_n(w)^* rho_n(w)
RepNorm rep_norm(const GroupAlgebraElement& w, const PermutationHom& hom, int iters = 300, double tol = 1e-9,
                 std::uint64_t seed = 1);

// top-k eigenvalues of rho_n(w) on V_n^0 (w self-adjoint), descending
std::vector<double> new_spectrum(const PermutationHom& hom, const GroupAlgebraElement& w, int k,
                                 double tol = 1e-9);
// all eigenvalues of the permutation representation on C^n (dense, small n)
std::vector<double> permutation_spectrum(const PermutationHom& hom, const GroupAlgebraElement& w);

enum class GroupKind { Free, Surface };

struct BallNorm {
    double norm = 0;
    double increment = 0;  // norm(R) - norm(R - 2)
    std::size_t ball_size = 0;
};
// Top singular value of lambda(w) compressed to the Cayley ball of radius R.
// Surface groups are realised as the genus-2 Bolza group.
BallNorm regular_norm_ball(const GroupAlgebraElement& w, GroupKind kind, int generators, int R,
                           std::size_t cap = 8'000'000);

struct SchreierReport {
    int n = 0;
    int diameter = 0;
    bool connected = true;
    std::vector<int> treelike_radius;           // per vertex, capped at 7
    std::vector<double> treelike_fraction;      // index R-1: fraction with radius >= R, R = 1..6
    double median_radius = 0;
};
SchreierReport schreier_diagnostics(const PermutationHom& hom);

std::pair<cplx, cplx> resonance_map(double lambda);

struct SpectralReport {
    int n = 0;
    int trials = 0;
    int word_id = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> norm_rep;
    std::vector<double> top_new;
    double norm_regular = 0;
    double gap_mean = 0;     // mean of norm_rep - norm_regular
    double aas_fraction = 0; // fraction with norm_rep <= norm_regular + eps
};
SpectralReport strong_convergence_trials(const GroupAlgebraElement& w, GroupKind kind, int generators, int n,
                                         int trials, std::uint64_t seed0, double norm_regular, double eps = 0.2,
                                         int word_id = 0);

// chi-square statistic and upper-tail p-value of counts against a uniform law
std::pair<double, double> chi_square_uniform(const std::vector<std::uint64_t>& counts);

}  // namespace hyperlab
