#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace bsmimo {

using cplx = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat3 = Eigen::Matrix3cd;
using Mat4 = Eigen::Matrix4cd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;

// Matrices whose 2-norm condition number exceeds this are treated as singular.
inline constexpr double kConditionBound = 1e12;

double condition_number(const Eigen::MatrixXcd& m);

// Pairwise (cascade) summation. Fixed association order, so results do not
// depend on how the caller produced the input.
double pairwise_sum(std::span<const double> v);
cplx pairwise_sum(std::span<const cplx> v);

// Counter-based seed derivation (splitmix64 finalizer); used so that work
// partitioned across threads draws from streams fixed by (seed, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

using Rng = std::mt19937_64;

// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
class ComplexGaussian {
 public:
  explicit ComplexGaussian(double variance = 1.0) : dist_(0.0, std::sqrt(variance / 2.0)) {}
  cplx operator()(Rng& rng) { return {dist_(rng), dist_(rng)}; }

 private:
  std::normal_distribution<double> dist_;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

}  // namespace bsmimo
