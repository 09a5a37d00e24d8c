#include "bsmimo/numeric.hpp"

#include <limits>

namespace bsmimo {

double condition_number(const Eigen::MatrixXcd& m) {
  if (!m.allFinite()) return std::numeric_limits<double>::infinity();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smax == 0.0 || smin == 0.0) return std::numeric_limits<double>::infinity();
  return smax / smin;
}

namespace {

template <typename T>
T pairwise_impl(const T* data, std::size_t n) {
  constexpr std::size_t kBlock = 8;
  if (n <= kBlock) {
    T acc{};
    for (std::size_t i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_impl(data, half) + pairwise_impl(data + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> v) { return pairwise_impl(v.data(), v.size()); }

cplx pairwise_sum(std::span<const cplx> v) { return pairwise_impl(v.data(), v.size()); }

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

}  // namespace bsmimo
