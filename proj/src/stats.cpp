#include "bsmimo/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bsmimo/error.hpp"
#include "bsmimo/numeric.hpp"

namespace bsmimo {

EmpiricalCdf EmpiricalCdf::from_samples(std::span<const double> samples) {
  EmpiricalCdf cdf;
  cdf.values.assign(samples.begin(), samples.end());
  std::sort(cdf.values.begin(), cdf.values.end());
  const auto n = cdf.values.size();
  cdf.prob.resize(n);
  for (std::size_t k = 0; k < n; ++k) cdf.prob[k] = static_cast<double>(k + 1) / static_cast<double>(n);
  return cdf;
}

double EmpiricalCdf::quantile(double p) const {
  require(!values.empty(), ErrorCode::InvalidArgument, "quantile of an empty CDF");
  const auto n = values.size();
  auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n) - 1e-12));
  k = std::clamp<std::size_t>(k, 1, n);
  return values[k - 1];
}

double mean(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return pairwise_sum(v) / static_cast<double>(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - m) * (v[i] - m);
  const double var = pairwise_sum(std::span<const double>(sq)) / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace bsmimo
