#pragma once

#include <span>
#include <vector>

namespace bsmimo {

// Empirical CDF: sorted samples with plotting positions k/N, k = 1..N.
struct EmpiricalCdf {
  std::vector<double> values;
  std::vector<double> prob;

  static EmpiricalCdf from_samples(std::span<const double> samples);
  // Smallest sample whose plotting position reaches p.
  double quantile(double p) const;
};

double mean(std::span<const double> v);
// Standard error of the mean (sample standard deviation / sqrt(N)).
double standard_error(std::span<const double> v);

}  // namespace bsmimo
