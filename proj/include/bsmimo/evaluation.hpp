#pragma once

#include <cstdint>
#include <vector>

#include "bsmimo/baseband.hpp"
#include "bsmimo/numeric.hpp"
#include "bsmimo/stats.hpp"

// Monte-Carlo link metrics over 2x2 channels.
//
// SNR convention: the transmit vector carries unit total energy per channel
// use (each of the two streams at 1/2), and SNR is that energy over the noise
// variance at each receive antenna. After ensemble normalization
// E||H||_F^2 = 4, so the per-antenna received SNR equals the nominal SNR.
namespace bsmimo::evaluation {

struct SnrGrid {
  std::vector<double> points_db;

  explicit SnrGrid(std::vector<double> points);
};

enum class Metric { MutualInformation, Capacity, Ser };

struct PerformanceCurve {
  Metric metric = Metric::Ser;
  std::vector<double> snr_db;
  std::vector<double> values;
  std::vector<double> std_error;
  long long n_trials = 0;            // per SNR point
  long long singular_draws = 0;      // trials that fell back to the pseudo-inverse
};

struct MiEstimate {
  double bits = 0.0;
  double std_error = 0.0;
};

// Finite-alphabet mutual information for equiprobable inputs from `c` on both
// streams, estimated with n_noise_samples noise draws (log-sum-exp stabilized).
MiEstimate mutual_information_mc(const Mat2& h, double snr_db, const baseband::Constellation& c,
                                 int n_noise_samples, std::uint64_t seed);

// Gaussian-input capacity with equal power on both inputs:
// log2 det(I + SNR/2 H H^H).
double ergodic_capacity(const Mat2& h, double snr_db);

struct SerOptions {
  int streams = 2;  // 1: only h11 and the first stream are used
  int threads = 1;
};

// Per SNR point: channel drawn uniformly from the ensemble, symbols uniform,
// noise CN(0, 1/SNR), exact-H zero forcing and nearest-point decisions. Errors
// are averaged per transmitted symbol. Singular channels use the
// pseudo-inverse and are counted in `singular_draws`.
PerformanceCurve ser_sweep(const std::vector<Mat2>& ensemble, const SnrGrid& grid, const baseband::Constellation& c,
                           long long n_trials_per_point, std::uint64_t seed, const SerOptions& opt = {});

struct EnsembleMi {
  double mean = 0.0;
  std::vector<double> per_channel;
  EmpiricalCdf cdf;
};

// Channel i uses noise stream derive_seed(seed, i), so curves over SNR share
// their random numbers.
EnsembleMi mi_over_ensemble(const std::vector<Mat2>& ensemble, double snr_db, const baseband::Constellation& c,
                            int n_noise_samples, std::uint64_t seed, int threads = 1);

double mean_capacity(const std::vector<Mat2>& ensemble, double snr_db);

}  // namespace bsmimo::evaluation
