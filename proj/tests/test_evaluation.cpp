#include <gtest/gtest.h>

#include <cmath>

#include "bsmimo/channel.hpp"
#include "bsmimo/error.hpp"
#include "bsmimo/evaluation.hpp"

using namespace bsmimo;
using namespace bsmimo::evaluation;

namespace {

const baseband::Constellation kQpsk = baseband::Constellation::qpsk();

double q_func(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

std::vector<Mat2> rayleigh(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Mat2> out(n);
  for (auto& h : out) h = channel::iid_rayleigh(rng);
  return out;
}

}  // namespace

TEST(SnrGrid, StrictlyIncreasing) {
  EXPECT_NO_THROW(SnrGrid({-10, 0, 10}));
  EXPECT_THROW(SnrGrid({0, 0}), Error);
  EXPECT_THROW(SnrGrid({5, 0}), Error);
  EXPECT_THROW(SnrGrid({}), Error);
}

TEST(MutualInformation, ZeroChannel) {
  const auto mi = mutual_information_mc(Mat2::Zero(), 10.0, kQpsk, 200, 1);
  EXPECT_NEAR(mi.bits, 0.0, 0.01);
}

TEST(MutualInformation, SaturatesAtHighSnr) {
  const auto mi = mutual_information_mc(Mat2::Identity(), 30.0, kQpsk, 500, 2);
  EXPECT_NEAR(mi.bits, 4.0, 0.05);
}

TEST(MutualInformation, MatchesCapacityAtLowSnr) {
  const auto mi = mutual_information_mc(Mat2::Identity(), -10.0, kQpsk, 2000, 3);
  EXPECT_NEAR(mi.bits, ergodic_capacity(Mat2::Identity(), -10.0), 0.1);
}

TEST(MutualInformation, BpskSaturatesAtTwoBits) {
  const auto mi = mutual_information_mc(Mat2::Identity(), 30.0, baseband::Constellation::psk(2), 200, 4);
  EXPECT_NEAR(mi.bits, 2.0, 0.02);
}

TEST(MutualInformation, BelowCapacityAndBounded) {
  const auto hs = rayleigh(10, 5);
  for (const auto& h : hs) {
    for (double snr : {-5.0, 5.0, 15.0}) {
      const auto mi = mutual_information_mc(h, snr, kQpsk, 300, 6);
      EXPECT_LE(mi.bits, ergodic_capacity(h, snr) + 3 * mi.std_error + 1e-12);
      EXPECT_GE(mi.bits, -3 * mi.std_error);
      EXPECT_LE(mi.bits, 4.0 + 1e-12);
    }
  }
}

TEST(MutualInformation, MonotoneInSnr) {
  Rng rng(7);
  const Mat2 h = channel::iid_rayleigh(rng);
  double prev = -1.0, prev_se = 0.0;
  for (double snr = -10.0; snr <= 30.0; snr += 5.0) {
    const auto mi = mutual_information_mc(h, snr, kQpsk, 300, 8);
    EXPECT_GE(mi.bits, prev - 3 * std::hypot(mi.std_error, prev_se)) << snr;
    prev = mi.bits;
    prev_se = mi.std_error;
  }
}

TEST(MutualInformation, ScalingConsistency) {
  Rng rng(9);
  const Mat2 h = channel::iid_rayleigh(rng);
  const double c = 3.0;
  const auto a = mutual_information_mc(h, 8.0, kQpsk, 300, 10);
  const auto b = mutual_information_mc(c * h, 8.0 - 20.0 * std::log10(c), kQpsk, 300, 10);
  EXPECT_NEAR(a.bits, b.bits, 1e-9);
}

TEST(MutualInformation, Deterministic) {
  Rng rng(11);
  const Mat2 h = channel::iid_rayleigh(rng);
  EXPECT_EQ(mutual_information_mc(h, 5.0, kQpsk, 100, 12).bits, mutual_information_mc(h, 5.0, kQpsk, 100, 12).bits);
  EXPECT_THROW(mutual_information_mc(h, 5.0, kQpsk, 0, 12), Error);
}

TEST(Capacity, ClosedForms) {
  EXPECT_EQ(ergodic_capacity(Mat2::Zero(), 10.0), 0.0);
  EXPECT_NEAR(ergodic_capacity(Mat2::Identity(), 10.0 * std::log10(2.0)), 2.0, 1e-12);
}

TEST(Capacity, EigenvalueOracle) {
  for (const auto& h : rayleigh(50, 13)) {
    const double snr_db = 12.0;
    const double snr = db_to_linear(snr_db);
    const Eigen::SelfAdjointEigenSolver<Mat2> es(h * h.adjoint());
    double oracle = 0.0;
    for (int k = 0; k < 2; ++k) oracle += std::log2(1.0 + snr * es.eigenvalues()(k) / 2.0);
    EXPECT_NEAR(ergodic_capacity(h, snr_db), oracle, 1e-10);
  }
}

TEST(SerSweep, IdentityDecreasesToZero) {
  const SnrGrid grid({0, 5, 10, 15, 20});
  const auto c = ser_sweep({Mat2::Identity()}, grid, kQpsk, 20000, 14);
  for (std::size_t i = 1; i < c.values.size(); ++i) EXPECT_LE(c.values[i], c.values[i - 1]);
  EXPECT_EQ(c.values.back(), 0.0);
  for (double v : c.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SerSweep, SingleStreamMatchesQpskClosedForm) {
  const SnrGrid grid({0, 2, 4, 6, 8});
  SerOptions opt;
  opt.streams = 1;
  Mat2 h = Mat2::Zero();
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const auto c = ser_sweep({h}, grid, kQpsk, 200000, 15, opt);
  for (std::size_t i = 0; i < grid.points_db.size(); ++i) {
    const double q = q_func(std::sqrt(db_to_linear(grid.points_db[i])));
    const double analytic = 2 * q - q * q;
    EXPECT_NEAR(c.values[i], analytic, 3 * c.std_error[i]) << grid.points_db[i] << " dB";
  }
}

TEST(SerSweep, UnresolvableStreamGuessingFloor) {
  // Second column zero: stream 2 never reaches the receiver, so it is a
  // uniform guess (3/4 wrong) while stream 1 is error-free at high SNR.
  Mat2 h = Mat2::Zero();
  h(0, 0) = 1.0;
  h(1, 0) = 1.0;
  const auto c = ser_sweep({h}, SnrGrid({40}), kQpsk, 100000, 16);
  EXPECT_NEAR(c.values[0], 0.75 / 2.0, 3 * c.std_error[0]);
  EXPECT_EQ(c.singular_draws, 100000);
}

TEST(SerSweep, RankOneEqualColumnsFloor) {
  // Pseudo-inverse returns (s1 + s2) / 2 on both streams: equal pairs are
  // correct, adjacent pairs split 1/2, opposite pairs guess among 4.
  Mat2 h;
  h << 1.0, 1.0, 1.0, 1.0;
  const auto c = ser_sweep({h}, SnrGrid({40}), kQpsk, 100000, 17);
  EXPECT_NEAR(c.values[0], 0.5 * 0.5 + 0.25 * 0.75, 3 * c.std_error[0]);
}

TEST(SerSweep, DeterministicAndThreadIndependent) {
  const auto ens = rayleigh(40, 18);
  const SnrGrid grid({0, 10, 20});
  SerOptions one, four;
  four.threads = 4;
  const auto a = ser_sweep(ens, grid, kQpsk, 30000, 19, one);
  const auto b = ser_sweep(ens, grid, kQpsk, 30000, 19, one);
  const auto c = ser_sweep(ens, grid, kQpsk, 30000, 19, four);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values, c.values);
  EXPECT_EQ(a.std_error, c.std_error);
}

TEST(SerSweep, StandardErrorScalesWithTrials) {
  const auto ens = rayleigh(40, 20);
  const SnrGrid grid({5});
  const auto a = ser_sweep(ens, grid, kQpsk, 20000, 21);
  const auto b = ser_sweep(ens, grid, kQpsk, 40000, 22);
  const auto c = ser_sweep(ens, grid, kQpsk, 80000, 23);
  EXPECT_NEAR(b.std_error[0] / a.std_error[0], 1.0 / std::sqrt(2.0), 0.3 / std::sqrt(2.0));
  EXPECT_NEAR(c.std_error[0] / a.std_error[0], 0.5, 0.15);
}

TEST(SerSweep, ScalingConsistency) {
  const auto ens = rayleigh(30, 24);
  std::vector<Mat2> scaled;
  for (const auto& h : ens) scaled.push_back(0.5 * h);
  const auto a = ser_sweep(ens, SnrGrid({10}), kQpsk, 50000, 25);
  const auto b = ser_sweep(scaled, SnrGrid({10 + 20 * std::log10(2.0)}), kQpsk, 50000, 25);
  EXPECT_NEAR(a.values[0], b.values[0], 3 * std::hypot(a.std_error[0], b.std_error[0]));
}

TEST(SerSweep, RejectsEmptyEnsemble) {
  try {
    ser_sweep({}, SnrGrid({0}), kQpsk, 10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroEnsemble);
  }
}

TEST(MiOverEnsemble, SingletonIsStep) {
  const auto r = mi_over_ensemble({Mat2::Identity()}, 10.0, kQpsk, 100, 26);
  ASSERT_EQ(r.cdf.values.size(), 1u);
  EXPECT_EQ(r.cdf.prob[0], 1.0);
  EXPECT_EQ(r.mean, r.per_channel[0]);
}

TEST(MiOverEnsemble, DuplicatedEnsembleSameCdf) {
  // Duplicates draw their own noise (derive_seed(seed, i)), so the CDF
  // property is checked on exactly duplicated per-channel values.
  const auto ens = rayleigh(5, 27);
  std::vector<Mat2> doubled = ens;
  doubled.insert(doubled.end(), ens.begin(), ens.end());
  const auto a = mi_over_ensemble(ens, 10.0, kQpsk, 100, 28);
  const auto b = mi_over_ensemble(doubled, 10.0, kQpsk, 100, 28);
  for (std::size_t i = 0; i < ens.size(); ++i) EXPECT_EQ(a.per_channel[i], b.per_channel[i]);
  std::vector<double> twice = a.per_channel;
  twice.insert(twice.end(), a.per_channel.begin(), a.per_channel.end());
  const auto cdf2 = EmpiricalCdf::from_samples(twice);
  for (double p : {0.1, 0.2, 0.35, 0.5, 0.8, 1.0}) EXPECT_EQ(a.cdf.quantile(p), cdf2.quantile(p)) << p;
}

TEST(MiOverEnsemble, MatchesDirectAverage) {
  const auto ens = rayleigh(40, 29);
  const auto r = mi_over_ensemble(ens, 30.0, kQpsk, 100, 30, 3);
  double direct = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i)
    direct += mutual_information_mc(ens[i], 30.0, kQpsk, 100, derive_seed(30, i)).bits;
  direct /= static_cast<double>(ens.size());
  EXPECT_NEAR(r.mean, direct, 1e-12);
  EXPECT_LE(r.mean, 4.0);
  EXPECT_GT(r.mean, 3.5);
  for (std::size_t i = 1; i < r.cdf.values.size(); ++i) {
    EXPECT_LE(r.cdf.values[i - 1], r.cdf.values[i]);
    EXPECT_NEAR(r.cdf.prob[i], static_cast<double>(i + 1) / ens.size(), 1e-15);
  }
}

TEST(MiOverEnsemble, ThreadIndependent) {
  const auto ens = rayleigh(12, 31);
  const auto a = mi_over_ensemble(ens, 5.0, kQpsk, 50, 32, 1);
  const auto b = mi_over_ensemble(ens, 5.0, kQpsk, 50, 32, 4);
  EXPECT_EQ(a.per_channel, b.per_channel);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(MeanCapacity, AveragesPerChannel) {
  const auto ens = rayleigh(20, 33);
  double acc = 0.0;
  for (const auto& h : ens) acc += ergodic_capacity(h, 10.0);
  EXPECT_NEAR(mean_capacity(ens, 10.0), acc / 20.0, 1e-12);
}

TEST(EmpiricalCdf, PlottingPositionsAndQuantile) {
  const std::vector<double> s = {3.0, 1.0, 2.0, 4.0};
  const auto cdf = EmpiricalCdf::from_samples(s);
  EXPECT_EQ(cdf.values, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(cdf.prob, (std::vector<double>{0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(cdf.quantile(0.5), 2.0);
  EXPECT_EQ(cdf.quantile(0.6), 3.0);
  EXPECT_EQ(cdf.quantile(0.0), 1.0);
  EXPECT_EQ(cdf.quantile(1.0), 4.0);
}

TEST(Stats, MeanAndStandardError) {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(mean(v), 3.0);
  EXPECT_NEAR(standard_error(v), std::sqrt(2.5 / 5.0), 1e-15);
}
