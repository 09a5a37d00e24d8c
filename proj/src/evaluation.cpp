#include "bsmimo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bsmimo/error.hpp"
#include "bsmimo/parallel.hpp"

namespace bsmimo::evaluation {

namespace {

constexpr long long kTrialBlock = 4096;

struct BlockCounts {
  long long errors = 0;      // symbol errors
  long long errors_sq = 0;   // sum over trials of (errors in trial)^2
  long long singular = 0;
};

}  // namespace

SnrGrid::SnrGrid(std::vector<double> points) : points_db(std::move(points)) {
  require(!points_db.empty(), ErrorCode::Validation, "SNR grid is empty");
  for (std::size_t i = 1; i < points_db.size(); ++i) {
    require(points_db[i] > points_db[i - 1], ErrorCode::Validation, "SNR grid must be strictly increasing");
  }
}

MiEstimate mutual_information_mc(const Mat2& h, double snr_db, const baseband::Constellation& c,
                                 int n_noise_samples, std::uint64_t seed) {
  require(n_noise_samples >= 1, ErrorCode::InvalidArgument, "need at least one noise sample");
  const int m = c.order();
  const int nv = m * m;
  const double amp = 1.0 / std::sqrt(2.0);
  std::vector<Eigen::Vector2cd> x(nv);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) x[a * m + b] = Eigen::Vector2cd(c.points()[a], c.points()[b]) * amp;

  // d[i][j] = H (x_i - x_j)
  std::vector<Eigen::Vector2cd> d(static_cast<std::size_t>(nv) * nv);
  for (int i = 0; i < nv; ++i)
    for (int j = 0; j < nv; ++j) d[i * nv + j] = h * (x[i] - x[j]);

  const double n0 = 1.0 / db_to_linear(snr_db);
  Rng rng(seed);
  ComplexGaussian noise(n0);
  std::vector<double> per_draw(n_noise_samples);
  std::vector<double> expo(nv);
  std::vector<double> per_symbol(nv);
  for (int s = 0; s < n_noise_samples; ++s) {
    const Eigen::Vector2cd n(noise(rng), noise(rng));
    const double nn = n.squaredNorm();
    for (int i = 0; i < nv; ++i) {
      double top = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < nv; ++j) {
        expo[j] = -((d[i * nv + j] + n).squaredNorm() - nn) / n0;
        top = std::max(top, expo[j]);
      }
      double acc = 0.0;
      for (int j = 0; j < nv; ++j) acc += std::exp(expo[j] - top);
      per_symbol[i] = (top + std::log(acc)) / std::log(2.0);
    }
    per_draw[s] = pairwise_sum(std::span<const double>(per_symbol)) / nv;
  }
  MiEstimate est;
  est.bits = std::log2(static_cast<double>(nv)) - mean(per_draw);
  est.std_error = standard_error(per_draw);
  return est;
}

double ergodic_capacity(const Mat2& h, double snr_db) {
  const double snr = db_to_linear(snr_db);
  const Mat2 g = Mat2::Identity() + (snr / 2.0) * h * h.adjoint();
  return std::log2(g.determinant().real());
}

PerformanceCurve ser_sweep(const std::vector<Mat2>& ensemble, const SnrGrid& grid, const baseband::Constellation& c,
                           long long n_trials_per_point, std::uint64_t seed, const SerOptions& opt) {
  require(!ensemble.empty(), ErrorCode::ZeroEnsemble, "SER sweep needs a non-empty ensemble");
  require(n_trials_per_point >= 1, ErrorCode::InvalidArgument, "need at least one trial per SNR point");
  require(opt.streams == 1 || opt.streams == 2, ErrorCode::InvalidArgument, "streams must be 1 or 2");

  // Precomputed equalizers; singular channels use the pseudo-inverse.
  std::vector<Mat2> inv(ensemble.size());
  std::vector<char> singular(ensemble.size(), 0);
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    if (opt.streams == 1) {
      const cplx h = ensemble[i](0, 0);
      singular[i] = std::abs(h) == 0.0;
      inv[i] = Mat2::Zero();
      inv[i](0, 0) = singular[i] ? cplx{} : 1.0 / h;
    } else if (condition_number(ensemble[i]) < kConditionBound) {
      inv[i] = ensemble[i].inverse();
    } else {
      singular[i] = 1;
      inv[i] = ensemble[i].completeOrthogonalDecomposition().pseudoInverse();
    }
  }

  const int streams = opt.streams;
  const double amp = streams == 2 ? 1.0 / std::sqrt(2.0) : 1.0;
  const int m = c.order();
  const long long n_blocks = (n_trials_per_point + kTrialBlock - 1) / kTrialBlock;

  PerformanceCurve curve;
  curve.metric = Metric::Ser;
  curve.snr_db = grid.points_db;
  curve.n_trials = n_trials_per_point;
  for (std::size_t p = 0; p < grid.points_db.size(); ++p) {
    const double n0 = 1.0 / db_to_linear(grid.points_db[p]);
    std::vector<BlockCounts> blocks(n_blocks);
    parallel_for(static_cast<std::size_t>(n_blocks), opt.threads, [&](std::size_t b) {
      Rng rng(derive_seed(seed, p, b));
      std::uniform_int_distribution<std::size_t> pick_h(0, ensemble.size() - 1);
      std::uniform_int_distribution<int> pick_s(0, m - 1);
      ComplexGaussian noise(n0);
      const long long begin = static_cast<long long>(b) * kTrialBlock;
      const long long end = std::min(n_trials_per_point, begin + kTrialBlock);
      BlockCounts counts;
      for (long long t = begin; t < end; ++t) {
        const std::size_t hi = pick_h(rng);
        const int s0 = pick_s(rng);
        const int s1 = pick_s(rng);
        const Eigen::Vector2cd n(noise(rng), noise(rng));
        int errs = 0;
        if (streams == 1) {
          const cplx y = ensemble[hi](0, 0) * c.points()[s0] + n(0);
          errs = c.nearest(y * inv[hi](0, 0)) != s0;
        } else {
          const Eigen::Vector2cd x(c.points()[s0] * amp, c.points()[s1] * amp);
          const Eigen::Vector2cd xe = inv[hi] * (ensemble[hi] * x + n) / amp;
          errs = (c.nearest(xe(0)) != s0) + (c.nearest(xe(1)) != s1);
        }
        counts.errors += errs;
        counts.errors_sq += errs * errs;
        counts.singular += singular[hi];
      }
      blocks[b] = counts;
    });
    BlockCounts total;
    for (const auto& b : blocks) {
      total.errors += b.errors;
      total.errors_sq += b.errors_sq;
      total.singular += b.singular;
    }
    const auto n = static_cast<double>(n_trials_per_point);
    // per-trial error fraction e/streams; mean and standard error from exact sums
    const double mean_frac = static_cast<double>(total.errors) / (n * streams);
    const double mean_sq = static_cast<double>(total.errors_sq) / (n * streams * streams);
    const double var = n > 1 ? std::max(0.0, (mean_sq - mean_frac * mean_frac) * n / (n - 1)) : 0.0;
    curve.values.push_back(mean_frac);
    curve.std_error.push_back(std::sqrt(var / n));
    curve.singular_draws += total.singular;
  }
  return curve;
}

EnsembleMi mi_over_ensemble(const std::vector<Mat2>& ensemble, double snr_db, const baseband::Constellation& c,
                            int n_noise_samples, std::uint64_t seed, int threads) {
  require(!ensemble.empty(), ErrorCode::ZeroEnsemble, "mutual information over an empty ensemble");
  EnsembleMi out;
  out.per_channel.resize(ensemble.size());
  parallel_for(ensemble.size(), threads, [&](std::size_t i) {
    out.per_channel[i] = mutual_information_mc(ensemble[i], snr_db, c, n_noise_samples, derive_seed(seed, i)).bits;
  });
  out.mean = mean(out.per_channel);
  out.cdf = EmpiricalCdf::from_samples(out.per_channel);
  return out;
}

double mean_capacity(const std::vector<Mat2>& ensemble, double snr_db) {
  require(!ensemble.empty(), ErrorCode::ZeroEnsemble, "capacity over an empty ensemble");
  std::vector<double> v(ensemble.size());
  for (std::size_t i = 0; i < ensemble.size(); ++i) v[i] = ergodic_capacity(ensemble[i], snr_db);
  return mean(v);
}

}  // namespace bsmimo::evaluation
