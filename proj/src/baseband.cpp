#include "bsmimo/baseband.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bsmimo/error.hpp"
#include "bsmimo/load_synthesis.hpp"

namespace bsmimo::baseband {

namespace {

constexpr double kPointTol = 1e-9;

bool close(cplx a, cplx b, double tol = kPointTol) { return std::abs(a - b) <= tol; }

void check_payloads(const LinkParams& p, std::span<const cplx> a, std::span<const cplx> b) {
  p.validate();
  if (static_cast<int>(a.size()) != p.l_data || static_cast<int>(b.size()) != p.l_data) {
    fail(ErrorCode::LengthMismatch, "payloads must have " + std::to_string(p.l_data) + " symbols, got " +
                                        std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
}

std::vector<cplx> repeat(std::span<const cplx> seq, int times) {
  std::vector<cplx> out;
  out.reserve(seq.size() * times);
  for (int r = 0; r < times; ++r) out.insert(out.end(), seq.begin(), seq.end());
  return out;
}

// Joint LS projection energy of per-antenna pilot observations onto the
// column space of the pilot matrix, after removing a per-symbol phase ramp.
double pilot_fit(const std::array<std::vector<cplx>, 2>& z, const Eigen::MatrixXcd& a_mat,
                 const Eigen::MatrixXcd& gram_inv, double omega) {
  const auto n = static_cast<Eigen::Index>(z[0].size());
  double energy = 0.0;
  for (int m = 0; m < 2; ++m) {
    Eigen::VectorXcd v(n);
    for (Eigen::Index k = 0; k < n; ++k) v(k) = z[m][k] * std::polar(1.0, -omega * static_cast<double>(k));
    const Eigen::Vector2cd proj = a_mat.adjoint() * v;
    energy += (proj.adjoint() * gram_inv * proj)(0).real();
  }
  return energy;
}

// d/d omega of pilot_fit.
double pilot_fit_slope(const std::array<std::vector<cplx>, 2>& z, const Eigen::MatrixXcd& a_mat,
                       const Eigen::MatrixXcd& gram_inv, double omega) {
  const auto n = static_cast<Eigen::Index>(z[0].size());
  double slope = 0.0;
  for (int m = 0; m < 2; ++m) {
    Eigen::VectorXcd v(n), dv(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      v(k) = z[m][k] * std::polar(1.0, -omega * static_cast<double>(k));
      dv(k) = cplx(0.0, -static_cast<double>(k)) * v(k);
    }
    const Eigen::Vector2cd proj = a_mat.adjoint() * v;
    const Eigen::Vector2cd dproj = a_mat.adjoint() * dv;
    slope += 2.0 * (proj.adjoint() * gram_inv * dproj)(0).real();
  }
  return slope;
}

}  // namespace

Constellation Constellation::psk(int order) {
  require(order >= 2 && (order & (order - 1)) == 0, ErrorCode::InvalidArgument,
          "PSK order must be a power of two >= 2");
  Constellation c;
  c.bits_ = 0;
  while ((1 << c.bits_) < order) ++c.bits_;
  for (int k = 0; k < order; ++k) {
    cplx p = std::polar(1.0, 2.0 * kPi * k / order + kPi / order);
    // snap rounding residue so ratio sets come out exactly on the axes
    if (std::abs(p.real()) < 1e-15) p.real(0.0);
    if (std::abs(p.imag()) < 1e-15) p.imag(0.0);
    if (order == 4) p = cplx((k == 0 || k == 3) ? 1.0 : -1.0, (k < 2) ? 1.0 : -1.0) / std::sqrt(2.0);
    c.points_.push_back(p);
    c.labels_.push_back(static_cast<unsigned>(k ^ (k >> 1)));
  }
  return c;
}

int Constellation::nearest(cplx x) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < order(); ++i) {
    const double d = std::norm(x - points_[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<cplx> Constellation::ratio_set() const {
  std::vector<cplx> out;
  for (const auto& a : points_) {
    for (const auto& b : points_) {
      const cplx r = b / a;
      if (std::none_of(out.begin(), out.end(), [&](cplx q) { return close(q, r); })) out.push_back(r);
    }
  }
  return out;
}

void LinkParams::validate() const {
  require(n_sync >= 2, ErrorCode::Validation, "link.n_sync must be >= 2");
  require(l_sync >= 1 && l_train >= 1 && l_data >= 1, ErrorCode::Validation, "link segment lengths must be >= 1");
  require(symbol_rate > 0.0, ErrorCode::Validation, "link.symbol_rate must be positive");
  require(tx_oversample >= 1, ErrorCode::Validation, "link.tx_oversample must be >= 1");
  require(rx_oversample >= 3, ErrorCode::Validation, "link.rx_oversample must be >= 3");
  require(rrc_rolloff > 0.0 && rrc_rolloff <= 1.0, ErrorCode::Validation, "link.rrc_rolloff must lie in (0, 1]");
  require(rrc_span_symbols >= 2 && rrc_span_symbols % 2 == 0, ErrorCode::Validation,
          "link.rrc_span_symbols must be an even number >= 2");
}

std::span<const cplx> FramePair::sync(int stream) const {
  const auto& s = stream == 0 ? stream1 : stream2;
  return std::span<const cplx>(s).subspan(0, params.sync_length());
}

std::span<const cplx> FramePair::data(int stream) const {
  const auto& s = stream == 0 ? stream1 : stream2;
  return std::span<const cplx>(s).subspan(data_begin(), params.l_data);
}

std::span<const cplx> FramePair::pilots(int stream) const {
  const auto& s = stream == 0 ? stream1 : stream2;
  return std::span<const cplx>(s).subspan(0, params.pilot_length());
}

std::string check_frame_invariants(const FramePair& f, const Constellation& c) {
  const auto& p = f.params;
  const auto n = static_cast<std::size_t>(p.frame_length());
  if (f.stream1.size() != n || f.stream2.size() != n) return "stream length differs from frame length";
  const int t0 = f.train_begin();
  const int t1 = t0 + p.l_train;
  if (f.format == FrameFormat::BeamSpace) {
    for (int k = 0; k < p.sync_length(); ++k)
      if (!close(f.stream2[k], -f.stream1[k])) return "sync symbol " + std::to_string(k) + " is not in state -1";
    for (int k = t0; k < t1; ++k)
      if (!close(f.stream2[k], f.stream1[k])) return "training phase 1 symbol " + std::to_string(k) + " ratio != +1";
    for (int k = t1; k < t1 + p.l_train; ++k)
      if (!close(f.stream2[k], -f.stream1[k])) return "training phase 2 symbol " + std::to_string(k) + " ratio != -1";
    const auto ratios = c.ratio_set();
    for (int k = f.data_begin(); k < p.frame_length(); ++k) {
      if (f.stream1[k] == cplx{}) return "data symbol " + std::to_string(k) + " has zero RF symbol";
      const cplx r = f.stream2[k] / f.stream1[k];
      if (std::none_of(ratios.begin(), ratios.end(), [&](cplx q) { return close(q, r, 1e-9); }))
        return "data symbol " + std::to_string(k) + " ratio outside the constellation ratio set";
    }
    if (f.state_sequence.size() != n || f.antenna_states.size() != n) return "state sequence missing";
  } else {
    for (int k = t0; k < t1; ++k)
      if (f.stream2[k] != cplx{}) return "stream 2 not silent in training phase 1";
    for (int k = t1; k < t1 + p.l_train; ++k)
      if (f.stream1[k] != cplx{}) return "stream 1 not silent in training phase 2";
    bool distinct = false;
    for (int k = 0; k < p.l_sync; ++k) distinct = distinct || !close(f.stream1[k], f.stream2[k]);
    if (!distinct) return "conventional sync sequences are identical";
  }
  return {};
}

std::vector<cplx> random_symbols(const Constellation& c, int n, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, c.order() - 1);
  std::vector<cplx> out(n);
  for (auto& s : out) s = c.points()[pick(rng)];
  return out;
}

FramePair build_beamspace_frames(const LinkParams& params, std::span<const cplx> payload1,
                                 std::span<const cplx> payload2, std::uint64_t seed, const Constellation& c) {
  check_payloads(params, payload1, payload2);
  Rng rng(seed);
  const auto sync = random_symbols(c, params.l_sync, rng);
  const auto train = random_symbols(c, params.l_train, rng);

  FramePair f;
  f.format = FrameFormat::BeamSpace;
  f.params = params;
  f.stream1 = repeat(sync, params.n_sync);
  f.stream1.insert(f.stream1.end(), train.begin(), train.end());
  f.stream1.insert(f.stream1.end(), train.begin(), train.end());
  f.stream1.insert(f.stream1.end(), payload1.begin(), payload1.end());

  f.stream2.reserve(f.stream1.size());
  for (int k = 0; k < params.sync_length(); ++k) f.stream2.push_back(-f.stream1[k]);
  f.stream2.insert(f.stream2.end(), train.begin(), train.end());
  for (const auto& t : train) f.stream2.push_back(-t);
  f.stream2.insert(f.stream2.end(), payload2.begin(), payload2.end());

  for (int row = 0; row < 2; ++row) {
    auto& tr = f.training[row];
    tr.insert(tr.end(), train.begin(), train.end());
    for (const auto& t : train) tr.push_back(row == 0 ? t : -t);
  }

  const auto states = loads::psk_ratio_set(c.order());
  f.state_sequence.resize(f.stream1.size());
  f.antenna_states.resize(f.stream1.size());
  for (std::size_t k = 0; k < f.stream1.size(); ++k) {
    const cplx r = f.stream2[k] / f.stream1[k];
    f.state_sequence[k] = r;
    int idx = 0;
    for (std::size_t s = 0; s < states.size(); ++s)
      if (close(states[s].value(), r, 1e-9)) idx = static_cast<int>(s) + 1;
    f.antenna_states[k] = idx;
  }
  return f;
}

FramePair build_conventional_frames(const LinkParams& params, std::span<const cplx> payload1,
                                    std::span<const cplx> payload2, std::uint64_t seed, const Constellation& c) {
  check_payloads(params, payload1, payload2);
  Rng rng(seed);
  const auto sync1 = random_symbols(c, params.l_sync, rng);
  auto sync2 = random_symbols(c, params.l_sync, rng);
  while (std::equal(sync1.begin(), sync1.end(), sync2.begin())) sync2 = random_symbols(c, params.l_sync, rng);
  const auto train1 = random_symbols(c, params.l_train, rng);
  const auto train2 = random_symbols(c, params.l_train, rng);
  const std::vector<cplx> silence(params.l_train, cplx{});

  FramePair f;
  f.format = FrameFormat::Conventional;
  f.params = params;
  f.stream1 = repeat(sync1, params.n_sync);
  f.stream2 = repeat(sync2, params.n_sync);
  f.stream1.insert(f.stream1.end(), train1.begin(), train1.end());
  f.stream1.insert(f.stream1.end(), silence.begin(), silence.end());
  f.stream2.insert(f.stream2.end(), silence.begin(), silence.end());
  f.stream2.insert(f.stream2.end(), train2.begin(), train2.end());
  f.stream1.insert(f.stream1.end(), payload1.begin(), payload1.end());
  f.stream2.insert(f.stream2.end(), payload2.begin(), payload2.end());

  const int t0 = f.train_begin();
  for (int row = 0; row < 2; ++row) {
    const auto& s = row == 0 ? f.stream1 : f.stream2;
    f.training[row].assign(s.begin() + t0, s.begin() + t0 + 2 * params.l_train);
  }
  return f;
}

std::vector<double> rrc_taps(double rolloff, int span_symbols, int oversample) {
  require(rolloff > 0.0 && rolloff <= 1.0, ErrorCode::InvalidArgument, "RRC rolloff must lie in (0, 1]");
  require(span_symbols >= 1 && oversample >= 1, ErrorCode::InvalidArgument, "RRC span and oversampling must be >= 1");
  const int n = span_symbols * oversample + 1;
  const int mid = n / 2;
  const double b = rolloff;
  std::vector<double> h(n);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i - mid) / oversample;
    if (i == mid) {
      h[i] = 1.0 - b + 4.0 * b / kPi;
    } else if (std::abs(std::abs(t) - 1.0 / (4.0 * b)) < 1e-12) {
      h[i] = b / std::sqrt(2.0) *
             ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) + (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    } else {
      const double x = 4.0 * b * t;
      h[i] = (std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b))) /
             (kPi * t * (1.0 - x * x));
    }
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double g = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= g;
  return h;
}

std::vector<double> zero_isi_taps(double rolloff, int span_symbols, int oversample) {
  auto t = rrc_taps(rolloff, span_symbols, oversample);
  const int n = static_cast<int>(t.size());
  const int os = oversample;
  if (os == 1) {
    std::fill(t.begin(), t.end(), 0.0);
    t[n / 2] = 1.0;
    return t;
  }
  // At os = 2 the only symmetric finite solution is the unit impulse.
  require(os >= 3, ErrorCode::InvalidArgument, "zero-ISI shaping needs oversample 1 or >= 3");
  t.front() = t.back() = 0.0;
  const int k_max = (n - 3) / os;  // largest lag reachable by the interior taps
  auto residual = [&](const std::vector<double>& v) {
    Eigen::VectorXd g(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
      double r = 0.0;
      for (int j = 1; j + k * os < n - 1; ++j) r += v[j] * v[j + k * os];
      g(k) = r - (k == 0 ? 1.0 : 0.0);
    }
    return g;
  };
  Eigen::VectorXd g = residual(t);
  for (int it = 0; it < 100 && g.cwiseAbs().maxCoeff() >= 1e-15; ++it) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k_max + 1, n - 2);
    for (int k = 0; k <= k_max; ++k) {
      for (int i = 1; i < n - 1; ++i) {
        double d = 0.0;
        if (i + k * os < n - 1) d += t[i + k * os];
        if (i - k * os >= 1) d += t[i - k * os];
        jac(k, i - 1) = d;
      }
    }
    const Eigen::VectorXd step = jac.transpose() * (jac * jac.transpose()).ldlt().solve(g);
    // backtrack so the iterate stays on the branch nearest the RRC
    for (double a = 1.0; a > 1e-4; a *= 0.5) {
      auto trial = t;
      for (int i = 1; i < n - 1; ++i) trial[i] -= a * step(i - 1);
      for (int i = 0; i < n / 2; ++i) trial[i] = trial[n - 1 - i] = 0.5 * (trial[i] + trial[n - 1 - i]);
      const Eigen::VectorXd gt = residual(trial);
      if (gt.norm() < g.norm() || a <= 2e-4) {
        t = std::move(trial);
        g = gt;
        break;
      }
    }
  }
  return t;
}

std::vector<cplx> upsample_shape(std::span<const cplx> symbols, std::span<const double> taps, int oversample) {
  require(oversample >= 1 && !taps.empty(), ErrorCode::InvalidArgument, "invalid shaping parameters");
  if (symbols.empty()) return {};
  const std::size_t len = (symbols.size() - 1) * oversample + taps.size();
  std::vector<cplx> out(len);
  for (std::size_t k = 0; k < symbols.size(); ++k) {
    const std::size_t base = k * oversample;
    for (std::size_t j = 0; j < taps.size(); ++j) out[base + j] += symbols[k] * taps[j];
  }
  return out;
}

std::vector<cplx> matched_filter(std::span<const cplx> samples, std::span<const double> taps) {
  const std::size_t nt = taps.size();
  std::vector<cplx> out(samples.size() + nt - 1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    cplx acc{};
    const std::size_t jlo = i + 1 > samples.size() ? i + 1 - samples.size() : 0;
    const std::size_t jhi = std::min(nt - 1, i);
    // taps are real and symmetric, so the matched filter is the taps themselves
    for (std::size_t j = jlo; j <= jhi; ++j) acc += samples[i - j] * taps[nt - 1 - j];
    out[i] = acc;
  }
  return out;
}

std::vector<cplx> matched_filter_decimate(std::span<const cplx> samples, std::span<const double> taps, int oversample,
                                          int timing_offset, int n_symbols) {
  require(oversample >= 1 && n_symbols >= 0, ErrorCode::InvalidArgument, "invalid decimation parameters");
  const auto nt = static_cast<long>(taps.size());
  const auto ns = static_cast<long>(samples.size());
  std::vector<cplx> out(n_symbols);
  for (int k = 0; k < n_symbols; ++k) {
    const long i = timing_offset + (nt - 1) + static_cast<long>(k) * oversample;
    cplx acc{};
    for (long j = 0; j < nt; ++j) {
      const long n = i - j;
      if (n < 0 || n >= ns) continue;
      acc += samples[n] * taps[nt - 1 - j];
    }
    out[k] = acc;
  }
  return out;
}

double estimate_cfo(const RxStreams& rx, const LinkParams& params, int frame_start) {
  params.validate();
  const int os = params.rx_oversample;
  const int lag = params.l_sync * os;
  const int settle = params.rrc_span_symbols * os;  // shaping transient at the segment start
  const int begin = frame_start + settle;
  const int end = frame_start + os * (params.sync_length() - 1) - lag;  // exclusive for n, n + lag stays in sync
  const auto avail = static_cast<int>(std::min(rx[0].size(), rx[1].size()));
  if (end <= begin || end + lag > avail || frame_start < 0) {
    fail(ErrorCode::InsufficientSamples, "receive buffer does not hold two full sync repetitions");
  }
  std::vector<cplx> terms;
  terms.reserve(2 * (end - begin));
  for (const auto& r : rx)
    for (int n = begin; n < end; ++n) terms.push_back(r[n + lag] * std::conj(r[n]));
  const cplx acc = pairwise_sum(std::span<const cplx>(terms));
  return std::arg(acc) * params.rx_sample_rate() / (2.0 * kPi * lag);
}

TimingEstimate timing_sync(const RxStreams& rx, const std::array<std::span<const cplx>, 2>& sync_segments,
                           const LinkParams& params, double threshold) {
  params.validate();
  const int os = params.rx_oversample;
  const auto taps = zero_isi_taps(params.rrc_rolloff, params.rrc_span_symbols, os);
  const int nt = static_cast<int>(taps.size());
  const int ref_len = static_cast<int>(std::max(sync_segments[0].size(), sync_segments[1].size()));
  require(ref_len > 0, ErrorCode::InvalidArgument, "empty sync reference");
  const int shaped_len = (ref_len - 1) * os + nt;
  const auto avail = static_cast<int>(std::min(rx[0].size(), rx[1].size()));
  if (avail < shaped_len) fail(ErrorCode::InsufficientSamples, "receive buffer shorter than the sync segment");

  // Correlating the matched-filter output against the symbol sequence at
  // symbol spacing equals correlating the raw samples against the shaped
  // reference waveform.
  std::array<std::vector<cplx>, 2> mf = {matched_filter(rx[0], taps), matched_filter(rx[1], taps)};
  const int lags = avail - shaped_len + 1;
  std::vector<double> metric(lags, 0.0);
  for (int d = 0; d < lags; ++d) {
    double acc = 0.0;
    for (const auto& z : mf) {
      for (const auto& ref : sync_segments) {
        cplx c{};
        for (std::size_t k = 0; k < ref.size(); ++k) c += z[d + (nt - 1) + k * os] * std::conj(ref[k]);
        acc += std::norm(c);
      }
    }
    metric[d] = acc;
  }
  const auto peak = std::max_element(metric.begin(), metric.end());
  const double rms = std::sqrt(pairwise_sum(std::span<const double>(metric)) / lags);
  TimingEstimate est;
  est.offset = static_cast<int>(peak - metric.begin());
  est.peak_to_rms = rms > 0.0 ? std::sqrt(*peak) / rms : 0.0;
  est.confident = est.peak_to_rms >= threshold;
  return est;
}

Mat2 estimate_channel_ls(const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& t) {
  require(y.rows() == 2 && t.rows() == 2 && y.cols() == t.cols() && t.cols() >= 2, ErrorCode::LengthMismatch,
          "LS estimation needs 2 x N observations and training of the same length");
  const Mat2 gram = t * t.adjoint();
  if (!(gram.norm() > 0.0) || !(condition_number(gram) < kConditionBound)) {
    fail(ErrorCode::SingularTraining, "training matrix T T^H is singular");
  }
  const Mat2 cross = y * t.adjoint();
  // H gram = cross, solved from the right
  return gram.transpose().partialPivLu().solve(cross.transpose()).transpose();
}

Mat2 estimate_channel_ls(const Eigen::MatrixXcd& y_t1, const Eigen::MatrixXcd& y_t2, std::span<const cplx> training) {
  const auto l = static_cast<Eigen::Index>(training.size());
  require(y_t1.cols() == l && y_t2.cols() == l, ErrorCode::LengthMismatch,
          "training observations must match the training length");
  Eigen::MatrixXcd y(2, 2 * l), t(2, 2 * l);
  y << y_t1, y_t2;
  for (Eigen::Index k = 0; k < l; ++k) {
    t(0, k) = training[k];
    t(1, k) = training[k];
    t(0, l + k) = training[k];
    t(1, l + k) = -training[k];
  }
  return estimate_channel_ls(y, t);
}

Eigen::MatrixXcd zf_equalize(const Mat2& h_hat, const Eigen::MatrixXcd& y) {
  require(y.rows() == 2, ErrorCode::LengthMismatch, "ZF input must have two rows");
  if (!(condition_number(h_hat) < kConditionBound)) {
    fail(ErrorCode::SingularChannel, "channel estimate is not invertible");
  }
  return h_hat.partialPivLu().solve(y);
}

Score demap_and_score(std::span<const cplx> x_eq, const Constellation& c, std::span<const cplx> reference) {
  require(x_eq.size() == reference.size() && !x_eq.empty(), ErrorCode::LengthMismatch,
          "equalized and reference symbol counts differ");
  Score s;
  s.symbols.resize(x_eq.size());
  std::vector<double> err(x_eq.size()), ref(x_eq.size());
  int wrong = 0;
  for (std::size_t k = 0; k < x_eq.size(); ++k) {
    s.symbols[k] = c.nearest(x_eq[k]);
    if (!close(c.points()[s.symbols[k]], reference[k], 1e-9)) ++wrong;
    err[k] = std::norm(x_eq[k] - reference[k]);
    ref[k] = std::norm(reference[k]);
  }
  s.ser = static_cast<double>(wrong) / static_cast<double>(x_eq.size());
  const double e = pairwise_sum(std::span<const double>(err));
  const double r = pairwise_sum(std::span<const double>(ref));
  s.rce_db = e == 0.0 ? -std::numeric_limits<double>::infinity() : linear_to_db(e / r);
  return s;
}

RxStreams simulate_link(const FramePair& frames, const Mat2& h, double snr_db, double cfo_hz, int delay_samples,
                        const LinkParams& params, std::uint64_t seed) {
  params.validate();
  require(delay_samples >= 0, ErrorCode::InvalidArgument, "delay must be non-negative");
  require(frames.stream1.size() == frames.stream2.size(), ErrorCode::LengthMismatch, "frame streams differ in length");
  const int os = params.rx_oversample;
  const auto taps = zero_isi_taps(params.rrc_rolloff, params.rrc_span_symbols, os);
  const auto n_sym = frames.stream1.size();

  std::vector<double> energy(2 * n_sym);
  std::array<std::vector<cplx>, 2> mixed;
  for (int m = 0; m < 2; ++m) {
    mixed[m].resize(n_sym);
    for (std::size_t k = 0; k < n_sym; ++k) {
      mixed[m][k] = h(m, 0) * frames.stream1[k] + h(m, 1) * frames.stream2[k];
      energy[m * n_sym + k] = std::norm(mixed[m][k]);
    }
  }
  const double es = pairwise_sum(std::span<const double>(energy)) / static_cast<double>(energy.size());
  const bool noiseless = std::isinf(snr_db) && snr_db > 0.0;
  const double noise_var = noiseless ? 0.0 : es / db_to_linear(snr_db);

  Rng rng(seed);
  ComplexGaussian noise(noise_var > 0.0 ? noise_var : 1.0);
  const double fs = params.rx_sample_rate();
  const int tail = 2 * params.rrc_span_symbols * os;
  RxStreams rx;
  for (int m = 0; m < 2; ++m) {
    const auto shaped = upsample_shape(mixed[m], taps, os);
    auto& r = rx[m];
    r.assign(delay_samples + shaped.size() + tail, cplx{});
    std::copy(shaped.begin(), shaped.end(), r.begin() + delay_samples);
    for (std::size_t n = 0; n < r.size(); ++n) {
      r[n] *= std::polar(1.0, 2.0 * kPi * cfo_hz * static_cast<double>(n) / fs);
      if (!noiseless) r[n] += noise(rng);
    }
  }
  return rx;
}

ReceiverResult receive(const RxStreams& rx, const FramePair& reference, const Constellation& c) {
  const auto& p = reference.params;
  p.validate();
  const int os = p.rx_oversample;
  const double fs = p.rx_sample_rate();
  const auto taps = zero_isi_taps(p.rrc_rolloff, p.rrc_span_symbols, os);
  ReceiverResult res;

  const std::array<std::span<const cplx>, 2> sync = {reference.sync(0), reference.sync(1)};
  const auto coarse_timing = timing_sync(rx, sync, p);
  res.cfo_coarse = estimate_cfo(rx, p, coarse_timing.offset);

  RxStreams corrected = rx;
  for (auto& r : corrected)
    for (std::size_t n = 0; n < r.size(); ++n)
      r[n] *= std::polar(1.0, -2.0 * kPi * res.cfo_coarse * static_cast<double>(n) / fs);
  res.timing = timing_sync(corrected, sync, p);

  const int n_frame = p.frame_length();
  std::array<std::vector<cplx>, 2> z;
  for (int m = 0; m < 2; ++m) z[m] = matched_filter_decimate(corrected[m], taps, os, res.timing.offset, n_frame);

  // Pilot-aided refinement: sync and training symbols are known, the channel
  // is static over the frame, so maximize the LS fit over the residual offset.
  const int np = p.pilot_length();
  Eigen::MatrixXcd a_mat(np, 2);
  for (int k = 0; k < np; ++k) {
    a_mat(k, 0) = reference.stream1[k];
    a_mat(k, 1) = reference.stream2[k];
  }
  const Mat2 gram = a_mat.adjoint() * a_mat;
  const Mat2 gram_inv = gram.inverse();
  std::array<std::vector<cplx>, 2> zp = {std::vector<cplx>(z[0].begin(), z[0].begin() + np),
                                         std::vector<cplx>(z[1].begin(), z[1].begin() + np)};
  const double hz_to_omega = 2.0 * kPi * os / fs;
  const double span_hz = 0.25 * p.cfo_ambiguity_hz();
  const double step_hz = 0.25 * p.symbol_rate / (2.0 * kPi * np);  // well inside the fit's main lobe
  double best_f = 0.0, best_j = -1.0;
  for (double f = -span_hz; f <= span_hz; f += step_hz) {
    const double j = pilot_fit(zp, a_mat, gram_inv, f * hz_to_omega);
    if (j > best_j) {
      best_j = j;
      best_f = f;
    }
  }
  // bisect the analytic slope inside the winning cell
  double lo = best_f - step_hz, hi = best_f + step_hz;
  for (int it = 0; it < 64 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (pilot_fit_slope(zp, a_mat, gram_inv, mid * hz_to_omega) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double fine = 0.5 * (lo + hi);
  res.cfo_hat = res.cfo_coarse + fine;
  for (auto& zm : z)
    for (int k = 0; k < n_frame; ++k) zm[k] *= std::polar(1.0, -fine * hz_to_omega * k);

  const int t0 = reference.train_begin();
  const int lt = 2 * p.l_train;
  Eigen::MatrixXcd y_train(2, lt), t_mat(2, lt);
  for (int k = 0; k < lt; ++k) {
    y_train(0, k) = z[0][t0 + k];
    y_train(1, k) = z[1][t0 + k];
    t_mat(0, k) = reference.training[0][k];
    t_mat(1, k) = reference.training[1][k];
  }
  res.h_hat = estimate_channel_ls(y_train, t_mat);

  const int d0 = reference.data_begin();
  Eigen::MatrixXcd y_data(2, p.l_data);
  for (int k = 0; k < p.l_data; ++k) {
    y_data(0, k) = z[0][d0 + k];
    y_data(1, k) = z[1][d0 + k];
  }
  res.x_eq = zf_equalize(res.h_hat, y_data);

  std::vector<cplx> all_eq, all_ref;
  for (int s = 0; s < 2; ++s) {
    std::vector<cplx> row(p.l_data);
    for (int k = 0; k < p.l_data; ++k) row[k] = res.x_eq(s, k);
    res.streams[s] = demap_and_score(row, c, reference.data(s));
    all_eq.insert(all_eq.end(), row.begin(), row.end());
    const auto d = reference.data(s);
    all_ref.insert(all_ref.end(), d.begin(), d.end());
  }
  const auto joint = demap_and_score(all_eq, c, all_ref);
  res.ser = joint.ser;
  res.rce_db = joint.rce_db;
  return res;
}

}  // namespace bsmimo::baseband
