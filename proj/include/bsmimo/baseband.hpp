#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bsmimo/numeric.hpp"

namespace bsmimo::baseband {

class Constellation {
 public:
  // Gray-labelled M-PSK with the first point at angle pi/M; unit energy.
  static Constellation psk(int order);
  static Constellation qpsk() { return psk(4); }

  const std::vector<cplx>& points() const { return points_; }
  int order() const { return static_cast<int>(points_.size()); }
  int bits_per_symbol() const { return bits_; }
  // Gray label of point i.
  unsigned label(int i) const { return labels_[i]; }
  int nearest(cplx x) const;

  // Ratios x2/x1 reachable by two symbols of this alphabet.
  std::vector<cplx> ratio_set() const;

 private:
  std::vector<cplx> points_;
  std::vector<unsigned> labels_;
  int bits_ = 0;
};

struct LinkParams {
  int n_sync = 4;
  int l_sync = 32;
  int l_train = 64;
  int l_data = 256;
  double symbol_rate = 390.625e3;  // Hz
  int tx_oversample = 256;         // 100 MHz DAC clock / symbol rate
  int rx_oversample = 4;           // 1562.5 kHz ADC clock / symbol rate
  double rrc_rolloff = 0.5;
  int rrc_span_symbols = 8;

  void validate() const;
  double rx_sample_rate() const { return symbol_rate * rx_oversample; }
  int sync_length() const { return n_sync * l_sync; }
  int pilot_length() const { return sync_length() + 2 * l_train; }
  int frame_length() const { return pilot_length() + l_data; }
  // Half-width of the unambiguous range of the repetition CFO estimator.
  double cfo_ambiguity_hz() const { return symbol_rate / (2.0 * l_sync); }
};

enum class FrameFormat { BeamSpace, Conventional };

// Two parallel symbol streams. For beam-space the first stream is the RF
// signal and the second the virtual stream; their per-symbol ratio drives the
// antenna state. Segment layout: sync | training phase 1 | phase 2 | data.
struct FramePair {
  FrameFormat format = FrameFormat::BeamSpace;
  LinkParams params;
  std::vector<cplx> stream1;
  std::vector<cplx> stream2;
  // Training matrix rows over both phases (2 x 2 l_train), i.e. what each
  // stream carries during training.
  std::array<std::vector<cplx>, 2> training;
  // Per-symbol ratio stream2/stream1 and 1-based antenna state (beam-space only).
  std::vector<cplx> state_sequence;
  std::vector<int> antenna_states;

  int train_begin() const { return params.sync_length(); }
  int data_begin() const { return params.pilot_length(); }
  std::span<const cplx> sync(int stream) const;
  std::span<const cplx> data(int stream) const;
  std::span<const cplx> pilots(int stream) const;
};

// Empty string when all segment invariants hold, otherwise the first violation.
std::string check_frame_invariants(const FramePair& f, const Constellation& c);

FramePair build_beamspace_frames(const LinkParams& params, std::span<const cplx> payload1,
                                 std::span<const cplx> payload2, std::uint64_t seed,
                                 const Constellation& c = Constellation::qpsk());
FramePair build_conventional_frames(const LinkParams& params, std::span<const cplx> payload1,
                                    std::span<const cplx> payload2, std::uint64_t seed,
                                    const Constellation& c = Constellation::qpsk());

std::vector<cplx> random_symbols(const Constellation& c, int n, Rng& rng);

// Root raised cosine, span * oversample + 1 taps, unit energy.
std::vector<double> rrc_taps(double rolloff, int span_symbols, int oversample);

// RRC taps corrected by a minimum-norm Newton projection so that the cascade
// with the matched filter has zero ISI at every nonzero symbol offset (the
// truncated RRC leaves ~1e-3). End taps are zero; length and delay are those of
// rrc_taps. Used by the link.
std::vector<double> zero_isi_taps(double rolloff, int span_symbols, int oversample);

// Zero-stuff by `oversample` and convolve; symbol k peaks at k*os + (taps-1)/2.
std::vector<cplx> upsample_shape(std::span<const cplx> symbols, std::span<const double> taps, int oversample);

// Matched filter evaluated only at the symbol instants: output k is the full
// matched-filter convolution at index timing_offset + (taps-1) + k*os.
std::vector<cplx> matched_filter_decimate(std::span<const cplx> samples, std::span<const double> taps, int oversample,
                                          int timing_offset, int n_symbols);

// Full matched-filter output (length samples + taps - 1).
std::vector<cplx> matched_filter(std::span<const cplx> samples, std::span<const double> taps);

using RxStreams = std::array<std::vector<cplx>, 2>;

// Repetition-based estimator over the sync segment starting at raw sample
// `frame_start`: arg(sum r[n+L] conj(r[n])) / (2 pi L Ts), L = l_sync * os,
// averaged jointly over both receive antennas. Unambiguous within
// +-cfo_ambiguity_hz(); larger offsets alias.
double estimate_cfo(const RxStreams& rx, const LinkParams& params, int frame_start = 0);

struct TimingEstimate {
  int offset = 0;             // raw-sample delay of the frame start
  double peak_to_rms = 0.0;   // |c|_max / rms |c| over the search window
  bool confident = false;     // peak_to_rms >= threshold
};

inline constexpr double kTimingConfidenceThreshold = 3.0;

// Cross-correlation against the shaped sync segment of each stream, summed
// over streams and antennas.
TimingEstimate timing_sync(const RxStreams& rx, const std::array<std::span<const cplx>, 2>& sync_segments,
                           const LinkParams& params, double threshold = kTimingConfidenceThreshold);

// General LS: H = Y T^H (T T^H)^-1 for Y, T with two rows.
Mat2 estimate_channel_ls(const Eigen::MatrixXcd& y, const Eigen::MatrixXcd& t);
// Beam-space training T = [t t; t -t]; y_t1, y_t2 are 2 x L observations.
Mat2 estimate_channel_ls(const Eigen::MatrixXcd& y_t1, const Eigen::MatrixXcd& y_t2, std::span<const cplx> training);

Eigen::MatrixXcd zf_equalize(const Mat2& h_hat, const Eigen::MatrixXcd& y);

struct Score {
  std::vector<int> symbols;  // nearest-point indices
  double ser = 0.0;
  double rce_db = 0.0;
};

Score demap_and_score(std::span<const cplx> x_eq, const Constellation& c, std::span<const cplx> reference);

// Waveform-level link: per-symbol 2x2 mixing, RRC shaping at the receive
// sample rate, integer delay, carrier offset, complex AWGN. The noise
// variance per antenna is the average received symbol energy over the frame
// divided by the SNR; snr_db = +inf disables noise.
RxStreams simulate_link(const FramePair& frames, const Mat2& h, double snr_db, double cfo_hz, int delay_samples,
                        const LinkParams& params, std::uint64_t seed);

struct ReceiverResult {
  double cfo_hat = 0.0;     // coarse + pilot-aided refinement
  double cfo_coarse = 0.0;  // repetition estimator alone
  TimingEstimate timing;
  Mat2 h_hat = Mat2::Zero();
  Eigen::MatrixXcd x_eq;  // 2 x l_data
  std::array<Score, 2> streams;
  double ser = 0.0;     // over both streams
  double rce_db = 0.0;  // over both streams
};

// CFO estimation and correction, timing, LS channel estimate from the training
// phases, ZF equalization of the data segment and scoring against the
// transmitted payloads. Throws SingularChannel when the estimate cannot be
// inverted.
ReceiverResult receive(const RxStreams& rx, const FramePair& reference, const Constellation& c);

}  // namespace bsmimo::baseband
