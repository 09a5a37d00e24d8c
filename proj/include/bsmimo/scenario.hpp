#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsmimo/baseband.hpp"
#include "bsmimo/channel.hpp"
#include "bsmimo/evaluation.hpp"

namespace bsmimo::scenario {

inline constexpr int kSchemaVersion = 1;
// Conventional transmission feeds both antennas at full power, i.e. 3 dB more
// total input than the single-feed beam-space antenna.
inline constexpr double kConventionalCompensationDb = -3.0102999566398120;

enum class Mode { BeamSpace, Conventional };

enum class SourceType { File, Rayleigh, Ricean, Paths };

struct ChannelSource {
  SourceType type = SourceType::Rayleigh;
  std::filesystem::path path;   // File
  double k_factor = 0.0;        // Ricean
  int n_paths = 200;            // Paths
  bool los = false;             // Paths: one dominant path plus scatter
  double scatter_power = 0.1;   // Paths with LOS: scattered power relative to LOS
  double rx_tilt_deg = 0.0;     // receive polarization tilt, +tilt / -tilt on the two antennas
  int pattern_n_theta = 181;
  int pattern_n_phi = 360;
};

struct MeasurementParams {
  double snr_db = 25.0;
  double cfo_max_hz = 2000.0;
  int delay_max_samples = 64;
  double temporal_variation_db = -25.0;  // snapshot perturbation power relative to the point's channel
  double interference_probability = 0.0;
};

struct EvaluationParams {
  std::vector<double> snr_db = {-10, -5, 0, 5, 10, 15, 20, 25, 30};
  int mi_noise_samples = 500;
  long long ser_trials = 100000;
};

struct SimulateParams {
  std::vector<double> snr_db = {30.0};
  int runs = 10;
  double cfo_hz = 500.0;
  int delay_samples = 37;
};

struct ScenarioConfig {
  std::string name = "scenario";
  Mode mode = Mode::BeamSpace;
  std::uint64_t seed = 1;
  baseband::LinkParams link;
  ChannelSource source;
  int spatial_points = 400;
  int temporal_trials = 11;
  double ser_threshold = 0.10;
  double tx_spacing_mm = 120.0;
  double rx_spacing_mm = 61.2;
  MeasurementParams measurement;
  EvaluationParams evaluation;
  SimulateParams simulate;
};

// Field errors name the offending JSON path, e.g. "channel_source.path".
ScenarioConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ScenarioConfig load_config(const std::filesystem::path& path);

// Noise-free channel of spatial point s (1-based) and snapshot t.
class ChannelGenerator {
 public:
  explicit ChannelGenerator(const ScenarioConfig& cfg);
  Mat2 point(int s) const;
  Mat2 snapshot(int s, int t) const;

 private:
  const ScenarioConfig& cfg_;
  std::optional<farfield::BasisPair> basis_;
  std::optional<channel::PatternPair> tx_;
  std::optional<channel::PatternPair> rx_;
};

// Measures one snapshot through the frame-level link (sync, CFO, LS
// estimation, ZF decoding of the data); returns the record.
channel::ChannelRecord measure_snapshot(const ScenarioConfig& cfg, const Mat2& h, int s, int t);

// Collection stage: loads the file source, or synthesizes and measures
// spatial_points x temporal_trials snapshots.
channel::ChannelEnsemble collect(const ScenarioConfig& cfg, int threads);

struct DatasetAnalysis {
  int records_total = 0;
  int records_kept = 0;
  int unscored_records = 0;
  double spatial_retention = 0.0;
  double power_compensation_db = 0.0;
  std::optional<std::array<double, 2>> avg_rx_power_dbm;
  std::vector<channel::SpatialAverage> averaged;
  std::vector<Mat2> normalized;
  Mat4 correlation = Mat4::Zero();
  channel::EllipticityStats ellipticity;
};

// filter -> temporal average -> (conventional power compensation) -> normalize
// -> correlation and ellipticity.
DatasetAnalysis analyze_dataset(const channel::ChannelEnsemble& e, double ser_threshold, Mode mode);

struct CurveRow {
  double snr_db;
  double mi_mean, mi_p10, mi_p50, mi_p90;
  double cap_mean;
  double ser, stderr_ser;
};

struct Curves {
  std::vector<CurveRow> rows;
  std::vector<evaluation::EnsembleMi> mi;  // per SNR point
  long long singular_draws = 0;
};

Curves compute_curves(const std::vector<Mat2>& normalized, const EvaluationParams& ev, std::uint64_t seed,
                      int threads);

void write_curves_csv(std::ostream& out, const Curves& c);
nlohmann::json analysis_json(const DatasetAnalysis& a);
void write_ellipticity_cdf_csv(std::ostream& out, const channel::EllipticityStats& st);
void write_mi_cdf_csv(std::ostream& out, const Curves& c);

struct RunArtifacts {
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

// Full pipeline; writes summary.json, curves.csv, ensemble.txt,
// ellipticity_cdf.csv and mi_cdf.csv under out_dir.
RunArtifacts run(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, int threads);

// Link-level simulation runs over the configured SNR list; CSV columns
// snr_db,run,ser,rce_db,cfo_hat_hz,timing_offset, then h_hat columns stacked.
void simulate_runs(const ScenarioConfig& cfg, std::ostream& csv, int threads);

std::string mode_name(Mode m);

}  // namespace bsmimo::scenario
