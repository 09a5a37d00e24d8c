#include "bsmimo/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "bsmimo/error.hpp"
#include "bsmimo/parallel.hpp"

namespace bsmimo::scenario {

using nlohmann::json;

namespace {

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  fail(ErrorCode::Validation, "config field '" + path + "': " + what);
}

const json* find(const json& obj, const std::string& key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const std::string& key, const std::string& prefix, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) field_error(join(prefix, key), "expected a number");
  const double x = v->get<double>();
  if (!std::isfinite(x)) field_error(join(prefix, key), "must be finite");
  return x;
}

long long get_integer(const json& obj, const std::string& key, const std::string& prefix, long long fallback,
                      long long min_value) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) field_error(join(prefix, key), "expected an integer");
  const long long x = v->get<long long>();
  if (x < min_value) field_error(join(prefix, key), "must be >= " + std::to_string(min_value));
  return x;
}

bool get_bool(const json& obj, const std::string& key, const std::string& prefix, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) field_error(join(prefix, key), "expected true or false");
  return v->get<bool>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& prefix,
                       const std::string& fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) field_error(join(prefix, key), "expected a string");
  return v->get<std::string>();
}

std::vector<double> get_number_list(const json& obj, const std::string& key, const std::string& prefix,
                                    std::vector<double> fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_array() || v->empty()) field_error(join(prefix, key), "expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number()) field_error(join(prefix, key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back((*v)[i].get<double>());
  }
  return out;
}

const json& get_object(const json& obj, const std::string& key, const std::string& prefix) {
  static const json empty = json::object();
  const json* v = find(obj, key);
  if (!v) return empty;
  if (!v->is_object()) field_error(join(prefix, key), "expected an object");
  return *v;
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) field_error(join(prefix, it.key()), "unknown field");
  }
}

std::string source_name(SourceType t) {
  switch (t) {
    case SourceType::File: return "file";
    case SourceType::Rayleigh: return "rayleigh";
    case SourceType::Ricean: return "ricean";
    case SourceType::Paths: return "paths";
  }
  return "?";
}

bool is_strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

}  // namespace

std::string mode_name(Mode m) { return m == Mode::BeamSpace ? "beamspace" : "conventional"; }

ScenarioConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) field_error("<root>", "expected an object");
  reject_unknown(j, "",
                 {"schema_version", "name", "mode", "seed", "link", "channel_source", "spatial_points",
                  "temporal_trials", "ser_threshold", "tx_spacing_mm", "rx_spacing_mm", "measurement",
                  "evaluation", "simulate"});
  ScenarioConfig c;
  const long long version = get_integer(j, "schema_version", "", kSchemaVersion, 1);
  if (version != kSchemaVersion)
    field_error("schema_version", "unsupported version " + std::to_string(version));
  c.name = get_string(j, "name", "", c.name);
  const std::string mode = get_string(j, "mode", "", "beamspace");
  if (mode == "beamspace")
    c.mode = Mode::BeamSpace;
  else if (mode == "conventional")
    c.mode = Mode::Conventional;
  else
    field_error("mode", "expected 'beamspace' or 'conventional'");
  c.seed = static_cast<std::uint64_t>(get_integer(j, "seed", "", static_cast<long long>(c.seed), 0));

  const json& link = get_object(j, "link", "");
  reject_unknown(link, "link",
                 {"n_sync", "l_sync", "l_train", "l_data", "symbol_rate_hz", "tx_oversample", "rx_oversample",
                  "rrc_rolloff", "rrc_span_symbols"});
  auto& lp = c.link;
  lp.n_sync = static_cast<int>(get_integer(link, "n_sync", "link", lp.n_sync, 2));
  lp.l_sync = static_cast<int>(get_integer(link, "l_sync", "link", lp.l_sync, 1));
  lp.l_train = static_cast<int>(get_integer(link, "l_train", "link", lp.l_train, 2));
  lp.l_data = static_cast<int>(get_integer(link, "l_data", "link", lp.l_data, 1));
  lp.symbol_rate = get_number(link, "symbol_rate_hz", "link", lp.symbol_rate);
  lp.tx_oversample = static_cast<int>(get_integer(link, "tx_oversample", "link", lp.tx_oversample, 1));
  lp.rx_oversample = static_cast<int>(get_integer(link, "rx_oversample", "link", lp.rx_oversample, 3));
  lp.rrc_rolloff = get_number(link, "rrc_rolloff", "link", lp.rrc_rolloff);
  lp.rrc_span_symbols = static_cast<int>(get_integer(link, "rrc_span_symbols", "link", lp.rrc_span_symbols, 1));
  if (!(lp.symbol_rate > 0)) field_error("link.symbol_rate_hz", "must be positive");
  if (!(lp.rrc_rolloff > 0) || lp.rrc_rolloff > 1) field_error("link.rrc_rolloff", "must lie in (0, 1]");
  try {
    lp.validate();
  } catch (const Error& e) {
    field_error("link", e.what());
  }

  const json* src = find(j, "channel_source");
  if (!src) field_error("channel_source", "missing");
  if (!src->is_object()) field_error("channel_source", "expected an object");
  reject_unknown(*src, "channel_source",
                 {"type", "path", "k_factor", "n_paths", "los", "scatter_power", "rx_tilt_deg", "pattern_n_theta",
                  "pattern_n_phi"});
  const std::string type = get_string(*src, "type", "channel_source", "");
  auto& s = c.source;
  if (type == "file") {
    s.type = SourceType::File;
    const std::string p = get_string(*src, "path", "channel_source", "");
    if (p.empty()) field_error("channel_source.path", "required for type 'file'");
    s.path = std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p;
    if (!std::filesystem::exists(s.path)) field_error("channel_source.path", "file not found: " + s.path.string());
  } else if (type == "rayleigh") {
    s.type = SourceType::Rayleigh;
  } else if (type == "ricean") {
    s.type = SourceType::Ricean;
    if (!find(*src, "k_factor")) field_error("channel_source.k_factor", "required for type 'ricean'");
    s.k_factor = get_number(*src, "k_factor", "channel_source", 0.0);
    if (s.k_factor < 0) field_error("channel_source.k_factor", "must be >= 0");
  } else if (type == "paths") {
    s.type = SourceType::Paths;
    s.n_paths = static_cast<int>(get_integer(*src, "n_paths", "channel_source", s.n_paths, 1));
    s.los = get_bool(*src, "los", "channel_source", s.los);
    s.scatter_power = get_number(*src, "scatter_power", "channel_source", s.scatter_power);
    if (s.scatter_power < 0) field_error("channel_source.scatter_power", "must be >= 0");
    s.rx_tilt_deg = get_number(*src, "rx_tilt_deg", "channel_source", s.rx_tilt_deg);
    s.pattern_n_theta = static_cast<int>(get_integer(*src, "pattern_n_theta", "channel_source", s.pattern_n_theta, 3));
    s.pattern_n_phi = static_cast<int>(get_integer(*src, "pattern_n_phi", "channel_source", s.pattern_n_phi, 4));
  } else {
    field_error("channel_source.type", "expected one of 'file', 'rayleigh', 'ricean', 'paths'");
  }

  c.spatial_points = static_cast<int>(get_integer(j, "spatial_points", "", c.spatial_points, 1));
  c.temporal_trials = static_cast<int>(get_integer(j, "temporal_trials", "", c.temporal_trials, 1));
  c.ser_threshold = get_number(j, "ser_threshold", "", c.ser_threshold);
  if (c.ser_threshold < 0 || c.ser_threshold > 1) field_error("ser_threshold", "must lie in [0, 1]");
  c.tx_spacing_mm = get_number(j, "tx_spacing_mm", "", c.tx_spacing_mm);
  c.rx_spacing_mm = get_number(j, "rx_spacing_mm", "", c.rx_spacing_mm);
  if (c.rx_spacing_mm < 0) field_error("rx_spacing_mm", "must be >= 0");
  if (c.mode == Mode::Conventional && !(c.tx_spacing_mm > 0))
    field_error("tx_spacing_mm", "conventional mode needs a positive transmit spacing");

  const json& meas = get_object(j, "measurement", "");
  reject_unknown(meas, "measurement",
                 {"snr_db", "cfo_max_hz", "delay_max_samples", "temporal_variation_db", "interference_probability"});
  auto& m = c.measurement;
  m.snr_db = get_number(meas, "snr_db", "measurement", m.snr_db);
  m.cfo_max_hz = get_number(meas, "cfo_max_hz", "measurement", m.cfo_max_hz);
  if (m.cfo_max_hz < 0) field_error("measurement.cfo_max_hz", "must be >= 0");
  m.delay_max_samples =
      static_cast<int>(get_integer(meas, "delay_max_samples", "measurement", m.delay_max_samples, 0));
  m.temporal_variation_db = get_number(meas, "temporal_variation_db", "measurement", m.temporal_variation_db);
  m.interference_probability =
      get_number(meas, "interference_probability", "measurement", m.interference_probability);
  if (m.interference_probability < 0 || m.interference_probability > 1)
    field_error("measurement.interference_probability", "must lie in [0, 1]");

  const json& ev = get_object(j, "evaluation", "");
  reject_unknown(ev, "evaluation", {"snr_db", "mi_noise_samples", "ser_trials"});
  auto& e = c.evaluation;
  e.snr_db = get_number_list(ev, "snr_db", "evaluation", e.snr_db);
  if (!is_strictly_increasing(e.snr_db)) field_error("evaluation.snr_db", "must be strictly increasing");
  e.mi_noise_samples = static_cast<int>(get_integer(ev, "mi_noise_samples", "evaluation", e.mi_noise_samples, 1));
  e.ser_trials = get_integer(ev, "ser_trials", "evaluation", e.ser_trials, 1);

  const json& sim = get_object(j, "simulate", "");
  reject_unknown(sim, "simulate", {"snr_db", "runs", "cfo_hz", "delay_samples"});
  auto& sp = c.simulate;
  sp.snr_db = get_number_list(sim, "snr_db", "simulate", sp.snr_db);
  sp.runs = static_cast<int>(get_integer(sim, "runs", "simulate", sp.runs, 1));
  sp.cfo_hz = get_number(sim, "cfo_hz", "simulate", sp.cfo_hz);
  sp.delay_samples = static_cast<int>(get_integer(sim, "delay_samples", "simulate", sp.delay_samples, 0));
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::InvalidArgument, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, "config " + path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// ---------------------------------------------------------------------------

ChannelGenerator::ChannelGenerator(const ScenarioConfig& cfg) : cfg_(cfg) {
  if (cfg.source.type != SourceType::Paths) return;
  const farfield::SphericalGrid grid{cfg.source.pattern_n_theta, cfg.source.pattern_n_phi};
  const double tilt = cfg.source.rx_tilt_deg * kPi / 180.0;
  rx_.emplace(farfield::tilted_isotropic(grid, tilt), farfield::tilted_isotropic(grid, -tilt));
  if (cfg.mode == Mode::BeamSpace)
    basis_.emplace(farfield::mirrored_basis(grid));
  else
    tx_.emplace(farfield::isotropic(grid), farfield::isotropic(grid));
}

Mat2 ChannelGenerator::point(int s) const {
  const std::uint64_t seed = derive_seed(cfg_.seed, 1, static_cast<std::uint64_t>(s));
  switch (cfg_.source.type) {
    case SourceType::Rayleigh:
      return channel::iid_rayleigh(seed);
    case SourceType::Ricean: {
      Rng rng(seed);
      std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
      const cplx a = std::polar(1.0, u(rng)), b = std::polar(1.0, u(rng));
      Mat2 los;
      los << a * b, b, a, cplx(1.0);  // rank one, unit-modulus entries
      return channel::ricean(cfg_.source.k_factor, los, derive_seed(seed, 1));
    }
    case SourceType::Paths: {
      Rng rng(seed);
      channel::PathSet paths;
      if (cfg_.source.los) {
        std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
        paths = channel::los_plus_scatter(kPi / 2, kPi / 2, kPi / 2, u(rng), cfg_.source.n_paths,
                                          cfg_.source.scatter_power, rng);
      } else {
        paths = channel::uniform_paths(cfg_.source.n_paths, rng);
      }
      const channel::LinearPair rx_array{cfg_.rx_spacing_mm * 1e-3, channel::kWavelength};
      if (basis_) return channel::synthesize_beamspace_channel(*basis_, *rx_, paths, rx_array);
      const channel::LinearPair tx_array{cfg_.tx_spacing_mm * 1e-3, channel::kWavelength};
      return channel::synthesize_conventional_channel(*tx_, *rx_, paths, tx_array, rx_array);
    }
    case SourceType::File:
      break;
  }
  fail(ErrorCode::InvalidArgument, "file sources have no generator; load the ensemble instead");
}

Mat2 ChannelGenerator::snapshot(int s, int t) const {
  const Mat2 h = point(s);
  const double var = db_to_linear(cfg_.measurement.temporal_variation_db) * h.squaredNorm() / 4.0;
  Rng rng(derive_seed(cfg_.seed, 2, (static_cast<std::uint64_t>(s) << 20) + static_cast<std::uint64_t>(t)));
  ComplexGaussian g(var);
  Mat2 w;
  for (int i = 0; i < 4; ++i) w(i % 2, i / 2) = g(rng);
  return h + w;
}

channel::ChannelRecord measure_snapshot(const ScenarioConfig& cfg, const Mat2& h, int s, int t) {
  const auto& lp = cfg.link;
  const auto qpsk = baseband::Constellation::qpsk();
  Rng rng(derive_seed(cfg.seed, 3, (static_cast<std::uint64_t>(s) << 20) + static_cast<std::uint64_t>(t)));
  const auto p1 = baseband::random_symbols(qpsk, lp.l_data, rng);
  const auto p2 = baseband::random_symbols(qpsk, lp.l_data, rng);
  const std::uint64_t frame_seed = rng();
  const auto frames = cfg.mode == Mode::BeamSpace ? baseband::build_beamspace_frames(lp, p1, p2, frame_seed, qpsk)
                                                  : baseband::build_conventional_frames(lp, p1, p2, frame_seed, qpsk);
  std::uniform_real_distribution<double> cfo_dist(-cfg.measurement.cfo_max_hz, cfg.measurement.cfo_max_hz);
  std::uniform_int_distribution<int> delay_dist(0, cfg.measurement.delay_max_samples);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cfo = cfo_dist(rng);
  const int delay = delay_dist(rng);
  const bool interfered = unit(rng) < cfg.measurement.interference_probability;
  const std::uint64_t noise_seed = rng();
  auto rx = baseband::simulate_link(frames, h, cfg.measurement.snr_db, cfo, delay, lp, noise_seed);

  if (interfered) {
    // Narrowband burst over the data segment, 10 dB above the signal.
    double sig = 0.0;
    for (const auto& r : rx)
      for (const auto& x : r) sig += std::norm(x);
    sig /= static_cast<double>(rx[0].size() + rx[1].size());
    ComplexGaussian g(10.0 * sig);
    const std::size_t begin = static_cast<std::size_t>(delay + frames.data_begin() * lp.rx_oversample);
    for (auto& r : rx) {
      const cplx a = g(rng);
      for (std::size_t n = std::min(begin, r.size()); n < r.size(); ++n) r[n] += a * std::polar(1.0, 0.37 * n);
    }
  }

  channel::ChannelRecord rec;
  rec.s = s;
  rec.t = t;
  try {
    const auto res = baseband::receive(rx, frames, qpsk);
    rec.h = res.h_hat;
    rec.measured_ser = res.ser;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularChannel && e.code() != ErrorCode::SingularTraining) throw;
    rec.h = Mat2::Zero();
    rec.measured_ser = 1.0;
  }
  // Per-stream input power: the single beam-space feed at 0 dBm splits over
  // the two basis branches; each conventional element is fed at 0 dBm.
  const double p_stream_mw = cfg.mode == Mode::BeamSpace ? 0.5 : 1.0;
  std::array<double, 2> p{};
  for (int m = 0; m < 2; ++m) {
    const double lin = (std::norm(rec.h(m, 0)) + std::norm(rec.h(m, 1))) * p_stream_mw;
    p[m] = lin > 0 ? linear_to_db(lin) : -300.0;
  }
  rec.rx_power_dbm = p;
  return rec;
}

channel::ChannelEnsemble collect(const ScenarioConfig& cfg, int threads) {
  if (cfg.source.type == SourceType::File) return channel::load_ensemble(cfg.source.path);
  const ChannelGenerator gen(cfg);
  const int S = cfg.spatial_points, T = cfg.temporal_trials;
  std::vector<channel::ChannelRecord> records(static_cast<std::size_t>(S) * T);
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const int s = static_cast<int>(i) / T + 1, t = static_cast<int>(i) % T + 1;
    records[i] = measure_snapshot(cfg, gen.snapshot(s, t), s, t);
  });
  channel::EnsembleMeta meta;
  meta.scenario = cfg.name;
  meta.spatial_points = S;
  meta.temporal_trials = T;
  meta.rx_spacing_mm = cfg.rx_spacing_mm;
  std::ostringstream notes;
  notes << "synthetic source=" << source_name(cfg.source.type) << " mode=" << mode_name(cfg.mode)
        << " link_snr_db=" << cfg.measurement.snr_db << " seed=" << cfg.seed;
  meta.notes = notes.str();
  return channel::ChannelEnsemble(std::move(meta), std::move(records));
}

DatasetAnalysis analyze_dataset(const channel::ChannelEnsemble& e, double ser_threshold, Mode mode) {
  DatasetAnalysis a;
  a.records_total = static_cast<int>(e.records().size());
  auto filtered = channel::filter_records(e, ser_threshold);
  a.records_kept = static_cast<int>(filtered.ensemble.records().size());
  a.unscored_records = filtered.unscored_records;
  a.spatial_retention = filtered.spatial_retention;
  require(a.records_kept > 0, ErrorCode::ZeroEnsemble,
          "no record passes the SER threshold of " + std::to_string(ser_threshold));
  a.averaged = channel::temporal_average(filtered.ensemble);

  a.power_compensation_db = mode == Mode::Conventional ? kConventionalCompensationDb : 0.0;
  const double amp = std::pow(10.0, a.power_compensation_db / 20.0);

  std::array<double, 2> acc{0.0, 0.0};
  int n_power = 0;
  for (const auto& r : filtered.ensemble.records()) {
    if (!r.rx_power_dbm) continue;
    for (int m = 0; m < 2; ++m) acc[m] += db_to_linear((*r.rx_power_dbm)[m]);
    ++n_power;
  }
  if (n_power > 0)
    a.avg_rx_power_dbm = std::array<double, 2>{linear_to_db(acc[0] / n_power) + a.power_compensation_db,
                                               linear_to_db(acc[1] / n_power) + a.power_compensation_db};

  std::vector<Mat2> hs;
  hs.reserve(a.averaged.size());
  for (const auto& avg : a.averaged) hs.push_back(avg.h * amp);
  a.normalized = channel::normalize_ensemble(hs);
  a.correlation = channel::correlation_matrix(a.normalized);
  a.ellipticity = channel::ellipticity_stats(a.normalized);
  return a;
}

Curves compute_curves(const std::vector<Mat2>& normalized, const EvaluationParams& ev, std::uint64_t seed,
                      int threads) {
  const evaluation::SnrGrid grid(ev.snr_db);
  const auto qpsk = baseband::Constellation::qpsk();
  Curves c;
  const auto ser =
      evaluation::ser_sweep(normalized, grid, qpsk, ev.ser_trials, derive_seed(seed, 11), {2, threads});
  c.singular_draws = ser.singular_draws;
  for (std::size_t i = 0; i < grid.points_db.size(); ++i) {
    const double snr = grid.points_db[i];
    auto mi = evaluation::mi_over_ensemble(normalized, snr, qpsk, ev.mi_noise_samples, derive_seed(seed, 10), threads);
    CurveRow row{};
    row.snr_db = snr;
    row.mi_mean = mi.mean;
    row.mi_p10 = mi.cdf.quantile(0.1);
    row.mi_p50 = mi.cdf.quantile(0.5);
    row.mi_p90 = mi.cdf.quantile(0.9);
    row.cap_mean = evaluation::mean_capacity(normalized, snr);
    row.ser = ser.values[i];
    row.stderr_ser = ser.std_error[i];
    c.rows.push_back(row);
    c.mi.push_back(std::move(mi));
  }
  return c;
}

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(10) << x;
  return os.str();
}

json mat4_abs(const Mat4& m) {
  json rows = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int k = 0; k < 4; ++k) row.push_back(std::abs(m(i, k)));
    rows.push_back(row);
  }
  return rows;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::InvalidArgument, "cannot write " + p.string());
  out << content;
}

}  // namespace

void write_curves_csv(std::ostream& out, const Curves& c) {
  out << "snr_db,mi_mean,mi_p10,mi_p50,mi_p90,cap_mean,ser,stderr_ser\n";
  for (const auto& r : c.rows)
    out << fmt(r.snr_db) << ',' << fmt(r.mi_mean) << ',' << fmt(r.mi_p10) << ',' << fmt(r.mi_p50) << ','
        << fmt(r.mi_p90) << ',' << fmt(r.cap_mean) << ',' << fmt(r.ser) << ',' << fmt(r.stderr_ser) << '\n';
}

void write_ellipticity_cdf_csv(std::ostream& out, const channel::EllipticityStats& st) {
  out << "gamma,prob\n";
  for (std::size_t i = 0; i < st.cdf.values.size(); ++i)
    out << fmt(st.cdf.values[i]) << ',' << fmt(st.cdf.prob[i]) << '\n';
}

void write_mi_cdf_csv(std::ostream& out, const Curves& c) {
  out << "snr_db,mi_bits,prob\n";
  for (std::size_t k = 0; k < c.rows.size(); ++k) {
    const auto& cdf = c.mi[k].cdf;
    for (std::size_t i = 0; i < cdf.values.size(); ++i)
      out << fmt(c.rows[k].snr_db) << ',' << fmt(cdf.values[i]) << ',' << fmt(cdf.prob[i]) << '\n';
  }
}

json analysis_json(const DatasetAnalysis& a) {
  json j;
  j["records_total"] = a.records_total;
  j["records_kept"] = a.records_kept;
  j["unscored_records"] = a.unscored_records;
  j["spatial_retention"] = a.spatial_retention;
  j["spatial_points_kept"] = a.averaged.size();
  j["power_compensation_db"] = a.power_compensation_db;
  j["avg_rx_power_dbm"] = a.avg_rx_power_dbm ? json(*a.avg_rx_power_dbm) : json(nullptr);
  j["correlation_magnitude"] = mat4_abs(a.correlation);
  j["correlation_trace"] = a.correlation.trace().real();
  j["ellipticity"] = {{"mean", a.ellipticity.mean},
                      {"mean_db", a.ellipticity.mean_db},
                      {"zero_count", a.ellipticity.zero_count}};
  return j;
}

RunArtifacts run(const ScenarioConfig& cfg, const std::filesystem::path& out_dir, int threads) {
  std::filesystem::create_directories(out_dir);
  RunArtifacts art;

  const auto ensemble = collect(cfg, threads);
  const auto ens_path = out_dir / "ensemble.txt";
  channel::save_ensemble(ensemble, ens_path);
  art.files.push_back(ens_path);

  const auto analysis = analyze_dataset(ensemble, cfg.ser_threshold, cfg.mode);
  const auto curves = compute_curves(analysis.normalized, cfg.evaluation, cfg.seed, threads);

  json& s = art.summary;
  s["schema_version"] = kSchemaVersion;
  s["scenario"] = cfg.name;
  s["mode"] = mode_name(cfg.mode);
  s["seed"] = cfg.seed;
  s["channel_source"] = source_name(cfg.source.type);
  s["stages"] = {"collect", "filter", "temporal_average", "power_compensation", "normalize", "metrics"};
  s["spatial_points"] = ensemble.meta().spatial_points;
  s["temporal_trials"] = ensemble.meta().temporal_trials;
  s["ser_threshold"] = cfg.ser_threshold;
  s["link_snr_db"] = cfg.measurement.snr_db;
  s["analysis"] = analysis_json(analysis);
  json ev;
  ev["snr_db"] = cfg.evaluation.snr_db;
  ev["mi_noise_samples"] = cfg.evaluation.mi_noise_samples;
  ev["ser_trials"] = cfg.evaluation.ser_trials;
  ev["ser_singular_draws"] = curves.singular_draws;
  std::vector<double> mi, cap, ser, ser_se;
  for (const auto& r : curves.rows) {
    mi.push_back(r.mi_mean);
    cap.push_back(r.cap_mean);
    ser.push_back(r.ser);
    ser_se.push_back(r.stderr_ser);
  }
  ev["mi_mean_bits"] = mi;
  ev["capacity_mean_bits"] = cap;
  ev["ser"] = ser;
  ev["ser_std_error"] = ser_se;
  s["evaluation"] = ev;

  std::ostringstream curves_csv, ell_csv, mi_csv;
  write_curves_csv(curves_csv, curves);
  write_ellipticity_cdf_csv(ell_csv, analysis.ellipticity);
  write_mi_cdf_csv(mi_csv, curves);
  const std::pair<const char*, std::string> files[] = {{"curves.csv", curves_csv.str()},
                                                        {"ellipticity_cdf.csv", ell_csv.str()},
                                                        {"mi_cdf.csv", mi_csv.str()},
                                                        {"summary.json", s.dump(2) + "\n"}};
  for (const auto& [name, content] : files) {
    write_file(out_dir / name, content);
    art.files.push_back(out_dir / name);
  }
  return art;
}

void simulate_runs(const ScenarioConfig& cfg, std::ostream& csv, int threads) {
  std::vector<Mat2> pool;
  std::optional<ChannelGenerator> gen;
  if (cfg.source.type == SourceType::File)
    pool = analyze_dataset(channel::load_ensemble(cfg.source.path), cfg.ser_threshold, cfg.mode).normalized;
  else
    gen.emplace(cfg);

  const auto& sp = cfg.simulate;
  const auto qpsk = baseband::Constellation::qpsk();
  const std::size_t n = sp.snr_db.size() * static_cast<std::size_t>(sp.runs);
  std::vector<std::string> rows(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const std::size_t k = i / sp.runs;
    const int r = static_cast<int>(i % sp.runs);
    const Mat2 h = gen ? gen->point(r + 1) : pool[static_cast<std::size_t>(r) % pool.size()];
    Rng rng(derive_seed(cfg.seed, 4, i));
    const auto p1 = baseband::random_symbols(qpsk, cfg.link.l_data, rng);
    const auto p2 = baseband::random_symbols(qpsk, cfg.link.l_data, rng);
    const std::uint64_t frame_seed = rng();
    const auto frames = cfg.mode == Mode::BeamSpace
                            ? baseband::build_beamspace_frames(cfg.link, p1, p2, frame_seed, qpsk)
                            : baseband::build_conventional_frames(cfg.link, p1, p2, frame_seed, qpsk);
    const auto rx = baseband::simulate_link(frames, h, sp.snr_db[k], sp.cfo_hz, sp.delay_samples, cfg.link, rng());
    std::ostringstream row;
    row << fmt(sp.snr_db[k]) << ',' << r;
    try {
      const auto res = baseband::receive(rx, frames, qpsk);
      row << ',' << fmt(res.ser) << ',' << fmt(res.rce_db) << ',' << fmt(res.cfo_hat) << ',' << res.timing.offset;
      for (int c = 0; c < 2; ++c)
        for (int m = 0; m < 2; ++m) row << ',' << fmt(res.h_hat(m, c).real()) << ',' << fmt(res.h_hat(m, c).imag());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularChannel && e.code() != ErrorCode::SingularTraining) throw;
      row << ",1,,,,,,,,,,,";
    }
    rows[i] = row.str();
  });
  csv << "snr_db,run,ser,rce_db,cfo_hat_hz,timing_offset,h11_re,h11_im,h21_re,h21_im,h12_re,h12_im,h22_re,h22_im\n";
  for (const auto& r : rows) csv << r << '\n';
}

}  // namespace bsmimo::scenario
