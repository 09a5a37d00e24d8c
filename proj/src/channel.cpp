#include "bsmimo/channel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bsmimo/error.hpp"

namespace bsmimo::channel {

namespace {

double ux(double theta, double phi) { return std::sin(theta) * std::cos(phi); }

Eigen::Vector2cd sample(const farfield::FarFieldPattern& p, std::size_t idx) {
  return {p.e_theta()[idx], p.e_phi()[idx]};
}

Mat2 synthesize(const farfield::FarFieldPattern& tx0, const farfield::FarFieldPattern& tx1, const LinearPair& tx_array,
                const PatternPair& rx, const PathSet& paths, const LinearPair& rx_array) {
  require(!paths.paths.empty(), ErrorCode::EmptyPathSet, "channel synthesis needs at least one path");
  require(tx0.grid() == tx1.grid(), ErrorCode::GridMismatch, "transmit patterns use different grids");
  require(rx.first.grid() == rx.second.grid(), ErrorCode::GridMismatch, "receive patterns use different grids");
  const farfield::FarFieldPattern* tx[2] = {&tx0, &tx1};
  const farfield::FarFieldPattern* rxp[2] = {&rx.first, &rx.second};
  const double k_tx = 2.0 * kPi / tx_array.wavelength;
  const double k_rx = 2.0 * kPi / rx_array.wavelength;

  std::array<std::vector<cplx>, 4> terms;
  for (auto& t : terms) t.reserve(paths.paths.size());
  for (const auto& p : paths.paths) {
    const std::size_t dep = tx0.grid().nearest(p.theta_dep, p.phi_dep);
    const std::size_t arr = rx.first.grid().nearest(p.theta_arr, p.phi_arr);
    const double u_dep = ux(p.theta_dep, p.phi_dep);
    const double u_arr = ux(p.theta_arr, p.phi_arr);
    for (int m = 0; m < 2; ++m) {
      const Eigen::Vector2cd fr = sample(*rxp[m], arr);
      const cplx rx_phase = std::polar(1.0, k_rx * rx_array.offset(m) * u_arr);
      for (int n = 0; n < 2; ++n) {
        const Eigen::Vector2cd b = sample(*tx[n], dep);
        const cplx tx_phase = std::polar(1.0, k_tx * tx_array.offset(n) * u_dep);
        const cplx resp = (fr.transpose() * p.polarization * b)(0);
        terms[m * 2 + n].push_back(p.gain * resp * rx_phase * tx_phase);
      }
    }
  }
  Mat2 h;
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 2; ++n) h(m, n) = pairwise_sum(std::span<const cplx>(terms[m * 2 + n]));
  return h;
}

Mat2 random_polarization(Rng& rng, Depolarization pol) {
  if (pol == Depolarization::CoPolar) return Mat2::Identity();
  ComplexGaussian g(0.5);
  Mat2 o;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) o(i, j) = g(rng);
  return o;
}

double uniform_theta(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return std::acos(u(rng));
}

double uniform_phi(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  return u(rng);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& tok, const std::string& where) {
  double v = 0.0;
  const std::string t = trim(tok);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    fail(ErrorCode::Parse, where + ": cannot parse number '" + t + "'");
  }
  return v;
}

int parse_int(const std::string& tok, const std::string& where) {
  int v = 0;
  const std::string t = trim(tok);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    fail(ErrorCode::Parse, where + ": cannot parse integer '" + t + "'");
  }
  return v;
}

}  // namespace

Mat2 synthesize_beamspace_channel(const farfield::BasisPair& basis, const PatternPair& rx, const PathSet& paths,
                                  const LinearPair& rx_array) {
  return synthesize(basis.b1, basis.b2, LinearPair{0.0, rx_array.wavelength}, rx, paths, rx_array);
}

Mat2 synthesize_conventional_channel(const PatternPair& tx, const PatternPair& rx, const PathSet& paths,
                                     const LinearPair& tx_array, const LinearPair& rx_array) {
  return synthesize(tx.first, tx.second, tx_array, rx, paths, rx_array);
}

PathSet uniform_paths(int n, Rng& rng, Depolarization pol, double power) {
  require(n >= 1, ErrorCode::InvalidArgument, "path count must be positive");
  ComplexGaussian gain(power / n);
  PathSet set;
  set.paths.reserve(n);
  for (int i = 0; i < n; ++i) {
    Path p;
    p.theta_dep = uniform_theta(rng);
    p.phi_dep = uniform_phi(rng);
    p.theta_arr = uniform_theta(rng);
    p.phi_arr = uniform_phi(rng);
    p.gain = gain(rng);
    p.polarization = random_polarization(rng, pol);
    set.paths.push_back(p);
  }
  return set;
}

PathSet horizontal_paths(int n, Rng& rng, Depolarization pol, double power) {
  require(n >= 1, ErrorCode::InvalidArgument, "path count must be positive");
  ComplexGaussian gain(power / n);
  PathSet set;
  set.paths.reserve(n);
  for (int i = 0; i < n; ++i) {
    Path p;
    p.theta_dep = kPi / 2.0;
    p.phi_dep = uniform_phi(rng);
    p.theta_arr = kPi / 2.0;
    p.phi_arr = uniform_phi(rng);
    p.gain = gain(rng);
    p.polarization = random_polarization(rng, pol);
    set.paths.push_back(p);
  }
  return set;
}

PathSet los_plus_scatter(double theta_dep, double phi_dep, double theta_arr, double phi_arr, int n_scatter,
                         double scatter_power, Rng& rng) {
  PathSet set;
  Path los;
  los.theta_dep = theta_dep;
  los.phi_dep = phi_dep;
  los.theta_arr = theta_arr;
  los.phi_arr = phi_arr;
  los.gain = std::polar(1.0, uniform_phi(rng));
  set.paths.push_back(los);
  if (n_scatter > 0) {
    auto scatter = uniform_paths(n_scatter, rng, Depolarization::Random, scatter_power);
    set.paths.insert(set.paths.end(), scatter.paths.begin(), scatter.paths.end());
  }
  return set;
}

Mat2 iid_rayleigh(Rng& rng) {
  ComplexGaussian g(1.0);
  Mat2 h;
  h(0, 0) = g(rng);
  h(1, 0) = g(rng);
  h(0, 1) = g(rng);
  h(1, 1) = g(rng);
  return h;
}

Mat2 iid_rayleigh(std::uint64_t seed) {
  Rng rng(seed);
  return iid_rayleigh(rng);
}

Mat2 ricean(double k_factor, const Mat2& h_los, std::uint64_t seed) {
  require(k_factor >= 0.0, ErrorCode::InvalidArgument, "Ricean K-factor must be non-negative");
  if (std::isinf(k_factor)) return h_los;
  const Mat2 nlos = iid_rayleigh(seed);
  return std::sqrt(k_factor / (k_factor + 1.0)) * h_los + std::sqrt(1.0 / (k_factor + 1.0)) * nlos;
}

ChannelEnsemble::ChannelEnsemble(EnsembleMeta meta, std::vector<ChannelRecord> records)
    : meta_(std::move(meta)), records_(std::move(records)) {
  std::set<std::pair<int, int>> seen;
  for (const auto& r : records_) {
    require(r.s >= 1 && r.t >= 1, ErrorCode::Validation, "record indices must be >= 1");
    require(r.h.allFinite(), ErrorCode::Validation, "record channel matrix is not finite");
    require(seen.insert({r.s, r.t}).second, ErrorCode::Validation,
            "duplicate record (s=" + std::to_string(r.s) + ", t=" + std::to_string(r.t) + ")");
  }
  require(static_cast<long long>(meta_.spatial_points) * meta_.temporal_trials >=
              static_cast<long long>(records_.size()),
          ErrorCode::Validation, "ensemble has more records than S * T");
}

FilterResult filter_records(const ChannelEnsemble& e, double ser_threshold) {
  std::vector<ChannelRecord> kept;
  std::set<int> points;
  int unscored = 0;
  for (const auto& r : e.records()) {
    if (r.measured_ser && *r.measured_ser > ser_threshold) continue;
    if (!r.measured_ser) ++unscored;
    kept.push_back(r);
    points.insert(r.s);
  }
  const double total = e.meta().spatial_points > 0 ? e.meta().spatial_points : 1.0;
  return {ChannelEnsemble(e.meta(), std::move(kept)), static_cast<double>(points.size()) / total, unscored};
}

std::vector<SpatialAverage> temporal_average(const ChannelEnsemble& e) {
  std::map<int, std::array<std::vector<cplx>, 4>> by_point;
  for (const auto& r : e.records()) {
    auto& acc = by_point[r.s];
    for (int i = 0; i < 4; ++i) acc[i].push_back(r.h(i % 2, i / 2));
  }
  std::vector<SpatialAverage> out;
  for (const auto& [s, acc] : by_point) {
    const double n = static_cast<double>(acc[0].size());
    Mat2 h;
    for (int i = 0; i < 4; ++i) h(i % 2, i / 2) = pairwise_sum(std::span<const cplx>(acc[i])) / n;
    out.push_back({s, h, static_cast<int>(acc[0].size())});
  }
  return out;
}

std::vector<Mat2> normalize_ensemble(const std::vector<Mat2>& h) {
  require(!h.empty(), ErrorCode::ZeroEnsemble, "cannot normalize an empty ensemble");
  std::vector<double> norms(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) norms[i] = h[i].squaredNorm();
  const double mean_sq = pairwise_sum(std::span<const double>(norms)) / static_cast<double>(h.size());
  require(mean_sq > 0.0 && std::isfinite(mean_sq), ErrorCode::ZeroEnsemble, "ensemble has zero power");
  const double c = 2.0 / std::sqrt(mean_sq);
  std::vector<Mat2> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = c * h[i];
  return out;
}

Mat4 correlation_matrix(const std::vector<Mat2>& h) {
  require(!h.empty(), ErrorCode::ZeroEnsemble, "correlation of an empty ensemble");
  Mat4 r;
  std::vector<cplx> terms(h.size());
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (std::size_t i = 0; i < h.size(); ++i) {
        terms[i] = h[i](a % 2, a / 2) * std::conj(h[i](b % 2, b / 2));
      }
      r(a, b) = pairwise_sum(std::span<const cplx>(terms)) / static_cast<double>(h.size());
    }
  }
  return r;
}

double ellipticity(const Mat2& h) {
  // eigenvalues of H H^H: product |det H|^2, sum ||H||_F^2
  const double arith = h.squaredNorm();
  if (arith == 0.0) return 0.0;
  const double geo = std::abs(h.determinant());
  return std::clamp(2.0 * geo / arith, 0.0, 1.0);
}

EllipticityStats ellipticity_stats(const std::vector<Mat2>& h) {
  require(!h.empty(), ErrorCode::ZeroEnsemble, "ellipticity of an empty ensemble");
  std::vector<double> g(h.size());
  std::vector<double> g_db;
  EllipticityStats st;
  for (std::size_t i = 0; i < h.size(); ++i) {
    g[i] = ellipticity(h[i]);
    if (g[i] > 0.0) {
      g_db.push_back(linear_to_db(g[i]));
    } else {
      ++st.zero_count;
    }
  }
  st.mean = mean(g);
  st.mean_db = g_db.empty() ? -std::numeric_limits<double>::infinity() : mean(g_db);
  st.cdf = EmpiricalCdf::from_samples(g);
  return st;
}

Eigen::Matrix4d correlation_magnitude(const Mat4& r) { return r.cwiseAbs(); }

Eigen::Matrix4d load_correlation_magnitude(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Validation, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && trim(line) == "c1,c2,c3,c4", ErrorCode::Parse,
          path.string() + ": expected header 'c1,c2,c3,c4'");
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i) {
    const std::string where = path.string() + ":" + std::to_string(i + 2);
    require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse, where + ": missing row");
    std::stringstream ss(line);
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',')) {
      require(k < 4, ErrorCode::Parse, where + ": too many columns");
      m(i, k++) = parse_double(cell, where);
    }
    require(k == 4, ErrorCode::Parse, where + ": expected 4 columns");
  }
  return m;
}

void write_correlation_magnitude(std::ostream& out, const Eigen::Matrix4d& m) {
  out << "c1,c2,c3,c4\n";
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 4; ++k) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", m(i, k));
      out << (k ? "," : "") << buf;
    }
    out << '\n';
  }
}

ChannelEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Validation, "cannot open ensemble file " + path.string());
  EnsembleMeta meta;
  std::vector<ChannelRecord> records;
  std::string line;
  int lineno = 0;
  bool saw_magic = false;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const std::string body = trim(t.substr(1));
      if (!saw_magic) {
        require(body.rfind("bsmimo-ensemble", 0) == 0, ErrorCode::Parse, where + ": missing 'bsmimo-ensemble' header");
        saw_magic = true;
        continue;
      }
      const auto colon = body.find(':');
      if (colon == std::string::npos) continue;
      const std::string key = trim(body.substr(0, colon));
      const std::string value = trim(body.substr(colon + 1));
      if (key == "scenario") meta.scenario = value;
      else if (key == "S") meta.spatial_points = parse_int(value, where);
      else if (key == "T") meta.temporal_trials = parse_int(value, where);
      else if (key == "rx_spacing_mm") meta.rx_spacing_mm = parse_double(value, where);
      else if (key == "notes") meta.notes = value;
      continue;
    }
    require(saw_magic, ErrorCode::Parse, where + ": data before the header");
    if (!saw_columns) {
      require(t.rfind("s,t,", 0) == 0, ErrorCode::Parse, where + ": expected column header line");
      saw_columns = true;
      continue;
    }
    std::vector<std::string> tok;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) tok.push_back(cell);
    if (!line.empty() && line.back() == ',') tok.emplace_back();
    require(tok.size() == 13, ErrorCode::Parse, where + ": expected 13 fields, got " + std::to_string(tok.size()));
    ChannelRecord r;
    r.s = parse_int(tok[0], where);
    r.t = parse_int(tok[1], where);
    for (int k = 0; k < 4; ++k) {
      r.h(k / 2, k % 2) = cplx(parse_double(tok[2 + 2 * k], where), parse_double(tok[3 + 2 * k], where));
    }
    if (!trim(tok[10]).empty()) r.measured_ser = parse_double(tok[10], where);
    const bool p1 = !trim(tok[11]).empty(), p2 = !trim(tok[12]).empty();
    require(p1 == p2, ErrorCode::Parse, where + ": received power needs both antennas or neither");
    if (p1) r.rx_power_dbm = std::array<double, 2>{parse_double(tok[11], where), parse_double(tok[12], where)};
    records.push_back(r);
  }
  require(saw_magic, ErrorCode::Parse, path.string() + ": empty or headerless ensemble file");
  require(saw_columns, ErrorCode::Parse, path.string() + ": missing column header");
  return ChannelEnsemble(std::move(meta), std::move(records));
}

void save_ensemble(const ChannelEnsemble& e, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Validation, "cannot write " + path.string());
  const auto& m = e.meta();
  out << "# bsmimo-ensemble v1\n"
      << "# scenario: " << m.scenario << '\n'
      << "# S: " << m.spatial_points << '\n'
      << "# T: " << m.temporal_trials << '\n'
      << "# rx_spacing_mm: " << fmt17(m.rx_spacing_mm) << '\n'
      << "# notes: " << m.notes << '\n'
      << "s,t,h11_re,h11_im,h12_re,h12_im,h21_re,h21_im,h22_re,h22_im,ser,p_rx1_dbm,p_rx2_dbm\n";
  for (const auto& r : e.records()) {
    out << r.s << ',' << r.t;
    for (int k = 0; k < 4; ++k) {
      const cplx v = r.h(k / 2, k % 2);
      out << ',' << fmt17(v.real()) << ',' << fmt17(v.imag());
    }
    out << ',' << (r.measured_ser ? fmt17(*r.measured_ser) : "");
    if (r.rx_power_dbm) {
      out << ',' << fmt17((*r.rx_power_dbm)[0]) << ',' << fmt17((*r.rx_power_dbm)[1]);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

}  // namespace bsmimo::channel
