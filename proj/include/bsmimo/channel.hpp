#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bsmimo/farfield.hpp"
#include "bsmimo/numeric.hpp"
#include "bsmimo/stats.hpp"

namespace bsmimo::channel {

inline constexpr double kCarrierHz = 2.45e9;
inline constexpr double kWavelength = kSpeedOfLight / kCarrierHz;
inline constexpr double kDefaultTxSpacing = 0.120;  // m

// One propagation path. `polarization` maps the transmit (theta, phi)
// components at departure onto the receive (theta, phi) components at arrival.
struct Path {
  double theta_dep = 0.0;
  double phi_dep = 0.0;
  double theta_arr = 0.0;
  double phi_arr = 0.0;
  cplx gain{1.0, 0.0};
  Mat2 polarization = Mat2::Identity();
};

struct PathSet {
  std::vector<Path> paths;
};

// Element positions along the x axis, centered on the origin.
struct LinearPair {
  double spacing = 0.0;  // m
  double wavelength = kWavelength;

  double offset(int element) const { return element == 0 ? -spacing / 2.0 : spacing / 2.0; }
};

using PatternPair = std::pair<farfield::FarFieldPattern, farfield::FarFieldPattern>;

// Rows are receive antennas, columns the two basis (virtual) branches:
// h_mn = sum_p g_p F_Rm(arr)^T O_p B_n(dep) exp(j k x_m u_x(arr)).
Mat2 synthesize_beamspace_channel(const farfield::BasisPair& basis, const PatternPair& rx, const PathSet& paths,
                                  const LinearPair& rx_array = {});

// Same sum with two physical transmit elements, each displaced along x.
Mat2 synthesize_conventional_channel(const PatternPair& tx, const PatternPair& rx, const PathSet& paths,
                                     const LinearPair& tx_array = {kDefaultTxSpacing, kWavelength},
                                     const LinearPair& rx_array = {});

enum class Depolarization { CoPolar, Random };

// Departure and arrival directions uniform on the sphere, gains CN(0, power/n).
PathSet uniform_paths(int n, Rng& rng, Depolarization pol = Depolarization::Random, double power = 1.0);
// Departure and arrival directions uniform in azimuth in the horizontal plane.
PathSet horizontal_paths(int n, Rng& rng, Depolarization pol = Depolarization::CoPolar, double power = 1.0);
// One co-polarized path of unit power plus `n_scatter` random paths carrying
// `scatter_power` in total.
PathSet los_plus_scatter(double theta_dep, double phi_dep, double theta_arr, double phi_arr, int n_scatter,
                         double scatter_power, Rng& rng);

Mat2 iid_rayleigh(std::uint64_t seed);
Mat2 iid_rayleigh(Rng& rng);
Mat2 ricean(double k_factor, const Mat2& h_los, std::uint64_t seed);

struct ChannelRecord {
  int s = 1;
  int t = 1;
  Mat2 h = Mat2::Zero();
  std::optional<double> measured_ser;
  std::optional<std::array<double, 2>> rx_power_dbm;
};

struct EnsembleMeta {
  std::string scenario;
  int spatial_points = 0;
  int temporal_trials = 0;
  double rx_spacing_mm = 0.0;
  std::string notes;

  bool operator==(const EnsembleMeta&) const = default;
};

class ChannelEnsemble {
 public:
  ChannelEnsemble(EnsembleMeta meta, std::vector<ChannelRecord> records);

  const EnsembleMeta& meta() const { return meta_; }
  const std::vector<ChannelRecord>& records() const { return records_; }

 private:
  EnsembleMeta meta_;
  std::vector<ChannelRecord> records_;
};

struct FilterResult {
  ChannelEnsemble ensemble;
  double spatial_retention = 0.0;  // fraction of spatial points keeping >= 1 record
  int unscored_records = 0;        // kept because no measured SER was attached
};

FilterResult filter_records(const ChannelEnsemble& e, double ser_threshold = 0.10);

struct SpatialAverage {
  int s;
  Mat2 h;
  int snapshots;
};

std::vector<SpatialAverage> temporal_average(const ChannelEnsemble& e);

// Single global scale so that sqrt(mean ||H||_F^2) = 2.
std::vector<Mat2> normalize_ensemble(const std::vector<Mat2>& h);

// Sample mean of vec(H) vec(H)^H, vec stacking columns.
Mat4 correlation_matrix(const std::vector<Mat2>& h);

// Geometric over arithmetic mean of the eigenvalues of H H^H.
double ellipticity(const Mat2& h);

struct EllipticityStats {
  double mean = 0.0;
  double mean_db = 0.0;  // mean of 10 log10(gamma) over nonzero gamma
  int zero_count = 0;
  EmpiricalCdf cdf;
};

EllipticityStats ellipticity_stats(const std::vector<Mat2>& h);

// |R_H| as CSV: header "c1,c2,c3,c4" then four rows, %.6g.
Eigen::Matrix4d correlation_magnitude(const Mat4& r);
Eigen::Matrix4d load_correlation_magnitude(const std::filesystem::path& path);
void write_correlation_magnitude(std::ostream& out, const Eigen::Matrix4d& m);

ChannelEnsemble load_ensemble(const std::filesystem::path& path);
void save_ensemble(const ChannelEnsemble& e, const std::filesystem::path& path);

}  // namespace bsmimo::channel
