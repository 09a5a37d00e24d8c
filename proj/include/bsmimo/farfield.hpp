#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <vector>

#include "bsmimo/numeric.hpp"

namespace bsmimo::farfield {

// Uniform spherical sampling: theta_i = i * pi / (n_theta - 1) covers [0, pi]
// inclusive, phi_k = k * 2 pi / n_phi covers [0, 2 pi).
struct SphericalGrid {
  int n_theta = 181;
  int n_phi = 360;

  double theta(int i) const { return kPi * i / (n_theta - 1); }
  double phi(int k) const { return 2.0 * kPi * k / n_phi; }
  double d_theta() const { return kPi / (n_theta - 1); }
  double d_phi() const { return 2.0 * kPi / n_phi; }
  std::size_t size() const { return static_cast<std::size_t>(n_theta) * n_phi; }
  std::size_t index(int i, int k) const { return static_cast<std::size_t>(i) * n_phi + k; }

  // Nearest grid sample to an arbitrary direction.
  std::size_t nearest(double theta, double phi) const;

  bool operator==(const SphericalGrid&) const = default;
};

// Two-component far field (theta-hat and phi-hat polarizations), row-major in
// (theta, phi). Normalized so that radiated power is the surface integral of
// |e_theta|^2 + |e_phi|^2.
class FarFieldPattern {
 public:
  FarFieldPattern(SphericalGrid grid, std::vector<cplx> e_theta, std::vector<cplx> e_phi);
  static FarFieldPattern zeros(SphericalGrid grid);
  static FarFieldPattern from_function(SphericalGrid grid,
                                       const std::function<std::pair<cplx, cplx>(double, double)>& field);

  const SphericalGrid& grid() const { return grid_; }
  const std::vector<cplx>& e_theta() const { return e_theta_; }
  const std::vector<cplx>& e_phi() const { return e_phi_; }
  cplx theta_at(int i, int k) const { return e_theta_[grid_.index(i, k)]; }
  cplx phi_at(int i, int k) const { return e_phi_[grid_.index(i, k)]; }

  FarFieldPattern operator+(const FarFieldPattern& o) const;
  FarFieldPattern operator-(const FarFieldPattern& o) const;
  FarFieldPattern operator*(cplx a) const;

 private:
  SphericalGrid grid_;
  std::vector<cplx> e_theta_;
  std::vector<cplx> e_phi_;
};

struct BasisPair {
  FarFieldPattern b1;
  FarFieldPattern b2;
};

BasisPair basis_from_states(const FarFieldPattern& e_plus, const FarFieldPattern& e_minus);
FarFieldPattern instantaneous_from_basis(const BasisPair& basis, cplx ratio);

// Trapezoidal rule in theta (periodic rectangle rule in phi) on the sin(theta)
// weighted integrand, pairwise-summed.
double radiated_power(const FarFieldPattern& p);
cplx pattern_inner_product(const FarFieldPattern& a, const FarFieldPattern& b);

double imbalance_ratio_db(const BasisPair& basis);

// |inner product| / sqrt(P1 P2): zero for perfectly orthogonal basis patterns.
double orthogonality_residual(const BasisPair& basis);

struct StatePattern {
  cplx ratio;
  FarFieldPattern pattern;
};

// Per-direction EVM in dB, row-major on the basis grid. Directions where the
// ideal field vanishes for every state are NaN.
std::vector<double> evm_map(const BasisPair& basis, const std::vector<StatePattern>& states);

// Average of the linear EVM over the theta samples of the phi = phi_k cut,
// in dB. NaN entries are skipped.
double evm_cut_average_db(const SphericalGrid& grid, const std::vector<double>& evm_db, int phi_index);

// Reflection through the yz-plane (x -> -x): phi -> pi - phi, with the
// phi-component changing sign. Needs an even n_phi.
FarFieldPattern mirror_yz(const FarFieldPattern& p);

// Analytic fixtures.
FarFieldPattern isotropic(SphericalGrid grid, cplx amplitude = 1.0);
FarFieldPattern hertzian_dipole(SphericalGrid grid);
// Theta-polarized isotropic element whose polarization is rotated by `angle`
// towards phi-hat; used as a receive antenna.
FarFieldPattern tilted_isotropic(SphericalGrid grid, double angle);
// Mirror-symmetric basis with equal power in both patterns. In the symmetry
// plane B1 is theta-polarized and B2 phi-polarized; `coupling` sets the
// cross-polarized lobe strength.
BasisPair mirrored_basis(SphericalGrid grid, double coupling = 0.5);

// JSON: {"n_theta", "n_phi", "e_theta": [[re,im],...], "e_phi": [...]}
FarFieldPattern load_pattern(const std::filesystem::path& path);
void save_pattern(const FarFieldPattern& p, const std::filesystem::path& path);

}  // namespace bsmimo::farfield
