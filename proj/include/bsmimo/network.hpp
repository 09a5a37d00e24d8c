#pragma once

#include <filesystem>

#include "bsmimo/numeric.hpp"

// Three-port network algebra for the reconfigurable radiator.
//
// Port ordering is fixed throughout: index 0 is the active (driven) port,
// indices 1 and 2 are the passive ports terminated by the variable loads.
namespace bsmimo::network {

inline constexpr double kDefaultZ0 = 50.0;

class ScatteringMatrix3 {
 public:
  explicit ScatteringMatrix3(const Mat3& entries, double z0 = kDefaultZ0);

  const Mat3& entries() const { return entries_; }
  double z0() const { return z0_; }
  cplx operator()(int row, int col) const { return entries_(row, col); }

  // Mirror symmetry of the radiator about the plane through the active port:
  // S12 = S13, S21 = S31, S22 = S33, S23 = S32.
  bool is_symmetric_radiator(double tol = 1e-9) const;

 private:
  Mat3 entries_;
  double z0_;
};

class ImpedanceMatrix3 {
 public:
  explicit ImpedanceMatrix3(const Mat3& entries);
  const Mat3& entries() const { return entries_; }

 private:
  Mat3 entries_;
};

struct LoadTermination {
  double x1 = 0.0;  // reactance at passive port 1 [ohm]
  double x2 = 0.0;  // reactance at passive port 2 [ohm]
  double r1 = 0.0;  // series loss at passive port 1 [ohm]
  double r2 = 0.0;

  LoadTermination() = default;
  LoadTermination(double x1_, double x2_, double r1_ = 0.0, double r2_ = 0.0);
};

// Z = Z0 (I + S)(I - S)^-1
ImpedanceMatrix3 s_to_z(const ScatteringMatrix3& s);

// S = (Z - Z0 I)(Z + Z0 I)^-1
ScatteringMatrix3 z_to_s(const ImpedanceMatrix3& z, double z0 = kDefaultZ0);

// Folds series resistances of the passive loads into the radiator so that the
// loads can afterwards be treated as purely reactive.
ScatteringMatrix3 amend_with_losses(const ScatteringMatrix3& s, double r1, double r2);

// Reflection coefficient seen at the active port with both passive ports
// terminated: S11 + S1p G (I - Spp G)^-1 Sp1, G = diag of load reflections.
cplx input_reflection(const ScatteringMatrix3& s, const LoadTermination& load);

// Reflection coefficient of a single load impedance r + jx against z0.
cplx load_reflection(double r, double x, double z0);

// JSON: {"z0": 50, "s": [[[re, im], [re, im], [re, im]], ...3 rows]}
ScatteringMatrix3 load_s_matrix(const std::filesystem::path& path);
void save_s_matrix(const ScatteringMatrix3& s, const std::filesystem::path& path);

}  // namespace bsmimo::network
