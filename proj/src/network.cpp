#include "bsmimo/network.hpp"

#include <fstream>

#include <json.hpp>

#include "bsmimo/error.hpp"

namespace bsmimo::network {

namespace {

// Solves A X = B for 3x3 systems after a condition check; used for both
// conversions so the bound is applied uniformly.
Mat3 guarded_right_divide(const Mat3& numer, const Mat3& denom, ErrorCode code, const char* what) {
  const double cond = condition_number(denom);
  if (!(cond < kConditionBound)) {
    fail(code, std::string(what) + " is numerically singular (cond = " + std::to_string(cond) + ")");
  }
  // numer * denom^-1 == (denom^T \ numer^T)^T
  return denom.transpose().partialPivLu().solve(numer.transpose()).transpose();
}

}  // namespace

ScatteringMatrix3::ScatteringMatrix3(const Mat3& entries, double z0) : entries_(entries), z0_(z0) {
  require(z0 > 0.0 && std::isfinite(z0), ErrorCode::InvalidArgument, "reference impedance must be positive");
  require(entries.allFinite(), ErrorCode::InvalidArgument, "S-matrix entries must be finite");
}

bool ScatteringMatrix3::is_symmetric_radiator(double tol) const {
  const auto& s = entries_;
  return std::abs(s(0, 1) - s(0, 2)) <= tol && std::abs(s(1, 0) - s(2, 0)) <= tol &&
         std::abs(s(1, 1) - s(2, 2)) <= tol && std::abs(s(1, 2) - s(2, 1)) <= tol;
}

ImpedanceMatrix3::ImpedanceMatrix3(const Mat3& entries) : entries_(entries) {
  require(entries.allFinite(), ErrorCode::SingularConversion, "impedance matrix has non-finite entries");
}

LoadTermination::LoadTermination(double x1_, double x2_, double r1_, double r2_)
    : x1(x1_), x2(x2_), r1(r1_), r2(r2_) {
  require(r1 >= 0.0 && r2 >= 0.0, ErrorCode::InvalidArgument, "load resistance must be non-negative");
}

ImpedanceMatrix3 s_to_z(const ScatteringMatrix3& s) {
  const Mat3 id = Mat3::Identity();
  const Mat3 z = s.z0() * guarded_right_divide(id + s.entries(), id - s.entries(),
                                               ErrorCode::SingularConversion, "I - S");
  return ImpedanceMatrix3(z);
}

ScatteringMatrix3 z_to_s(const ImpedanceMatrix3& z, double z0) {
  require(z0 > 0.0, ErrorCode::InvalidArgument, "reference impedance must be positive");
  const Mat3 z0i = z0 * Mat3::Identity();
  return ScatteringMatrix3(
      guarded_right_divide(z.entries() - z0i, z.entries() + z0i, ErrorCode::SingularConversion, "Z + Z0 I"), z0);
}

ScatteringMatrix3 amend_with_losses(const ScatteringMatrix3& s, double r1, double r2) {
  require(r1 >= 0.0 && r2 >= 0.0, ErrorCode::InvalidArgument, "load resistance must be non-negative");
  if (r1 == 0.0 && r2 == 0.0) return s;
  Mat3 z = s_to_z(s).entries();
  z(1, 1) += r1;
  z(2, 2) += r2;
  return z_to_s(ImpedanceMatrix3(z), s.z0());
}

cplx load_reflection(double r, double x, double z0) {
  const cplx zl(r, x);
  return (zl - z0) / (zl + z0);
}

cplx input_reflection(const ScatteringMatrix3& s, const LoadTermination& load) {
  const auto& m = s.entries();
  const Eigen::Matrix2cd gl =
      Eigen::Vector2cd(load_reflection(load.r1, load.x1, s.z0()), load_reflection(load.r2, load.x2, s.z0()))
          .asDiagonal();
  const Eigen::Matrix2cd spp = m.block<2, 2>(1, 1);
  const Eigen::Matrix2cd sys = Eigen::Matrix2cd::Identity() - spp * gl;
  const double cond = condition_number(sys);
  if (!(cond < kConditionBound)) {
    fail(ErrorCode::SingularReduction, "passive-port subsystem is singular for this termination");
  }
  const Eigen::RowVector2cd s1p = m.block<1, 2>(0, 1);
  const Eigen::Vector2cd sp1 = m.block<2, 1>(1, 0);
  return m(0, 0) + (s1p * gl * sys.partialPivLu().solve(sp1))(0);
}

ScatteringMatrix3 load_s_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Validation, "cannot open S-matrix file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  try {
    const double z0 = j.value("z0", kDefaultZ0);
    const auto& rows = j.at("s");
    require(rows.is_array() && rows.size() == 3, ErrorCode::Parse, path.string() + ": 's' must have 3 rows");
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      require(rows[r].is_array() && rows[r].size() == 3, ErrorCode::Parse,
              path.string() + ": row " + std::to_string(r) + " must have 3 entries");
      for (int c = 0; c < 3; ++c) {
        const auto& e = rows[r][c];
        require(e.is_array() && e.size() == 2, ErrorCode::Parse, path.string() + ": entries are [re, im] pairs");
        m(r, c) = cplx(e[0].get<double>(), e[1].get<double>());
      }
    }
    return ScatteringMatrix3(m, z0);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void save_s_matrix(const ScatteringMatrix3& s, const std::filesystem::path& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < 3; ++c) row.push_back({s(r, c).real(), s(r, c).imag()});
    rows.push_back(row);
  }
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Validation, "cannot write " + path.string());
  out << nlohmann::json{{"z0", s.z0()}, {"s", rows}}.dump(2) << '\n';
}

}  // namespace bsmimo::network
