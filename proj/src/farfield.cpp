#include "bsmimo/farfield.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "bsmimo/error.hpp"

namespace bsmimo::farfield {

namespace {

void check_same_grid(const FarFieldPattern& a, const FarFieldPattern& b) {
  if (!(a.grid() == b.grid())) {
    fail(ErrorCode::GridMismatch, "patterns are sampled on different grids (" + std::to_string(a.grid().n_theta) +
                                      "x" + std::to_string(a.grid().n_phi) + " vs " +
                                      std::to_string(b.grid().n_theta) + "x" + std::to_string(b.grid().n_phi) + ")");
  }
}

// Quadrature weight of sample (i, k) for an integral over the unit sphere.
std::vector<double> sphere_weights(const SphericalGrid& g) {
  std::vector<double> w(g.size());
  for (int i = 0; i < g.n_theta; ++i) {
    const double end = (i == 0 || i == g.n_theta - 1) ? 0.5 : 1.0;
    const double wi = end * g.d_theta() * std::sin(g.theta(i)) * g.d_phi();
    for (int k = 0; k < g.n_phi; ++k) w[g.index(i, k)] = wi;
  }
  return w;
}

}  // namespace

std::size_t SphericalGrid::nearest(double theta, double phi) const {
  int i = static_cast<int>(std::lround(theta / d_theta()));
  i = std::clamp(i, 0, n_theta - 1);
  double p = std::fmod(phi, 2.0 * kPi);
  if (p < 0.0) p += 2.0 * kPi;
  int k = static_cast<int>(std::lround(p / d_phi())) % n_phi;
  return index(i, k);
}

FarFieldPattern::FarFieldPattern(SphericalGrid grid, std::vector<cplx> e_theta, std::vector<cplx> e_phi)
    : grid_(grid), e_theta_(std::move(e_theta)), e_phi_(std::move(e_phi)) {
  require(grid_.n_theta >= 2 && grid_.n_phi >= 1, ErrorCode::InvalidArgument, "pattern grid too small");
  require(e_theta_.size() == grid_.size() && e_phi_.size() == grid_.size(), ErrorCode::InvalidArgument,
          "pattern arrays do not match the grid");
  for (std::size_t n = 0; n < e_theta_.size(); ++n) {
    require(std::isfinite(e_theta_[n].real()) && std::isfinite(e_theta_[n].imag()) &&
                std::isfinite(e_phi_[n].real()) && std::isfinite(e_phi_[n].imag()),
            ErrorCode::InvalidArgument, "pattern contains non-finite values");
  }
}

FarFieldPattern FarFieldPattern::zeros(SphericalGrid grid) {
  return FarFieldPattern(grid, std::vector<cplx>(grid.size()), std::vector<cplx>(grid.size()));
}

FarFieldPattern FarFieldPattern::from_function(
    SphericalGrid grid, const std::function<std::pair<cplx, cplx>(double, double)>& field) {
  std::vector<cplx> et(grid.size()), ep(grid.size());
  for (int i = 0; i < grid.n_theta; ++i) {
    for (int k = 0; k < grid.n_phi; ++k) {
      const auto [a, b] = field(grid.theta(i), grid.phi(k));
      et[grid.index(i, k)] = a;
      ep[grid.index(i, k)] = b;
    }
  }
  return FarFieldPattern(grid, std::move(et), std::move(ep));
}

FarFieldPattern FarFieldPattern::operator+(const FarFieldPattern& o) const {
  check_same_grid(*this, o);
  auto et = e_theta_, ep = e_phi_;
  for (std::size_t n = 0; n < et.size(); ++n) {
    et[n] += o.e_theta_[n];
    ep[n] += o.e_phi_[n];
  }
  return FarFieldPattern(grid_, std::move(et), std::move(ep));
}

FarFieldPattern FarFieldPattern::operator-(const FarFieldPattern& o) const { return *this + o * cplx(-1.0); }

FarFieldPattern FarFieldPattern::operator*(cplx a) const {
  auto et = e_theta_, ep = e_phi_;
  for (std::size_t n = 0; n < et.size(); ++n) {
    et[n] *= a;
    ep[n] *= a;
  }
  return FarFieldPattern(grid_, std::move(et), std::move(ep));
}

BasisPair basis_from_states(const FarFieldPattern& e_plus, const FarFieldPattern& e_minus) {
  check_same_grid(e_plus, e_minus);
  const auto& g = e_plus.grid();
  std::vector<cplx> t1(g.size()), p1(g.size()), t2(g.size()), p2(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    t1[n] = (e_plus.e_theta()[n] + e_minus.e_theta()[n]) / 2.0;
    p1[n] = (e_plus.e_phi()[n] + e_minus.e_phi()[n]) / 2.0;
    t2[n] = (e_plus.e_theta()[n] - e_minus.e_theta()[n]) / 2.0;
    p2[n] = (e_plus.e_phi()[n] - e_minus.e_phi()[n]) / 2.0;
  }
  return {FarFieldPattern(g, std::move(t1), std::move(p1)), FarFieldPattern(g, std::move(t2), std::move(p2))};
}

FarFieldPattern instantaneous_from_basis(const BasisPair& basis, cplx ratio) {
  check_same_grid(basis.b1, basis.b2);
  const auto& g = basis.b1.grid();
  std::vector<cplx> et(g.size()), ep(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    et[n] = basis.b1.e_theta()[n] + ratio * basis.b2.e_theta()[n];
    ep[n] = basis.b1.e_phi()[n] + ratio * basis.b2.e_phi()[n];
  }
  return FarFieldPattern(g, std::move(et), std::move(ep));
}

cplx pattern_inner_product(const FarFieldPattern& a, const FarFieldPattern& b) {
  check_same_grid(a, b);
  const auto w = sphere_weights(a.grid());
  std::vector<cplx> terms(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) {
    terms[n] = w[n] * (a.e_theta()[n] * std::conj(b.e_theta()[n]) + a.e_phi()[n] * std::conj(b.e_phi()[n]));
  }
  return pairwise_sum(std::span<const cplx>(terms));
}

double radiated_power(const FarFieldPattern& p) {
  const auto w = sphere_weights(p.grid());
  std::vector<double> terms(w.size());
  for (std::size_t n = 0; n < w.size(); ++n) {
    terms[n] = w[n] * (std::norm(p.e_theta()[n]) + std::norm(p.e_phi()[n]));
  }
  return pairwise_sum(std::span<const double>(terms));
}

double imbalance_ratio_db(const BasisPair& basis) {
  const double p1 = radiated_power(basis.b1);
  const double p2 = radiated_power(basis.b2);
  const double scale = std::max(p1, p2);
  if (!(scale > 0.0) || p1 <= 1e-15 * scale || p2 <= 1e-15 * scale) {
    fail(ErrorCode::DegenerateBasis, "a basis pattern radiates no power");
  }
  return linear_to_db(p1 / p2);
}

double orthogonality_residual(const BasisPair& basis) {
  const double p1 = radiated_power(basis.b1);
  const double p2 = radiated_power(basis.b2);
  if (!(p1 > 0.0 && p2 > 0.0)) fail(ErrorCode::DegenerateBasis, "a basis pattern radiates no power");
  return std::abs(pattern_inner_product(basis.b1, basis.b2)) / std::sqrt(p1 * p2);
}

std::vector<double> evm_map(const BasisPair& basis, const std::vector<StatePattern>& states) {
  require(!states.empty(), ErrorCode::InvalidArgument, "EVM needs at least one state pattern");
  check_same_grid(basis.b1, basis.b2);
  for (const auto& st : states) check_same_grid(basis.b1, st.pattern);
  const auto& g = basis.b1.grid();
  std::vector<double> out(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    double num = 0.0, den = 0.0;
    for (const auto& st : states) {
      const cplx it = basis.b1.e_theta()[n] + st.ratio * basis.b2.e_theta()[n];
      const cplx ip = basis.b1.e_phi()[n] + st.ratio * basis.b2.e_phi()[n];
      num += std::norm(it - st.pattern.e_theta()[n]) + std::norm(ip - st.pattern.e_phi()[n]);
      den += std::norm(it) + std::norm(ip);
    }
    if (den == 0.0) {
      out[n] = std::numeric_limits<double>::quiet_NaN();
    } else if (num == 0.0) {
      out[n] = -std::numeric_limits<double>::infinity();
    } else {
      out[n] = linear_to_db(num / den);
    }
  }
  return out;
}

double evm_cut_average_db(const SphericalGrid& grid, const std::vector<double>& evm_db, int phi_index) {
  require(evm_db.size() == grid.size(), ErrorCode::GridMismatch, "EVM map does not match grid");
  require(phi_index >= 0 && phi_index < grid.n_phi, ErrorCode::InvalidArgument, "phi index out of range");
  std::vector<double> lin;
  for (int i = 0; i < grid.n_theta; ++i) {
    const double v = evm_db[grid.index(i, phi_index)];
    if (std::isnan(v)) continue;
    lin.push_back(std::isinf(v) ? 0.0 : db_to_linear(v));
  }
  if (lin.empty()) return std::numeric_limits<double>::quiet_NaN();
  return linear_to_db(pairwise_sum(std::span<const double>(lin)) / static_cast<double>(lin.size()));
}

FarFieldPattern mirror_yz(const FarFieldPattern& p) {
  const auto& g = p.grid();
  require(g.n_phi % 2 == 0, ErrorCode::InvalidArgument, "mirroring needs an even number of phi samples");
  std::vector<cplx> et(g.size()), ep(g.size());
  for (int i = 0; i < g.n_theta; ++i) {
    for (int k = 0; k < g.n_phi; ++k) {
      const int km = ((g.n_phi / 2 - k) % g.n_phi + g.n_phi) % g.n_phi;
      et[g.index(i, k)] = p.theta_at(i, km);
      ep[g.index(i, k)] = -p.phi_at(i, km);
    }
  }
  return FarFieldPattern(g, std::move(et), std::move(ep));
}

FarFieldPattern isotropic(SphericalGrid grid, cplx amplitude) {
  return FarFieldPattern::from_function(grid, [&](double, double) { return std::pair{amplitude, cplx{}}; });
}

FarFieldPattern hertzian_dipole(SphericalGrid grid) {
  return FarFieldPattern::from_function(grid, [](double th, double) { return std::pair{cplx(std::sin(th)), cplx{}}; });
}

FarFieldPattern tilted_isotropic(SphericalGrid grid, double angle) {
  return FarFieldPattern::from_function(
      grid, [&](double, double) { return std::pair{cplx(std::cos(angle)), cplx(std::sin(angle))}; });
}

BasisPair mirrored_basis(SphericalGrid grid, double coupling) {
  const double a = std::sqrt(3.0) * coupling;
  auto b1 = FarFieldPattern::from_function(grid, [&](double th, double ph) {
    return std::pair{cplx(1.0), cplx(0.0, a * std::sin(th) * std::cos(ph))};
  });
  auto b2 = FarFieldPattern::from_function(grid, [&](double th, double ph) {
    return std::pair{cplx(a * std::sin(th) * std::cos(ph)), cplx(1.0)};
  });
  return {std::move(b1), std::move(b2)};
}

namespace {

nlohmann::json to_pairs(const std::vector<cplx>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& z : v) a.push_back({z.real(), z.imag()});
  return a;
}

std::vector<cplx> from_pairs(const nlohmann::json& a, const std::string& where) {
  require(a.is_array(), ErrorCode::Parse, where + " must be an array");
  std::vector<cplx> out;
  out.reserve(a.size());
  for (const auto& e : a) {
    require(e.is_array() && e.size() == 2, ErrorCode::Parse, where + ": entries are [re, im] pairs");
    out.emplace_back(e[0].get<double>(), e[1].get<double>());
  }
  return out;
}

}  // namespace

FarFieldPattern load_pattern(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Validation, "cannot open pattern file " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    SphericalGrid g{j.at("n_theta").get<int>(), j.at("n_phi").get<int>()};
    return FarFieldPattern(g, from_pairs(j.at("e_theta"), path.string() + ": e_theta"),
                           from_pairs(j.at("e_phi"), path.string() + ": e_phi"));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) fail(ErrorCode::Parse, path.string() + ": " + e.what());
    throw;
  }
}

void save_pattern(const FarFieldPattern& p, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Validation, "cannot write " + path.string());
  nlohmann::json j{{"n_theta", p.grid().n_theta},
                   {"n_phi", p.grid().n_phi},
                   {"e_theta", to_pairs(p.e_theta())},
                   {"e_phi", to_pairs(p.e_phi())}};
  out << j.dump() << '\n';
}

}  // namespace bsmimo::farfield
