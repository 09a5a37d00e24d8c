#include "bsmimo/load_synthesis.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "bsmimo/error.hpp"

namespace bsmimo::loads {

namespace {

constexpr double kUnitTol = 1e-9;
constexpr double kPoleRelTol = 1e-6;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

CombinationRatio::CombinationRatio(cplx value) : value_(value) {
  if (!(std::abs(std::abs(value) - 1.0) < kUnitTol)) {
    fail(ErrorCode::NonPskRatio, "combination ratio must have unit modulus, got |x| = " + fmt(std::abs(value)));
  }
}

TuningRange::TuningRange(double lo, double hi) : min(lo), max(hi) {
  require(lo < hi, ErrorCode::InvalidArgument, "tuning range requires min < max");
}

cplx delta(const network::ScatteringMatrix3& s) { return s(1, 1) - s(2, 1); }

ReactancePair reactance_for_ratio(const network::ScatteringMatrix3& s_amended, const CombinationRatio& ratio,
                                  double x1_free) {
  const cplx d = delta(s_amended);
  const double z0 = s_amended.z0();
  const double im_d = d.imag();
  const double one_minus = 1.0 - std::norm(d);
  const double plus_sq = std::norm(1.0 + d);
  const double minus_sq = std::norm(1.0 - d);

  auto solve = [&](cplx r) {
    // Half-angle of arg(r) in (-pi/2, pi/2], taken from the components so the
    // ratio -1 lands exactly on cos = 0.
    const double c = std::sqrt(std::max(0.0, (1.0 + r.real()) / 2.0));
    const double s = c > 0.0 ? r.imag() / (2.0 * c) : 1.0;
    if (c == 0.0) return x1_free;  // c2 = d1 = 0: the free parameter is a fixed point
    const double c1 = 2.0 * im_d * c + one_minus * s;
    const double c2 = z0 * plus_sq * c;
    const double d1 = minus_sq * c;
    const double d2 = 2.0 * z0 * im_d * c - z0 * one_minus * s;
    const double denom = d1 * x1_free + d2;
    if (std::abs(denom) < kPoleRelTol * z0) {
      fail(ErrorCode::PoleAtFreeParameter, "free parameter " + fmt(x1_free) + " hits a pole of the load solution");
    }
    return -z0 * (c1 * x1_free + c2) / denom;
  };

  const double x1 = solve(ratio.value());
  const double x2 = solve(-ratio.value());
  if (!std::isfinite(x1) || !std::isfinite(x2)) {
    fail(ErrorCode::PoleAtFreeParameter, "non-finite reactance at free parameter " + fmt(x1_free));
  }
  return {x1, x2};
}

std::vector<CombinationRatio> psk_ratio_set(int modulation_order) {
  const int m = modulation_order;
  require(m >= 2 && (m & (m - 1)) == 0, ErrorCode::InvalidArgument,
          "modulation order must be a power of two >= 2, got " + std::to_string(m));
  std::vector<CombinationRatio> out;
  out.emplace_back(cplx(-1.0, 0.0));
  out.emplace_back(cplx(1.0, 0.0));
  for (int k = 1; k < m / 2; ++k) {
    const double a = 2.0 * kPi * k / m;
    cplx r = std::polar(1.0, a);
    // exact axis points for the quadrature ratios
    if (4 * k == m) r = cplx(0.0, 1.0);
    out.emplace_back(r);
    out.emplace_back(-r);
  }
  return out;
}

LoadSchedule build_schedule(const network::ScatteringMatrix3& s_amended, int modulation_order, double x1_free,
                            std::string s_matrix_ref) {
  LoadSchedule schedule;
  schedule.free_param = x1_free;
  schedule.s_matrix_ref = std::move(s_matrix_ref);
  for (const auto& r : psk_ratio_set(modulation_order)) {
    const auto [x1, x2] = reactance_for_ratio(s_amended, r, x1_free);
    schedule.states.push_back({r, x1, x2});
  }
  return schedule;
}

const ScheduleState* LoadSchedule::find(cplx ratio, double tol) const {
  for (const auto& st : states) {
    if (std::abs(st.ratio.value() - ratio) <= tol) return &st;
  }
  return nullptr;
}

bool LoadSchedule::satisfies_invariants() const {
  for (const auto& st : states) {
    if (!std::isfinite(st.x1) || !std::isfinite(st.x2)) return false;
    const auto* neg = find(-st.ratio.value());
    if (neg == nullptr || neg->x2 != st.x1 || neg->x1 != st.x2) return false;
  }
  return true;
}

std::vector<SweepPoint> sweep_free_parameter(const network::ScatteringMatrix3& s_amended, int modulation_order,
                                             const std::vector<double>& grid, const TuningRange& range) {
  require(!grid.empty(), ErrorCode::InvalidArgument, "sweep grid is empty");
  std::vector<SweepPoint> out;
  out.reserve(grid.size());
  for (const double f : grid) {
    try {
      auto schedule = build_schedule(s_amended, modulation_order, f);
      bool feasible = true;
      for (const auto& st : schedule.states) feasible = feasible && range.contains(st.x1) && range.contains(st.x2);
      out.push_back({f, std::move(schedule), feasible, false});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PoleAtFreeParameter) throw;
      out.push_back({f, LoadSchedule{{}, f, {}}, false, true});
    }
  }
  return out;
}

std::vector<double> default_sweep_grid() {
  std::vector<double> g;
  for (int x = -500; x <= 500; ++x) g.push_back(x);
  return g;
}

void write_schedule_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << "x1_free,state,re_xbar,im_xbar,x1,x2,feasible\n";
  for (const auto& p : points) {
    if (p.pole) {
      out << fmt(p.x1_free) << ",0,,,,,pole\n";
      continue;
    }
    int idx = 1;
    for (const auto& st : p.schedule.states) {
      out << fmt(p.x1_free) << ',' << idx++ << ',' << fmt(st.ratio.value().real()) << ','
          << fmt(st.ratio.value().imag()) << ',' << fmt(st.x1) << ',' << fmt(st.x2) << ','
          << (p.feasible ? "true" : "false") << '\n';
    }
  }
}

}  // namespace bsmimo::loads
