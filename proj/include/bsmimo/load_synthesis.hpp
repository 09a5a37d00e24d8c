#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "bsmimo/network.hpp"

namespace bsmimo::loads {

// Ratio x2/x1 of the two PSK symbols sent in one interval. Unit modulus.
class CombinationRatio {
 public:
  explicit CombinationRatio(cplx value);
  cplx value() const { return value_; }
  CombinationRatio negated() const { return CombinationRatio(-value_); }

 private:
  cplx value_;
};

struct ScheduleState {
  CombinationRatio ratio;
  double x1;  // reactance at passive port 1 [ohm]
  double x2;  // reactance at passive port 2 [ohm]
};

struct LoadSchedule {
  std::vector<ScheduleState> states;
  double free_param = 0.0;  // X1 for the ratio -1 [ohm]
  std::string s_matrix_ref;

  // Negation closure with x1(r) == x2(-r) exactly, and finite reactances.
  bool satisfies_invariants() const;
  const ScheduleState* find(cplx ratio, double tol = 1e-9) const;
};

struct TuningRange {
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();

  TuningRange() = default;
  TuningRange(double lo, double hi);
  bool contains(double x) const { return x >= min && x <= max; }
};

// Difference between the self and mutual reflection of the passive ports,
// S_p1p1 - S_p2p1. The load closed form is written in terms of this quantity.
cplx delta(const network::ScatteringMatrix3& s);

struct ReactancePair {
  double x1;
  double x2;
};

// Reactances (X1, X2) that make the radiator emit B1 + ratio * B2, given the
// free parameter X1 at ratio -1. X2 for a ratio equals X1 for the negated one.
ReactancePair reactance_for_ratio(const network::ScatteringMatrix3& s_amended, const CombinationRatio& ratio,
                                  double x1_free);

// Ratios in state order: -1, +1, then (r, -r) pairs by increasing angle.
std::vector<CombinationRatio> psk_ratio_set(int modulation_order);

LoadSchedule build_schedule(const network::ScatteringMatrix3& s_amended, int modulation_order, double x1_free,
                            std::string s_matrix_ref = {});

struct SweepPoint {
  double x1_free;
  LoadSchedule schedule;  // empty when `pole` is set
  bool feasible;
  bool pole;
};

std::vector<SweepPoint> sweep_free_parameter(const network::ScatteringMatrix3& s_amended, int modulation_order,
                                             const std::vector<double>& grid, const TuningRange& range);

// Default grid: 1 ohm steps over [-500, 500].
std::vector<double> default_sweep_grid();

// CSV columns: x1_free,state,re_xbar,im_xbar,x1,x2,feasible
void write_schedule_csv(std::ostream& out, const std::vector<SweepPoint>& points);

}  // namespace bsmimo::loads
