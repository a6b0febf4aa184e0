#pragma once

#include "stme/catalog.hpp"
#include "stme/evd.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

namespace stme {

enum class Estimator { STME, SINGLE, EMPIRICAL };

std::string_view to_string(Estimator estimator);
Estimator parse_estimator(std::string_view text);

/// A T-year return value at one location. `flag` is empty for a clean
/// estimate, "endpoint" when the quantile sits on the finite upper end of the
/// support, and otherwise names the failure (value is then NaN).
struct ReturnValueEstimate {
  LocationId location_id{0};
  Estimator estimator{Estimator::STME};
  std::optional<FitMethod> method;  // absent for EMPIRICAL
  std::size_t n{0};
  double T_years{0.0};
  double T0_years{0.0};
  double value_m{std::nan("")};
  std::string flag;

  bool ok() const { return std::isfinite(value_m); }
};

inline constexpr std::string_view kEstimateHeader =
    "location_id,estimator,method,n,T_years,T0_years,value_m,flag";

void write_estimate_row(std::ostream& out, const ReturnValueEstimate& e);
void write_estimates_csv(std::ostream& out, std::span<const ReturnValueEstimate> estimates);

/// Per-retained-event non-exceedance probability 1 - (T0/n)/T.
double target_probability(double T_years, double T0_years, std::size_t n);

}  // namespace stme
