#include "stme/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace stme {

LocationSeries location_series(const CycloneCatalog& catalog, LocationId location) {
  if (catalog.find_location(location) == nullptr) {
    throw InputError("location " + std::to_string(location) + " not in catalog");
  }
  LocationSeries series{location, {}};
  for (const auto& ev : catalog.events()) {
    if (const auto v = ev.value_at(location)) series.values.push_back(*v);
  }
  return series;
}

ReturnValueEstimate single_location_rv(const LocationSeries& series, std::size_t n,
                                       double T_years, double T0_years, FitMethod method) {
  if (n < 5) throw std::invalid_argument("single_location_rv: n must be at least 5");
  if (series.values.size() < n) {
    throw std::invalid_argument("single_location_rv: location " +
                                std::to_string(series.location_id) + " has " +
                                std::to_string(series.values.size()) + " values, fewer than n = " +
                                std::to_string(n));
  }
  const double p = target_probability(T_years, T0_years, n);

  ReturnValueEstimate est;
  est.location_id = series.location_id;
  est.estimator = Estimator::SINGLE;
  est.method = method;
  est.n = n;
  est.T_years = T_years;
  est.T0_years = T0_years;

  std::vector<double> sorted = series.values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double threshold = n < sorted.size() ? sorted[n] : below_minimum(sorted.back());
  sorted.resize(n);

  FitReport fit;
  try {
    fit = fit_gpd(method, sorted, threshold);
  } catch (const std::invalid_argument&) {
    est.flag = "fit_degenerate";
    return est;
  }
  if (!fit.converged) {
    est.flag = "fit_failed";
    return est;
  }
  est.value_m = gpd_quantile(*fit.params, p);
  return est;
}

ReturnValueEstimate empirical_rv(const LocationSeries& series, double T_years, double T_L_years) {
  if (!(T_years > 0.0) || !(T_L_years > T_years)) {
    throw std::invalid_argument("empirical_rv: need T_L > T > 0");
  }
  const double k = T_L_years / T_years;
  const double lower_rank = std::floor(k);
  const double upper_rank = std::ceil(k);
  if (static_cast<double>(series.values.size()) <= upper_rank) {
    throw std::invalid_argument("empirical_rv: location " + std::to_string(series.location_id) +
                                " has too few values for T_L / T = " + std::to_string(k));
  }
  std::vector<double> sorted = series.values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double f = k - lower_rank;
  const double lower = sorted[static_cast<std::size_t>(lower_rank) - 1];
  const double upper = sorted[static_cast<std::size_t>(upper_rank) - 1];

  ReturnValueEstimate est;
  est.location_id = series.location_id;
  est.estimator = Estimator::EMPIRICAL;
  est.n = series.values.size();
  est.T_years = T_years;
  est.T0_years = T_L_years;
  est.value_m = (1.0 - f) * lower + f * upper;
  return est;
}

}  // namespace stme
