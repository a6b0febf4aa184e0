#pragma once

// Competitor estimators: peaks-over-threshold analysis of one location's own
// data, and the direct empirical estimate from a long catalog.

#include "stme/catalog.hpp"
#include "stme/estimate.hpp"
#include "stme/evd.hpp"

#include <cstddef>
#include <vector>

namespace stme {

struct LocationSeries {
  LocationId location_id{0};
  std::vector<double> values;  // one per event with data at the location
};

LocationSeries location_series(const CycloneCatalog& catalog, LocationId location);

/// GPD fit to the n largest values of the series (threshold convention as for
/// STM) and its quantile at 1 - (T0/n)/T. Requires n >= 5 and at least n
/// values; a failed fit is returned as a flagged estimate.
ReturnValueEstimate single_location_rv(const LocationSeries& series, std::size_t n,
                                       double T_years, double T0_years, FitMethod method);

/// With k = T_L / T expected exceedances, interpolates linearly between the
/// floor(k)-th and ceil(k)-th largest values: (1 - f) x_(floor k) + f x_(ceil k),
/// f = k - floor(k).
ReturnValueEstimate empirical_rv(const LocationSeries& series, double T_years, double T_L_years);

}  // namespace stme
