#pragma once

// STM-E: combines the STM tail model with per-location exposure
// distributions to give the distribution of SWH at each location, H = E * S,
// and its T-year return values.

#include "stme/catalog.hpp"
#include "stme/estimate.hpp"
#include "stme/evd.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace stme {

/// Equal-weight empirical distribution of exposure at one location.
struct ExposureEcdf {
  LocationId location_id{0};
  std::vector<double> atoms;  // ascending, in [0, 1]

  double cdf(double e) const;
};

/// Exposures at `location` of the listed events; events without data there
/// are skipped. Throws InputError if none remain.
ExposureEcdf exposure_ecdf(const ExposureMatrix& matrix, LocationId location,
                           std::span<const EventId> event_ids);
/// Same, over every event in the matrix.
ExposureEcdf exposure_ecdf_all(const ExposureMatrix& matrix, LocationId location);

/// F_H(h) = (1/m) sum_i F_S(h / e_i) with F_S the GPD conditional on
/// exceeding the threshold. Atoms equal to zero contribute 1.
double swh_cdf(const GpdParams& fit, const ExposureEcdf& ecdf, double h);
/// Same with F_S the full below/above-threshold mixture.
double swh_cdf(const StmDistribution& dist, const ExposureEcdf& ecdf, double h);

inline constexpr double kQuantileTolerance = 1e-6;  // metres
inline constexpr int kQuantileMaxIterations = 200;

struct SwhQuantile {
  double value_m{0.0};
  bool at_endpoint{false};
};

/// inf{h : swh_cdf(h) >= p}, by bracketing and bisection.
SwhQuantile swh_quantile(const GpdParams& fit, const ExposureEcdf& ecdf, double p);
SwhQuantile swh_quantile(const StmDistribution& dist, const ExposureEcdf& ecdf, double p);

/// Quantile of F_H at 1 - (T0/n)/T. Requires T > T0 > 0 and n >= 1.
ReturnValueEstimate return_value(const GpdParams& fit, const ExposureEcdf& ecdf, double T_years,
                                 double T0_years, std::size_t n,
                                 FitMethod method = FitMethod::MLE);

enum class TailModel {
  Conditional,  // GPD given retention, probability level per retained event
  Mixture,      // full STM mixture, probability level per observed event
};

enum class ExposureSource { Retained, All };

struct StmeOptions {
  TailModel tail{TailModel::Conditional};
  ExposureSource exposures{ExposureSource::Retained};
};

/// Regional STM series and exposures, computed once and reused across
/// sample sizes and methods.
struct RegionalData {
  CycloneCatalog catalog;
  StmSeries stm;
  ExposureMatrix exposures;
};

RegionalData prepare_region(const CycloneCatalog& catalog, const RegionSpec& region);

/// Fit the top-n STM values and estimate return values at each location.
/// A failed fit flags every location; per-location problems flag only that
/// location. T0 is the catalog duration.
std::vector<ReturnValueEstimate> estimate_stme(const RegionalData& data, std::size_t n,
                                               double T_years, FitMethod method,
                                               std::span<const LocationId> locations,
                                               const StmeOptions& options = {});

std::vector<ReturnValueEstimate> run_stme(const CycloneCatalog& catalog, const RegionSpec& region,
                                          std::size_t n, double T_years, FitMethod method,
                                          std::span<const LocationId> locations,
                                          const StmeOptions& options = {});

}  // namespace stme
