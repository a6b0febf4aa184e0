#include "stme/model.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace stme {

namespace {

template <class Cdf>
SwhQuantile invert(const Cdf& cdf, double p, std::optional<double> cap, double start) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("swh_quantile: p must lie in (0, 1)");
  }
  if (cdf(0.0) >= p) return {0.0, false};
  double lo = 0.0;
  double hi = 0.0;
  if (cap) {
    hi = *cap;
    if (cdf(hi) < p) return {hi, true};
  } else {
    hi = std::max(start, 1.0);
    while (cdf(hi) < p) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi)) throw std::runtime_error("swh_quantile: failed to bracket");
    }
  }
  for (int i = 0; i < kQuantileMaxIterations && hi - lo > kQuantileTolerance; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) >= p) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {hi, cap.has_value() && *cap - hi <= kQuantileTolerance};
}

std::optional<double> support_cap(const GpdParams& fit, const ExposureEcdf& ecdf) {
  if (const auto end = fit.upper_endpoint()) return ecdf.atoms.back() * *end;
  return std::nullopt;
}

template <class StmCdf>
double mix_over_atoms(const StmCdf& stm_cdf, const ExposureEcdf& ecdf, double h) {
  if (h < 0.0) return 0.0;
  double total = 0.0;
  for (const double e : ecdf.atoms) total += e > 0.0 ? stm_cdf(h / e) : 1.0;
  return total / static_cast<double>(ecdf.atoms.size());
}

ExposureEcdf make_ecdf(LocationId location, std::vector<double> atoms) {
  if (atoms.empty()) {
    throw InputError("no exposure data at location " + std::to_string(location));
  }
  std::sort(atoms.begin(), atoms.end());
  return ExposureEcdf{location, std::move(atoms)};
}

std::size_t column_or_throw(const ExposureMatrix& matrix, LocationId location) {
  const auto col = matrix.column_of(location);
  if (!col) throw InputError("location " + std::to_string(location) + " not in exposure matrix");
  return *col;
}

}  // namespace

double ExposureEcdf::cdf(double e) const {
  const auto count = std::upper_bound(atoms.begin(), atoms.end(), e) - atoms.begin();
  return static_cast<double>(count) / static_cast<double>(atoms.size());
}

ExposureEcdf exposure_ecdf(const ExposureMatrix& matrix, LocationId location,
                           std::span<const EventId> event_ids) {
  const auto col = column_or_throw(matrix, location);
  std::vector<double> atoms;
  for (const auto id : event_ids) {
    const auto row = matrix.row_of(id);
    if (!row) continue;
    if (const auto e = matrix.at(*row, col)) atoms.push_back(*e);
  }
  return make_ecdf(location, std::move(atoms));
}

ExposureEcdf exposure_ecdf_all(const ExposureMatrix& matrix, LocationId location) {
  const auto col = column_or_throw(matrix, location);
  std::vector<double> atoms;
  for (std::size_t row = 0; row < matrix.rows(); ++row) {
    if (const auto e = matrix.at(row, col)) atoms.push_back(*e);
  }
  return make_ecdf(location, std::move(atoms));
}

double swh_cdf(const GpdParams& fit, const ExposureEcdf& ecdf, double h) {
  return mix_over_atoms([&](double s) { return gpd_cdf(fit, s); }, ecdf, h);
}

double swh_cdf(const StmDistribution& dist, const ExposureEcdf& ecdf, double h) {
  return mix_over_atoms([&](double s) { return mixture_cdf(dist, s); }, ecdf, h);
}

SwhQuantile swh_quantile(const GpdParams& fit, const ExposureEcdf& ecdf, double p) {
  return invert([&](double h) { return swh_cdf(fit, ecdf, h); }, p, support_cap(fit, ecdf),
                ecdf.atoms.back() * fit.threshold);
}

SwhQuantile swh_quantile(const StmDistribution& dist, const ExposureEcdf& ecdf, double p) {
  return invert([&](double h) { return swh_cdf(dist, ecdf, h); }, p,
                support_cap(dist.gpd(), ecdf), ecdf.atoms.back() * dist.gpd().threshold);
}

ReturnValueEstimate return_value(const GpdParams& fit, const ExposureEcdf& ecdf, double T_years,
                                 double T0_years, std::size_t n, FitMethod method) {
  const double p = target_probability(T_years, T0_years, n);
  const auto q = swh_quantile(fit, ecdf, p);
  ReturnValueEstimate est;
  est.location_id = ecdf.location_id;
  est.estimator = Estimator::STME;
  est.method = method;
  est.n = n;
  est.T_years = T_years;
  est.T0_years = T0_years;
  est.value_m = q.value_m;
  if (q.at_endpoint) est.flag = "endpoint";
  return est;
}

RegionalData prepare_region(const CycloneCatalog& catalog, const RegionSpec& region) {
  RegionalData data{select_region(catalog, region), {}, {}};
  data.stm = extract_stm(data.catalog);
  data.exposures = extract_exposures(data.catalog, data.stm);
  return data;
}

std::vector<ReturnValueEstimate> estimate_stme(const RegionalData& data, std::size_t n,
                                               double T_years, FitMethod method,
                                               std::span<const LocationId> locations,
                                               const StmeOptions& options) {
  const double T0 = data.catalog.duration_years();
  const std::size_t n0 = data.stm.size();
  const double p = options.tail == TailModel::Conditional ? target_probability(T_years, T0, n)
                                                          : target_probability(T_years, T0, n0);

  std::vector<ReturnValueEstimate> out;
  for (const auto loc : locations) {
    ReturnValueEstimate e;
    e.location_id = loc;
    e.estimator = Estimator::STME;
    e.method = method;
    e.n = n;
    e.T_years = T_years;
    e.T0_years = T0;
    out.push_back(e);
  }
  const auto fail_all = [&](const char* flag) {
    for (auto& e : out) e.flag = flag;
    return out;
  };

  if (n > n0) return fail_all("sample_too_small");
  const auto top = top_n_events(data.stm, n);
  std::vector<double> values;
  std::vector<EventId> ids;
  for (const auto& r : top.retained) {
    values.push_back(r.value_m);
    ids.push_back(r.event_id);
  }
  FitReport fit;
  try {
    fit = fit_gpd(method, values, top.threshold_m);
  } catch (const std::invalid_argument&) {
    return fail_all("fit_degenerate");
  }
  if (!fit.converged) return fail_all("fit_failed");

  std::optional<StmDistribution> mixture;
  if (options.tail == TailModel::Mixture) {
    std::vector<double> below;
    for (const auto& r : data.stm) {
      if (std::find(ids.begin(), ids.end(), r.event_id) == ids.end()) below.push_back(r.value_m);
    }
    mixture.emplace(*fit.params, std::move(below), n0);
  }

  for (auto& e : out) {
    if (!data.exposures.column_of(e.location_id)) {
      e.flag = "not_in_region";
      continue;
    }
    std::optional<ExposureEcdf> ecdf;
    try {
      ecdf = options.exposures == ExposureSource::Retained
                 ? exposure_ecdf(data.exposures, e.location_id, ids)
                 : exposure_ecdf_all(data.exposures, e.location_id);
    } catch (const InputError&) {
      e.flag = "no_exposure_data";
      continue;
    }
    const auto q = mixture ? swh_quantile(*mixture, *ecdf, p) : swh_quantile(*fit.params, *ecdf, p);
    e.value_m = q.value_m;
    if (q.at_endpoint) e.flag = "endpoint";
  }
  return out;
}

std::vector<ReturnValueEstimate> run_stme(const CycloneCatalog& catalog, const RegionSpec& region,
                                          std::size_t n, double T_years, FitMethod method,
                                          std::span<const LocationId> locations,
                                          const StmeOptions& options) {
  return estimate_stme(prepare_region(catalog, region), n, T_years, method, locations, options);
}

}  // namespace stme
