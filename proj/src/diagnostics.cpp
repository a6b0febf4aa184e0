#include "stme/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/normal.hpp>

namespace stme {

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

double slope_against(std::span<const double> proj, std::span<const double> values,
                     double proj_mean, double proj_ss) {
  double cross = 0.0;
  for (std::size_t i = 0; i < proj.size(); ++i) cross += (proj[i] - proj_mean) * values[i];
  return cross / proj_ss;
}

}  // namespace

KendallTau kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("kendall_tau: need at least 3 pairs");

  long long score = 0;
  long long ties_x = 0;
  long long ties_y = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int sx = sign(x[j] - x[i]);
      const int sy = sign(y[j] - y[i]);
      score += sx * sy;
      ties_x += sx == 0;
      ties_y += sy == 0;
    }
  }
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double denom = std::sqrt((pairs - static_cast<double>(ties_x)) *
                                 (pairs - static_cast<double>(ties_y)));
  const double dn = static_cast<double>(n);
  KendallTau out;
  out.tau = denom > 0.0 ? static_cast<double>(score) / denom : 0.0;
  out.null_sd = std::sqrt(2.0 * (2.0 * dn + 5.0) / (9.0 * dn * (dn - 1.0)));
  return out;
}

std::string_view to_string(TauFlag flag) {
  switch (flag) {
    case TauFlag::Inside:
      return "inside";
    case TauFlag::Above:
      return "above";
    case TauFlag::Below:
      return "below";
    case TauFlag::Undefined:
      return "undefined";
  }
  return "?";
}

TauMap tau_map(const StmSeries& stm, const ExposureMatrix& exposures, double band) {
  if (!(band > 0.0 && band < 1.0)) throw std::invalid_argument("tau_map: band must be in (0, 1)");
  if (stm.size() != exposures.rows()) {
    throw std::invalid_argument("tau_map: STM series and exposure matrix disagree");
  }
  const double z =
      boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + band / 2.0);

  TauMap map;
  map.band = band;
  std::size_t defined = 0;
  std::size_t outside = 0;
  for (std::size_t col = 0; col < exposures.cols(); ++col) {
    std::vector<double> s;
    std::vector<double> e;
    for (std::size_t row = 0; row < exposures.rows(); ++row) {
      if (const auto v = exposures.at(row, col)) {
        s.push_back(stm[row].value_m);
        e.push_back(*v);
      }
    }
    TauResult r;
    r.location_id = exposures.location_ids()[col];
    r.n = s.size();
    r.band = band;
    const bool constant_e = std::adjacent_find(e.begin(), e.end(), std::not_equal_to<>()) == e.end();
    const bool constant_s = std::adjacent_find(s.begin(), s.end(), std::not_equal_to<>()) == s.end();
    if (s.size() >= 3 && !constant_e && !constant_s) {
      const auto kt = kendall_tau(s, e);
      r.tau = kt.tau;
      r.null_sd = kt.null_sd;
      if (kt.tau > z * kt.null_sd) {
        r.flag = TauFlag::Above;
      } else if (kt.tau < -z * kt.null_sd) {
        r.flag = TauFlag::Below;
      } else {
        r.flag = TauFlag::Inside;
      }
      ++defined;
      outside += r.flag != TauFlag::Inside;
    }
    map.results.push_back(r);
  }
  map.exceedance_fraction =
      defined > 0 ? static_cast<double>(outside) / static_cast<double>(defined) : 0.0;
  return map;
}

TrendResult trend_permutation_test(std::span<const double> values,
                                   std::span<const PlanePoint> coords, double orientation_deg,
                                   std::size_t n_perm, Rng& rng) {
  if (values.size() != coords.size()) {
    throw std::invalid_argument("trend_permutation_test: length mismatch");
  }
  if (values.size() < 10) throw std::invalid_argument("trend_permutation_test: need >= 10 events");
  if (n_perm < 99) throw std::invalid_argument("trend_permutation_test: need n_perm >= 99");

  const double angle = orientation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  std::vector<double> proj;
  proj.reserve(coords.size());
  for (const auto& p : coords) proj.push_back(p.x * c + p.y * s);
  const double mean = std::accumulate(proj.begin(), proj.end(), 0.0) / static_cast<double>(proj.size());
  double ss = 0.0;
  for (const double v : proj) ss += (v - mean) * (v - mean);
  const double scale = std::max(std::abs(proj.front()), 1.0);
  if (!(ss > 1e-20 * scale * scale * static_cast<double>(proj.size()))) {
    throw std::invalid_argument("trend_permutation_test: degenerate coordinates");
  }

  TrendResult out;
  out.orientation_deg = orientation_deg;
  out.n_perm = n_perm;
  out.slope = slope_against(proj, values, mean, ss);
  // Relative slack so permutations that reproduce the observed slope up to
  // rounding count as ties.
  const double observed = std::abs(out.slope) * (1.0 - 1e-12);
  std::vector<double> shuffled(values.begin(), values.end());
  std::size_t extreme = 0;
  for (std::size_t k = 0; k < n_perm; ++k) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (std::abs(slope_against(proj, shuffled, mean, ss)) >= observed) ++extreme;
  }
  out.p_value = static_cast<double>(1 + extreme) / static_cast<double>(n_perm + 1);
  return out;
}

TrendResult trend_permutation_test(const StmSeries& stm, const CycloneCatalog& catalog,
                                   double orientation_deg, std::size_t n_perm, Rng& rng) {
  std::vector<double> values;
  std::vector<PlanePoint> coords;
  for (const auto& r : stm) {
    const auto* loc = catalog.find_location(r.location_id);
    if (loc == nullptr) {
      throw std::invalid_argument("trend_permutation_test: STM location not in catalog");
    }
    values.push_back(r.value_m);
    coords.push_back({loc->lon_deg, loc->lat_deg});
  }
  return trend_permutation_test(values, coords, orientation_deg, n_perm, rng);
}

std::vector<double> exposure_histogram(std::span<const double> exposures, std::size_t bins,
                                       double smoothing) {
  if (bins == 0) throw std::invalid_argument("exposure_histogram: bins must be positive");
  if (!(smoothing > 0.0)) throw std::invalid_argument("exposure_histogram: smoothing must be > 0");
  std::vector<double> hist(bins, smoothing);
  for (const double e : exposures) {
    if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("exposure outside [0, 1]");
    const auto bin = std::min(static_cast<std::size_t>(e * static_cast<double>(bins)), bins - 1);
    hist[bin] += 1.0;
  }
  const double total = std::accumulate(hist.begin(), hist.end(), 0.0);
  for (auto& h : hist) h /= total;
  return hist;
}

double symmetric_kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("symmetric_kl: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == q[i]) continue;
    total += (p[i] - q[i]) * std::log(p[i] / q[i]);
  }
  return total;
}

KlResult exposure_kl_test(const ExposureMatrix& exposures, const StmSeries& stm,
                          LocationId location, std::size_t n_null, Rng& rng,
                          const KlOptions& options) {
  if (stm.size() != exposures.rows()) {
    throw std::invalid_argument("exposure_kl_test: STM series and exposure matrix disagree");
  }
  if (n_null < 100) throw std::invalid_argument("exposure_kl_test: need n_null >= 100");
  const auto col = exposures.column_of(location);
  if (!col) throw InputError("location " + std::to_string(location) + " not in exposure matrix");

  std::vector<std::size_t> rows;
  for (std::size_t row = 0; row < exposures.rows(); ++row) {
    if (exposures.at(row, *col)) rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return stm[a].value_m > stm[b].value_m;
  });
  if (options.sample_size > 0 && rows.size() > options.sample_size) rows.resize(options.sample_size);
  if (rows.size() < 3) {
    throw std::invalid_argument("exposure_kl_test: need at least 3 events with data at location " +
                                std::to_string(location));
  }

  std::vector<std::vector<double>> hists;
  hists.reserve(rows.size());
  for (const auto row : rows) {
    std::vector<double> sample;
    for (std::size_t c = 0; c < exposures.cols(); ++c) {
      if (const auto e = exposures.at(row, c)) sample.push_back(*e);
    }
    hists.push_back(exposure_histogram(sample, options.bins, options.smoothing));
  }

  KlResult out;
  out.location_id = location;
  out.n = rows.size();
  out.kl_star = symmetric_kl(hists.front(), hists.back());
  out.null_sample.reserve(n_null);
  const auto m = static_cast<std::uint64_t>(hists.size());
  std::size_t below = 0;
  std::size_t ties = 0;
  for (std::size_t k = 0; k < n_null; ++k) {
    const auto i = static_cast<std::size_t>(rng() % m);
    auto j = static_cast<std::size_t>(rng() % (m - 1));
    if (j >= i) ++j;
    const double kl = symmetric_kl(hists[i], hists[j]);
    out.null_sample.push_back(kl);
    below += kl < out.kl_star;
    ties += kl == out.kl_star;
  }
  out.non_exceedance =
      (static_cast<double>(below) + 0.5 * static_cast<double>(ties)) / static_cast<double>(n_null);
  return out;
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-18) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

KsResult ks_uniformity(std::span<const double> probs) {
  if (probs.size() < 5) throw std::invalid_argument("ks_uniformity: need at least 5 values");
  std::vector<double> sorted(probs.begin(), probs.end());
  for (const double v : sorted) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("ks_uniformity: value outside [0, 1]");
  }
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double rank = static_cast<double>(i);
    d = std::max({d, (rank + 1.0) / n - sorted[i], sorted[i] - rank / n});
  }
  return {d, kolmogorov_survival(std::sqrt(n) * d)};
}

nlohmann::json to_json(const TauMap& map) {
  nlohmann::json j;
  j["band"] = map.band;
  j["exceedance_fraction"] = map.exceedance_fraction;
  auto& arr = j["locations"] = nlohmann::json::array();
  for (const auto& r : map.results) {
    arr.push_back({{"location_id", r.location_id},
                   {"n", r.n},
                   {"tau", r.tau},
                   {"null_sd", r.null_sd},
                   {"flag", std::string(to_string(r.flag))}});
  }
  return j;
}

nlohmann::json to_json(const TrendResult& trend) {
  return {{"orientation_deg", trend.orientation_deg},
          {"slope", trend.slope},
          {"p_value", trend.p_value},
          {"n_perm", trend.n_perm}};
}

nlohmann::json to_json(const KlResult& kl, bool include_null) {
  nlohmann::json j{{"location_id", kl.location_id},
                   {"n", kl.n},
                   {"kl_star", kl.kl_star},
                   {"non_exceedance", kl.non_exceedance},
                   {"null_size", kl.null_sample.size()}};
  if (include_null) j["null_sample"] = kl.null_sample;
  return j;
}

}  // namespace stme
