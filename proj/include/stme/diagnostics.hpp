#pragma once

// Checks of the modelling assumptions: STM/exposure independence (Kendall's
// tau), absence of spatial trend in STM (permutation test), exposure
// distributions unrelated to STM size (KL divergence against a random-pair
// null), and KS uniformity for aggregating non-exceedance probabilities.

#include "stme/catalog.hpp"
#include "stme/random.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace stme {

struct KendallTau {
  double tau{0.0};
  double null_sd{0.0};  // sqrt(2(2n+5) / (9n(n-1)))
};

/// Tau-b (tie-corrected). Requires equal lengths >= 3; tau is 0 when either
/// argument is constant.
KendallTau kendall_tau(std::span<const double> x, std::span<const double> y);

enum class TauFlag { Inside, Above, Below, Undefined };
std::string_view to_string(TauFlag flag);

struct TauResult {
  LocationId location_id{0};
  std::size_t n{0};
  double tau{0.0};
  double null_sd{0.0};
  double band{0.9};
  TauFlag flag{TauFlag::Undefined};
};

struct TauMap {
  double band{0.9};
  std::vector<TauResult> results;
  /// Fraction of defined locations outside the band.
  double exceedance_fraction{0.0};
};

/// Per location, tau between STM and exposure over events with data there,
/// flagged against the two-sided Gaussian band at level `band`.
TauMap tau_map(const StmSeries& stm, const ExposureMatrix& exposures, double band);

struct PlanePoint {
  double x{0.0};
  double y{0.0};
};

struct TrendResult {
  double orientation_deg{0.0};
  double slope{0.0};
  double p_value{1.0};
  std::size_t n_perm{0};
};

/// Least-squares slope of `values` against the projection of `coords` on the
/// direction `orientation_deg` (counter-clockwise from the x axis), compared
/// with slopes under random permutations of the values. Two-sided; the
/// p-value is (1 + #{|perm| >= |obs|}) / (n_perm + 1).
TrendResult trend_permutation_test(std::span<const double> values,
                                   std::span<const PlanePoint> coords, double orientation_deg,
                                   std::size_t n_perm, Rng& rng);

/// Same, with x = lon and y = lat of each event's STM location.
TrendResult trend_permutation_test(const StmSeries& stm, const CycloneCatalog& catalog,
                                   double orientation_deg, std::size_t n_perm, Rng& rng);

struct KlOptions {
  std::size_t bins{10};
  double smoothing{0.5};     // pseudo-count per bin
  std::size_t sample_size{0};  // largest-STM events considered; 0 = all
};

struct KlResult {
  LocationId location_id{0};
  std::size_t n{0};  // events considered
  double kl_star{0.0};
  std::vector<double> null_sample;
  double non_exceedance{0.0};
};

/// Smoothed histogram of exposures on [0, 1], normalised to sum 1.
std::vector<double> exposure_histogram(std::span<const double> exposures, std::size_t bins,
                                       double smoothing);
/// Symmetrised Kullback-Leibler divergence, KL(p||q) + KL(q||p).
double symmetric_kl(std::span<const double> p, std::span<const double> q);

/// Each event's exposure sample is its exposures across all matrix locations.
/// Events are those with data at `location` (optionally only the largest
/// `sample_size` by STM). KL* compares the largest- and smallest-STM events;
/// the null uses `n_null` random pairs of distinct events. Ties in the null
/// count half towards the non-exceedance probability.
KlResult exposure_kl_test(const ExposureMatrix& exposures, const StmSeries& stm,
                          LocationId location, std::size_t n_null, Rng& rng,
                          const KlOptions& options = {});

struct KsResult {
  double statistic{0.0};
  double p_value{1.0};
};

/// Survival function of the Kolmogorov distribution, Pr(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample KS test against Uniform[0, 1] with the asymptotic p-value
/// Pr(K > sqrt(n) D). Requires at least 5 values, all in [0, 1].
KsResult ks_uniformity(std::span<const double> probs);

nlohmann::json to_json(const TauMap& map);
nlohmann::json to_json(const TrendResult& trend);
nlohmann::json to_json(const KlResult& kl, bool include_null = false);

}  // namespace stme
