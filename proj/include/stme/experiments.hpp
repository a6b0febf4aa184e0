#pragma once

// Resampling experiments: draw T0-year sub-catalogs from a long catalog,
// estimate T-year return values per replicate, and summarise bias and
// uncertainty against empirical estimates from the full catalog.

#include "stme/catalog.hpp"
#include "stme/estimate.hpp"
#include "stme/evd.hpp"
#include "stme/model.hpp"
#include "stme/random.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace stme {

struct ExperimentConfig {
  double T0_years{200.0};
  double T_years{500.0};
  std::vector<std::size_t> n_ladder{20, 30, 40, 50, 60};
  std::size_t replicates{100};
  std::vector<FitMethod> methods{FitMethod::MLE, FitMethod::PWM};
  std::vector<Estimator> estimators{Estimator::STME, Estimator::SINGLE};
  std::vector<LocationId> locations;
  std::uint64_t seed{1};
  StmeOptions stme;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Draws round(n0 * T0 / T_L) events uniformly without replacement, keeping
/// catalog order; the result has duration T0.
CycloneCatalog sample_period(const CycloneCatalog& catalog, double T0_years, Rng& rng);

struct ReplicateResult {
  std::size_t replicate{0};
  std::vector<ReturnValueEstimate> estimates;
};

/// One replicate, seeded from derive_seed(config.seed, index). Failures are
/// recorded as flagged estimates.
ReplicateResult run_replicate(const CycloneCatalog& catalog, const RegionSpec& region,
                              const ExperimentConfig& config, std::size_t index);

struct ExperimentHooks {
  /// Previously completed replicate, if any; skips recomputation.
  std::function<std::optional<ReplicateResult>(std::size_t)> load;
  /// Called once per freshly computed replicate (serialised).
  std::function<void(const ReplicateResult&)> completed;
};

/// All replicates, ordered by index. `jobs` = 0 uses the hardware
/// concurrency; results do not depend on it.
std::vector<ReplicateResult> run_experiment(const CycloneCatalog& catalog, const RegionSpec& region,
                                            const ExperimentConfig& config, unsigned jobs = 0,
                                            const ExperimentHooks& hooks = {});

struct CellKey {
  LocationId location_id{0};
  Estimator estimator{Estimator::STME};
  FitMethod method{FitMethod::MLE};
  std::size_t n{0};

  auto operator<=>(const CellKey&) const = default;
};

struct CellSummary {
  CellKey key;
  std::size_t count{0};     // finite estimates
  std::size_t failures{0};  // flagged estimates without a value
  bool valid{false};        // at least two finite estimates
  double mean{0.0};
  double median{0.0};
  double q025{0.0};
  double q25{0.0};
  double q75{0.0};
  double q975{0.0};
  std::vector<double> outliers;  // outside [q025, q975]
};

struct SummaryStats {
  std::vector<CellSummary> cells;  // sorted by key

  const CellSummary* find(const CellKey& key) const;
};

/// Linear interpolation between order statistics of an ascending sample.
double percentile(std::span<const double> sorted, double p);

SummaryStats summarize(std::span<const ReplicateResult> results);

struct MetricRow {
  std::size_t n{0};
  FitMethod method{FitMethod::MLE};
  Estimator estimator{Estimator::STME};
  std::size_t locations{0};
  double bias_mean{0.0};    // mean over locations of (mean estimate - empirical)
  double bias_median{0.0};  // same with the median estimate
  double w50{0.0};          // mean interquartile width
  double u{0.0};            // mean of (width / reference width - 1); NaN without a reference
};

struct PerformanceMetrics {
  Estimator reference{Estimator::SINGLE};
  std::vector<MetricRow> rows;

  const MetricRow* find(std::size_t n, FitMethod method, Estimator estimator) const;
};

/// Throws std::invalid_argument if a summarised location has no empirical
/// estimate; locations whose empirical estimate is flagged are left out.
PerformanceMetrics performance_metrics(const SummaryStats& summary,
                                       std::span<const ReturnValueEstimate> empirical,
                                       Estimator reference = Estimator::SINGLE);

/// empirical_rv at each location over the full catalog; locations with too
/// few values are flagged "sample_too_small".
std::vector<ReturnValueEstimate> ground_truth(const CycloneCatalog& catalog,
                                              std::span<const LocationId> locations,
                                              double T_years);

inline constexpr std::string_view kResultsHeader =
    "replicate,location_id,estimator,method,n,T_years,T0_years,value_m,flag";

void write_results_csv(std::ostream& out, std::span<const ReplicateResult> results);
void write_replicate_file(const std::filesystem::path& path, const ReplicateResult& result);
ReplicateResult read_replicate_file(const std::filesystem::path& path);
void write_summary_csv(std::ostream& out, const SummaryStats& summary);
/// Rows are (method, quantity), columns the n ladder.
void write_metrics_csv(std::ostream& out, const PerformanceMetrics& metrics,
                       std::span<const std::size_t> n_ladder);

}  // namespace stme
