#pragma once

// Generalised Pareto tail model for STM and the below/above-threshold
// mixture used to describe the full STM distribution.

#include "stme/random.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace stme {

enum class FitMethod { MLE, PWM };

std::string_view to_string(FitMethod method);
/// Accepts "mle"/"pwm" in any case; throws std::invalid_argument otherwise.
FitMethod parse_fit_method(std::string_view text);

/// Below this magnitude of the shape parameter the exponential limit (with
/// a short series correction in the shape) is used instead of the power form.
inline constexpr double kShapeSwitch = 1e-6;

struct GpdParams {
  double threshold{0.0};
  double scale{1.0};
  double shape{0.0};

  /// Finite upper end of the support when shape < 0.
  std::optional<double> upper_endpoint() const;
};

/// Pr(S <= s | S > threshold). Zero below the threshold.
double gpd_cdf(const GpdParams& params, double s);
double gpd_pdf(const GpdParams& params, double s);
/// Inverse of gpd_cdf for p in [0, 1).
double gpd_quantile(const GpdParams& params, double p);
/// Log-likelihood of `values` (all >= threshold); -inf outside the support.
double gpd_loglik(const GpdParams& params, std::span<const double> values);

struct FitReport {
  std::optional<GpdParams> params;  // absent unless converged
  std::size_t n{0};
  FitMethod method{FitMethod::MLE};
  std::optional<double> loglik;  // MLE only
  bool converged{false};
  int iterations{0};
  std::string message;
};

nlohmann::json to_json(const FitReport& report);

/// Sample probability weighted moments of the excesses: b0 is the mean and
/// b1 = sum_i ((i-1)/(n-1)) y_(i) / n over ascending order statistics.
struct SamplePwm {
  double b0{0.0};
  double b1{0.0};
};
SamplePwm sample_pwm(std::span<const double> excesses);

/// Maximum likelihood over the shape range [-0.9, 2]. Throws
/// std::invalid_argument for fewer than 5 values, values below the threshold,
/// or a sample without spread; an optimum on the shape bounds is reported as
/// non-convergence.
FitReport fit_gpd_mle(std::span<const double> exceedances, double threshold);
/// Probability weighted moments. Same preconditions as fit_gpd_mle; reports
/// failure when the estimator is undefined for the sample.
FitReport fit_gpd_pwm(std::span<const double> exceedances, double threshold);
FitReport fit_gpd(FitMethod method, std::span<const double> exceedances, double threshold);

inline constexpr double kMleShapeMin = -0.9;
inline constexpr double kMleShapeMax = 2.0;

/// Full STM distribution: empirical counting CDF below the threshold and the
/// fitted GPD above it, weighted by the empirical non-exceedance probability.
class StmDistribution {
 public:
  /// `below` holds the n0 - n values that were not retained; `total` is n0.
  StmDistribution(GpdParams gpd, std::vector<double> below, std::size_t total);

  const GpdParams& gpd() const { return gpd_; }
  double tau() const { return tau_; }
  std::size_t total() const { return total_; }
  const std::vector<double>& below() const { return below_; }

 private:
  GpdParams gpd_;
  std::vector<double> below_;  // sorted ascending
  std::size_t total_{0};
  double tau_{0.0};
};

double mixture_cdf(const StmDistribution& dist, double s);
/// Generalised inverse of mixture_cdf.
double mixture_quantile(const StmDistribution& dist, double p);
std::vector<double> sample_stm(const StmDistribution& dist, Rng& rng, std::size_t count);

}  // namespace stme
