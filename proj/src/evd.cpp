#include "stme/evd.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/math/tools/minima.hpp>

namespace stme {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_finite(const GpdParams& p) {
  if (!std::isfinite(p.threshold) || !std::isfinite(p.scale) || !std::isfinite(p.shape)) {
    throw std::invalid_argument("GPD parameters must be finite");
  }
  if (!(p.scale > 0.0)) {
    throw std::invalid_argument("GPD scale must be positive");
  }
}

// log Pr(S > threshold + scale * z | S > threshold) for z >= 0.
double log_survival(double z, double shape) {
  if (std::abs(shape) < kShapeSwitch) {
    // -log1p(shape z) / shape, expanded about shape = 0.
    const double x = shape * z;
    return -z * (1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0);
  }
  const double arg = shape * z;
  if (arg <= -1.0) return -kInf;
  return -std::log1p(arg) / shape;
}

}  // namespace

std::string_view to_string(FitMethod method) {
  return method == FitMethod::MLE ? "MLE" : "PWM";
}

FitMethod parse_fit_method(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "mle") return FitMethod::MLE;
  if (lower == "pwm") return FitMethod::PWM;
  throw std::invalid_argument("unknown fit method '" + std::string(text) + "' (expected mle or pwm)");
}

std::optional<double> GpdParams::upper_endpoint() const {
  if (shape < 0.0) return threshold - scale / shape;
  return std::nullopt;
}

double gpd_cdf(const GpdParams& params, double s) {
  require_finite(params);
  if (std::isnan(s)) throw std::invalid_argument("gpd_cdf: s is NaN");
  if (s <= params.threshold) return 0.0;
  if (std::isinf(s)) return 1.0;
  const double z = (s - params.threshold) / params.scale;
  return -std::expm1(log_survival(z, params.shape));
}

double gpd_pdf(const GpdParams& params, double s) {
  require_finite(params);
  if (std::isnan(s)) throw std::invalid_argument("gpd_pdf: s is NaN");
  if (s < params.threshold || std::isinf(s)) return 0.0;
  const double z = (s - params.threshold) / params.scale;
  const double ls = log_survival(z, params.shape);
  if (ls == -kInf) return 0.0;
  return std::exp(ls - std::log1p(params.shape * z)) / params.scale;
}

double gpd_quantile(const GpdParams& params, double p) {
  require_finite(params);
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("gpd_quantile: p must lie in [0, 1)");
  }
  const double L = -std::log1p(-p);
  const double xi = params.shape;
  double z = 0.0;
  if (std::abs(xi) < kShapeSwitch) {
    const double x = xi * L;
    z = L * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0);
  } else {
    z = std::expm1(xi * L) / xi;
  }
  return params.threshold + params.scale * z;
}

double gpd_loglik(const GpdParams& params, std::span<const double> values) {
  require_finite(params);
  double total = 0.0;
  for (const double v : values) {
    if (v < params.threshold) return -kInf;
    const double z = (v - params.threshold) / params.scale;
    const double ls = log_survival(z, params.shape);
    if (ls == -kInf) return -kInf;
    total += ls - std::log1p(params.shape * z) - std::log(params.scale);
  }
  return total;
}

nlohmann::json to_json(const FitReport& report) {
  nlohmann::json j;
  if (report.params) {
    j["threshold"] = report.params->threshold;
    j["scale"] = report.params->scale;
    j["shape"] = report.params->shape;
  } else {
    j["threshold"] = nullptr;
    j["scale"] = nullptr;
    j["shape"] = nullptr;
  }
  j["n"] = report.n;
  j["method"] = std::string(to_string(report.method));
  j["loglik"] = report.loglik ? nlohmann::json(*report.loglik) : nlohmann::json(nullptr);
  j["converged"] = report.converged;
  j["iterations"] = report.iterations;
  if (!report.message.empty()) j["message"] = report.message;
  return j;
}

namespace {

std::vector<double> checked_excesses(std::span<const double> values, double threshold) {
  if (!std::isfinite(threshold)) {
    throw std::invalid_argument("GPD fit: threshold must be finite");
  }
  for (const double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("GPD fit: non-finite exceedance");
    if (v < threshold) throw std::invalid_argument("GPD fit: value below threshold");
  }
  if (!values.empty() &&
      std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    throw std::invalid_argument("GPD fit: degenerate sample (all values equal)");
  }
  if (values.size() < 5) {
    throw std::invalid_argument("GPD fit: need at least 5 exceedances, got " +
                                std::to_string(values.size()));
  }
  std::vector<double> y;
  y.reserve(values.size());
  for (const double v : values) y.push_back(v - threshold);
  return y;
}

// Profile likelihood in theta = shape / scale. For fixed theta the shape that
// maximises the likelihood is mean(log1p(theta y)) and the scale is shape/theta,
// which reduces the problem to one dimension with the support constraint
// 1 + theta y > 0 built into the domain theta > -1/max(y).
class Profile {
 public:
  explicit Profile(std::vector<double> y) : y_(std::move(y)) {
    const double n = static_cast<double>(y_.size());
    for (const double v : y_) {
      ymax_ = std::max(ymax_, v);
      m1_ += v / n;
      m2_ += v * v / n;
      m3_ += v * v * v / n;
    }
  }

  double theta_min() const { return -1.0 / ymax_; }

  double shape(double theta) const {
    double sum = 0.0;
    for (const double v : y_) sum += std::log1p(theta * v);
    return sum / static_cast<double>(y_.size());
  }

  double scale(double theta, double shape_at) const {
    if (std::abs(theta) * ymax_ < 1e-8) {
      return m1_ - theta * m2_ / 2.0 + theta * theta * m3_ / 3.0;
    }
    return shape_at / theta;
  }

  // Profile log-likelihood: -n (log scale + 1 + shape).
  double loglik(double theta) const {
    if (theta <= theta_min()) return -kInf;
    const double xi = shape(theta);
    const double sigma = scale(theta, xi);
    if (!(sigma > 0.0) || !std::isfinite(xi)) return -kInf;
    return -static_cast<double>(y_.size()) * (std::log(sigma) + 1.0 + xi);
  }

  // theta with shape(theta) == target; shape is increasing in theta.
  double theta_for_shape(double target) const {
    if (target == 0.0) return 0.0;
    double lo = 0.0;
    double hi = 0.0;
    if (target < 0.0) {
      lo = theta_min();
    } else {
      hi = 1.0 / m1_;
      while (shape(hi) < target) {
        lo = hi;
        hi *= 2.0;
      }
    }
    for (int i = 0; i < 60 && hi - lo > 1e-15 * std::max(std::abs(lo), std::abs(hi)); ++i) {
      const double mid = 0.5 * (lo + hi);
      if (shape(mid) < target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }

  GpdParams params(double theta, double threshold) const {
    const double xi = shape(theta);
    return GpdParams{threshold, scale(theta, xi), xi};
  }

 private:
  std::vector<double> y_;
  double ymax_{0.0};
  double m1_{0.0};
  double m2_{0.0};
  double m3_{0.0};
};

constexpr int kShapeGrid = 30;

}  // namespace

SamplePwm sample_pwm(std::span<const double> excesses) {
  if (excesses.size() < 2) {
    throw std::invalid_argument("sample_pwm: need at least 2 values");
  }
  std::vector<double> sorted(excesses.begin(), excesses.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  SamplePwm m;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    m.b0 += sorted[i] / n;
    m.b1 += (static_cast<double>(i) / (n - 1.0)) * sorted[i] / n;
  }
  return m;
}

FitReport fit_gpd_pwm(std::span<const double> exceedances, double threshold) {
  const auto y = checked_excesses(exceedances, threshold);
  FitReport report;
  report.n = y.size();
  report.method = FitMethod::PWM;
  report.iterations = 1;
  const auto m = sample_pwm(y);
  // With a1 = b0 - b1 the weights run over the survival plotting position,
  // giving the familiar k = b0/(b0 - 2 a1) - 2 and scale 2 b0 a1/(b0 - 2 a1).
  // The shape in the (1 + shape z)^(-1/shape) parameterisation is -k.
  const double a1 = m.b0 - m.b1;
  const double denom = m.b0 - 2.0 * a1;
  if (!(denom > 0.0) || !(a1 > 0.0)) {
    report.message = "PWM estimator undefined for this sample";
    return report;
  }
  const double k = m.b0 / denom - 2.0;
  report.params = GpdParams{threshold, 2.0 * m.b0 * a1 / denom, -k};
  report.converged = true;
  return report;
}

FitReport fit_gpd_mle(std::span<const double> exceedances, double threshold) {
  Profile profile(checked_excesses(exceedances, threshold));
  FitReport report;
  report.n = exceedances.size();
  report.method = FitMethod::MLE;

  std::vector<double> thetas(kShapeGrid);
  std::vector<double> lls(kShapeGrid);
  std::size_t best = 0;
  for (int k = 0; k < kShapeGrid; ++k) {
    const double target =
        kMleShapeMin + (kMleShapeMax - kMleShapeMin) * static_cast<double>(k) / (kShapeGrid - 1);
    thetas[k] = profile.theta_for_shape(target);
    lls[k] = profile.loglik(thetas[k]);
    if (lls[k] > lls[best]) best = static_cast<std::size_t>(k);
  }
  report.iterations = kShapeGrid;

  // Bracket around the best grid point, or around the PWM estimate when that
  // start beats every grid point.
  std::size_t lo = best == 0 ? 0 : best - 1;
  std::size_t hi = std::min<std::size_t>(best + 1, kShapeGrid - 1);
  const auto pwm = fit_gpd_pwm(exceedances, threshold);
  if (pwm.converged && pwm.params->shape > kMleShapeMin && pwm.params->shape < kMleShapeMax) {
    const double theta_pwm = pwm.params->shape / pwm.params->scale;
    if (profile.loglik(theta_pwm) > lls[best]) {
      const auto it = std::upper_bound(thetas.begin(), thetas.end(), theta_pwm);
      const auto cell = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - thetas.begin(), 1));
      lo = cell >= 2 ? cell - 2 : 0;
      hi = std::min<std::size_t>(cell + 1, kShapeGrid - 1);
    }
  }

  std::uintmax_t max_iter = 200;
  const auto [theta, neg_ll] = boost::math::tools::brent_find_minima(
      [&](double t) { return -profile.loglik(t); }, thetas[lo], thetas[hi], 40, max_iter);
  report.iterations += static_cast<int>(max_iter);
  if (max_iter >= 200) {
    report.message = "likelihood maximisation did not converge";
    return report;
  }
  const double width = thetas[hi] - thetas[lo];
  const bool on_lower = lo == 0 && theta - thetas[0] < 1e-3 * width;
  const bool on_upper = hi == kShapeGrid - 1 && thetas[hi] - theta < 1e-3 * width;
  if (on_lower || on_upper) {
    report.message = "shape estimate on search bound";
    return report;
  }
  const auto params = profile.params(theta, threshold);
  report.params = params;
  report.loglik = gpd_loglik(params, exceedances);
  report.converged = std::isfinite(*report.loglik) && std::isfinite(neg_ll);
  if (!report.converged) {
    report.params.reset();
    report.loglik.reset();
    report.message = "likelihood not finite at optimum";
  }
  return report;
}

FitReport fit_gpd(FitMethod method, std::span<const double> exceedances, double threshold) {
  return method == FitMethod::MLE ? fit_gpd_mle(exceedances, threshold)
                                  : fit_gpd_pwm(exceedances, threshold);
}

StmDistribution::StmDistribution(GpdParams gpd, std::vector<double> below, std::size_t total)
    : gpd_(gpd), below_(std::move(below)), total_(total) {
  require_finite(gpd_);
  if (total_ == 0 || below_.size() >= total_) {
    throw std::invalid_argument("StmDistribution: need 0 <= below count < total");
  }
  std::sort(below_.begin(), below_.end());
  if (!below_.empty() && below_.back() > gpd_.threshold) {
    throw std::invalid_argument("StmDistribution: below-threshold value exceeds threshold");
  }
  tau_ = static_cast<double>(below_.size()) / static_cast<double>(total_);
}

double mixture_cdf(const StmDistribution& dist, double s) {
  if (s <= dist.gpd().threshold) {
    const auto count = std::upper_bound(dist.below().begin(), dist.below().end(), s) -
                       dist.below().begin();
    return static_cast<double>(count) / static_cast<double>(dist.total());
  }
  return dist.tau() + (1.0 - dist.tau()) * gpd_cdf(dist.gpd(), s);
}

double mixture_quantile(const StmDistribution& dist, double p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("mixture_quantile: p must lie in [0, 1)");
  }
  if (p > dist.tau()) {
    return gpd_quantile(dist.gpd(), (p - dist.tau()) / (1.0 - dist.tau()));
  }
  if (dist.below().empty()) return dist.gpd().threshold;
  // Smallest k with k / total >= p.
  const double total = static_cast<double>(dist.total());
  auto k = static_cast<std::size_t>(std::ceil(p * total));
  if (k > 0 && static_cast<double>(k - 1) / total >= p) --k;
  k = std::clamp<std::size_t>(k, 1, dist.below().size());
  return dist.below()[k - 1];
}

std::vector<double> sample_stm(const StmDistribution& dist, Rng& rng, std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(mixture_quantile(dist, uniform_open(rng)));
  return out;
}

}  // namespace stme
