#include "stme/estimate.hpp"

#include "stme/csv.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>
#include <string>

namespace stme {

std::string_view to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::STME:
      return "STME";
    case Estimator::SINGLE:
      return "SINGLE";
    case Estimator::EMPIRICAL:
      return "EMPIRICAL";
  }
  return "?";
}

Estimator parse_estimator(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "stme" || lower == "stm-e") return Estimator::STME;
  if (lower == "single") return Estimator::SINGLE;
  if (lower == "empirical") return Estimator::EMPIRICAL;
  throw std::invalid_argument("unknown estimator '" + std::string(text) +
                              "' (expected stme, single or empirical)");
}

void write_estimate_row(std::ostream& out, const ReturnValueEstimate& e) {
  out << e.location_id << ',' << to_string(e.estimator) << ','
      << (e.method ? to_string(*e.method) : std::string_view("-")) << ',' << e.n << ','
      << csv::format(e.T_years) << ',' << csv::format(e.T0_years) << ',' << csv::format(e.value_m)
      << ',' << e.flag << '\n';
}

void write_estimates_csv(std::ostream& out, std::span<const ReturnValueEstimate> estimates) {
  out << kEstimateHeader << '\n';
  for (const auto& e : estimates) write_estimate_row(out, e);
}

double target_probability(double T_years, double T0_years, std::size_t n) {
  if (!(T0_years > 0.0) || !(T_years > T0_years)) {
    throw std::invalid_argument("return period must satisfy T > T0 > 0");
  }
  if (n < 1) throw std::invalid_argument("sample size n must be at least 1");
  return 1.0 - (T0_years / static_cast<double>(n)) / T_years;
}

}  // namespace stme
