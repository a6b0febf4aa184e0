#include "stme/synth.hpp"

#include "stme/evd.hpp"
#include "stme/random.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace stme {

namespace {

constexpr double kKmPerDegLat = 110.574;
constexpr double kKmPerDegLonEquator = 111.320;

double standard_normal(Rng& rng) {
  const double u1 = uniform_open(rng);
  const double u2 = uniform_open(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t grid_count(double lo, double hi, double step) {
  return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

}  // namespace

void SynthWorldConfig::validate() const {
  if (!(lon_min <= lon_max) || !(lat_min <= lat_max)) {
    throw std::invalid_argument("synth: grid extent must have min <= max");
  }
  if (lon_min < -180.0 || lon_max > 180.0 || lat_min < -90.0 || lat_max > 90.0) {
    throw std::invalid_argument("synth: grid extent outside valid coordinates");
  }
  if (!(spacing_deg > 0.0)) throw std::invalid_argument("synth: spacing must be positive");
  if (!(rate_per_year > 0.0)) throw std::invalid_argument("synth: rate must be positive");
  if (!(duration_years > 0.0)) throw std::invalid_argument("synth: duration must be positive");
  if (!(intensity_scale_m > 0.0)) throw std::invalid_argument("synth: intensity scale must be positive");
  if (!(intensity_threshold_m >= 0.0)) {
    throw std::invalid_argument("synth: intensity threshold must be non-negative");
  }
  if (!std::isfinite(intensity_shape)) throw std::invalid_argument("synth: shape must be finite");
  if (!(decay_km > 0.0)) throw std::invalid_argument("synth: decay length must be positive");
  if (!(noise_sigma_log >= 0.0) || !std::isfinite(noise_sigma_log)) {
    throw std::invalid_argument("synth: noise level must be non-negative");
  }
  if (!(track_spread_deg >= 0.0)) throw std::invalid_argument("synth: track spread must be >= 0");
}

CycloneCatalog synth_catalog(const SynthWorldConfig& config) {
  config.validate();
  const std::size_t n_lon = grid_count(config.lon_min, config.lon_max, config.spacing_deg);
  const std::size_t n_lat = grid_count(config.lat_min, config.lat_max, config.spacing_deg);
  const double lon_c = 0.5 * (config.lon_min + config.lon_max);
  const double lat_c = 0.5 * (config.lat_min + config.lat_max);
  const double km_per_lon = kKmPerDegLonEquator * std::cos(lat_c * std::numbers::pi / 180.0);

  std::vector<Location> locations;
  std::vector<double> xs;
  std::vector<double> ys;
  LocationId next_id = 1;
  for (std::size_t i = 0; i < n_lat; ++i) {
    for (std::size_t j = 0; j < n_lon; ++j) {
      const double lat = config.lat_min + static_cast<double>(i) * config.spacing_deg;
      const double lon = config.lon_min + static_cast<double>(j) * config.spacing_deg;
      locations.push_back({next_id++, lon, lat, std::nullopt});
      xs.push_back((lon - lon_c) * km_per_lon);
      ys.push_back((lat - lat_c) * kKmPerDegLat);
    }
  }
  const double x_lo = (config.lon_min - lon_c) * km_per_lon;
  const double x_hi = (config.lon_max - lon_c) * km_per_lon;
  const double y_lo = (config.lat_min - lat_c) * kKmPerDegLat;
  const double y_hi = (config.lat_max - lat_c) * kKmPerDegLat;

  Rng rng(config.seed);
  const double expected = config.rate_per_year * config.duration_years;
  std::size_t count = 0;
  if (config.poisson_counts) {
    count = static_cast<std::size_t>(std::poisson_distribution<long long>(expected)(rng));
  } else {
    count = static_cast<std::size_t>(std::llround(expected));
  }

  const GpdParams intensity{config.intensity_threshold_m, config.intensity_scale_m,
                            config.intensity_shape};
  std::vector<CycloneEvent> events;
  events.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    // Every track passes through a point of the grid box.
    const double px = x_lo + (x_hi - x_lo) * uniform_open(rng);
    const double py = y_lo + (y_hi - y_lo) * uniform_open(rng);
    const double heading = (config.track_direction_deg +
                            config.track_spread_deg * (2.0 * uniform_open(rng) - 1.0)) *
                           std::numbers::pi / 180.0;
    const double dx = std::cos(heading);
    const double dy = std::sin(heading);
    const double peak = gpd_quantile(intensity, uniform_open(rng));

    CycloneEvent ev{static_cast<EventId>(k + 1), {}};
    ev.footprint.reserve(locations.size());
    for (std::size_t i = 0; i < locations.size(); ++i) {
      const double dist = std::abs((xs[i] - px) * dy - (ys[i] - py) * dx);
      double value = peak * std::exp(-dist / config.decay_km);
      if (config.noise_sigma_log > 0.0) value *= std::exp(config.noise_sigma_log * standard_normal(rng));
      ev.footprint.push_back({locations[i].id, std::max(value, 0.0)});
    }
    events.push_back(std::move(ev));
  }
  return CycloneCatalog(std::move(locations), std::move(events), config.duration_years);
}

}  // namespace stme
