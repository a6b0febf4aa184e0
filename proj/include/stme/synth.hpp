#pragma once

// Toy cyclone world with a known generating process, used as ground truth.
// Each event is a straight track crossing a lon/lat grid; its footprint is
// peak intensity * exp(-distance to track / decay) * lognormal noise.

#include "stme/catalog.hpp"

#include <cstdint>

namespace stme {

struct SynthWorldConfig {
  double lon_min{-62.0};
  double lon_max{-60.8};
  double lat_min{15.8};
  double lat_max{16.6};
  double spacing_deg{0.2};

  double rate_per_year{0.6};
  double duration_years{3200.0};
  bool poisson_counts{false};

  double track_direction_deg{135.0};  // direction of travel, counter-clockwise from east
  double track_spread_deg{30.0};      // half-width of the uniform direction spread

  double intensity_threshold_m{5.0};
  double intensity_scale_m{5.0};
  double intensity_shape{-0.1};

  double decay_km{60.0};
  double noise_sigma_log{0.1};

  std::uint64_t seed{1};

  /// Throws std::invalid_argument on inconsistent parameters.
  void validate() const;
};

CycloneCatalog synth_catalog(const SynthWorldConfig& config);

}  // namespace stme
