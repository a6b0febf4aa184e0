#pragma once

// Cyclone footprint catalogs: loading, regional restriction, and reduction of
// each event to its space-time maximum (STM) and per-location exposures.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace stme {

using LocationId = int;
using EventId = int;

/// Raised for malformed or inconsistent input data. The message carries the
/// offending file and line where one exists.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Location {
  LocationId id{0};
  double lon_deg{0.0};
  double lat_deg{0.0};
  std::optional<double> depth_m;
};

struct FootprintEntry {
  LocationId location_id{0};
  double max_swh_m{0.0};
};

/// One cyclone reduced to its per-location maximum SWH. Entries are sorted by
/// location id; locations without an entry have no data for this event.
struct CycloneEvent {
  EventId id{0};
  std::vector<FootprintEntry> footprint;

  std::optional<double> value_at(LocationId location) const;
  double max_value() const;
};

class CycloneCatalog {
 public:
  CycloneCatalog() = default;
  /// Validates every invariant; throws InputError on violation.
  CycloneCatalog(std::vector<Location> locations, std::vector<CycloneEvent> events,
                 double duration_years);

  const std::vector<Location>& locations() const { return locations_; }
  const std::vector<CycloneEvent>& events() const { return events_; }
  double duration_years() const { return duration_years_; }
  /// Events per year.
  double rate() const { return static_cast<double>(events_.size()) / duration_years_; }

  const Location* find_location(LocationId id) const;
  const CycloneEvent* find_event(EventId id) const;

  /// Same locations, a subset of events, and a new nominal duration.
  CycloneCatalog with_events(std::vector<CycloneEvent> events, double duration_years) const;

 private:
  std::vector<Location> locations_;  // sorted by id
  std::vector<CycloneEvent> events_;
  double duration_years_{1.0};
};

struct BoundingBox {
  double lon_min{-180.0};
  double lon_max{180.0};
  double lat_min{-90.0};
  double lat_max{90.0};
};

struct RegionSpec {
  std::variant<BoundingBox, std::vector<LocationId>> area{BoundingBox{}};
  std::optional<double> min_depth_m;

  static RegionSpec all() { return {}; }
  static RegionSpec box(double lon_min, double lon_max, double lat_min, double lat_max) {
    return RegionSpec{BoundingBox{lon_min, lon_max, lat_min, lat_max}, std::nullopt};
  }
  static RegionSpec ids(std::vector<LocationId> ids) { return RegionSpec{std::move(ids), std::nullopt}; }

  /// Location ids of `locations` inside the region, ascending.
  std::vector<LocationId> resolve(const std::vector<Location>& locations) const;
};

struct StmRecord {
  EventId event_id{0};
  double value_m{0.0};
  LocationId location_id{0};
};

using StmSeries = std::vector<StmRecord>;

/// Exposures E_j = footprint_j / STM. Rows follow the STM series order,
/// columns the catalog's location order. Absent footprint entries stay absent.
class ExposureMatrix {
 public:
  ExposureMatrix() = default;
  ExposureMatrix(std::vector<EventId> events, std::vector<LocationId> locations);

  std::size_t rows() const { return events_.size(); }
  std::size_t cols() const { return locations_.size(); }
  const std::vector<EventId>& event_ids() const { return events_; }
  const std::vector<LocationId>& location_ids() const { return locations_; }

  std::optional<double> at(std::size_t row, std::size_t col) const;
  void set(std::size_t row, std::size_t col, double exposure);
  /// Column index of a location id, if present.
  std::optional<std::size_t> column_of(LocationId location) const;
  std::optional<std::size_t> row_of(EventId event) const;

 private:
  std::vector<EventId> events_;
  std::vector<LocationId> locations_;
  std::vector<double> values_;  // row-major, NaN marks absence
};

struct TopEvents {
  StmSeries retained;  // largest first
  double threshold_m{0.0};
};

/// Parses the footprint and location CSVs. Events whose footprint is zero
/// everywhere are dropped; a note for each is appended to `warnings` if given.
CycloneCatalog load_catalog(const std::filesystem::path& footprint_file,
                            const std::filesystem::path& locations_file, double duration_years,
                            std::vector<std::string>* warnings = nullptr);

void write_catalog(const CycloneCatalog& catalog, const std::filesystem::path& footprint_file,
                   const std::filesystem::path& locations_file);

/// Restricts the catalog to the region. Events with no positive value inside
/// the region are dropped; throws InputError if the region or the result is empty.
CycloneCatalog select_region(const CycloneCatalog& catalog, const RegionSpec& region);

/// One record per event: the within-catalog maximum and where it occurred
/// (lowest location id on ties).
StmSeries extract_stm(const CycloneCatalog& catalog);

ExposureMatrix extract_exposures(const CycloneCatalog& catalog, const StmSeries& stm);

/// The n largest STM values (ties at the threshold broken towards lower event
/// id) and the threshold: the (n+1)-th largest value, or just below the sample
/// minimum when every event is retained.
TopEvents top_n_events(const StmSeries& stm, std::size_t n);

/// Threshold used when all n0 values are retained.
double below_minimum(double minimum);

}  // namespace stme
