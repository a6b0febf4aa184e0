#include "stme/catalog.hpp"

#include "stme/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <utility>

namespace stme {

namespace {

constexpr const char* kFootprintHeader = "cyclone_id,location_id,max_swh_m";
constexpr const char* kLocationsHeader = "location_id,lon_deg,lat_deg,depth_m";

bool by_location(const FootprintEntry& a, const FootprintEntry& b) {
  return a.location_id < b.location_id;
}

int to_id(long long raw, const std::string& where, const char* what) {
  if (raw < std::numeric_limits<int>::min() || raw > std::numeric_limits<int>::max()) {
    throw InputError(where + what + " out of range");
  }
  return static_cast<int>(raw);
}

std::vector<Location> read_locations(const std::filesystem::path& path) {
  csv::Reader reader(path, kLocationsHeader);
  std::vector<Location> locations;
  while (auto row = reader.next()) {
    const auto& f = *row;
    if (f.size() != 3 && f.size() != 4) {
      throw InputError(reader.where() + "expected 3 or 4 fields, got " + std::to_string(f.size()));
    }
    const auto id = csv::parse_int(f[0]);
    const auto lon = csv::parse_double(f[1]);
    const auto lat = csv::parse_double(f[2]);
    if (!id || !lon || !lat) {
      throw InputError(reader.where() + "malformed location row");
    }
    Location loc{to_id(*id, reader.where(), "location_id"), *lon, *lat, std::nullopt};
    if (f.size() == 4 && !f[3].empty()) {
      const auto depth = csv::parse_double(f[3]);
      if (!depth) throw InputError(reader.where() + "malformed depth_m");
      loc.depth_m = *depth;
    }
    if (!(loc.lon_deg >= -180.0 && loc.lon_deg <= 180.0) ||
        !(loc.lat_deg >= -90.0 && loc.lat_deg <= 90.0)) {
      throw InputError(reader.where() + "coordinates out of range");
    }
    if (loc.depth_m && !(*loc.depth_m >= 0.0)) {
      throw InputError(reader.where() + "depth_m must be non-negative");
    }
    for (const auto& other : locations) {
      if (other.id == loc.id) {
        throw InputError(reader.where() + "duplicate location_id " + std::to_string(loc.id));
      }
    }
    locations.push_back(loc);
  }
  return locations;
}

}  // namespace

std::optional<double> CycloneEvent::value_at(LocationId location) const {
  const auto it = std::lower_bound(footprint.begin(), footprint.end(),
                                   FootprintEntry{location, 0.0}, by_location);
  if (it == footprint.end() || it->location_id != location) return std::nullopt;
  return it->max_swh_m;
}

double CycloneEvent::max_value() const {
  double best = 0.0;
  for (const auto& e : footprint) best = std::max(best, e.max_swh_m);
  return best;
}

CycloneCatalog::CycloneCatalog(std::vector<Location> locations, std::vector<CycloneEvent> events,
                               double duration_years)
    : locations_(std::move(locations)), events_(std::move(events)), duration_years_(duration_years) {
  if (!(duration_years_ > 0.0) || !std::isfinite(duration_years_)) {
    throw InputError("catalog duration must be positive, got " + csv::format(duration_years_));
  }
  std::sort(locations_.begin(), locations_.end(),
            [](const Location& a, const Location& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    const auto& loc = locations_[i];
    if (i > 0 && locations_[i - 1].id == loc.id) {
      throw InputError("duplicate location id " + std::to_string(loc.id));
    }
    if (!(loc.lon_deg >= -180.0 && loc.lon_deg <= 180.0) ||
        !(loc.lat_deg >= -90.0 && loc.lat_deg <= 90.0)) {
      throw InputError("location " + std::to_string(loc.id) + " has coordinates out of range");
    }
    if (loc.depth_m && !(*loc.depth_m >= 0.0)) {
      throw InputError("location " + std::to_string(loc.id) + " has negative depth");
    }
  }
  std::set<EventId> seen;
  for (auto& ev : events_) {
    if (!seen.insert(ev.id).second) {
      throw InputError("duplicate event id " + std::to_string(ev.id));
    }
    if (ev.footprint.empty()) {
      throw InputError("event " + std::to_string(ev.id) + " has an empty footprint");
    }
    std::sort(ev.footprint.begin(), ev.footprint.end(), by_location);
    for (std::size_t i = 0; i < ev.footprint.size(); ++i) {
      const auto& e = ev.footprint[i];
      if (i > 0 && ev.footprint[i - 1].location_id == e.location_id) {
        throw InputError("event " + std::to_string(ev.id) + " repeats location " +
                         std::to_string(e.location_id));
      }
      if (!std::isfinite(e.max_swh_m) || e.max_swh_m < 0.0) {
        throw InputError("event " + std::to_string(ev.id) + " has invalid SWH at location " +
                         std::to_string(e.location_id));
      }
      if (find_location(e.location_id) == nullptr) {
        throw InputError("event " + std::to_string(ev.id) + " references unknown location " +
                         std::to_string(e.location_id));
      }
    }
  }
}

const Location* CycloneCatalog::find_location(LocationId id) const {
  const auto it = std::lower_bound(locations_.begin(), locations_.end(), id,
                                   [](const Location& l, LocationId v) { return l.id < v; });
  return (it != locations_.end() && it->id == id) ? &*it : nullptr;
}

const CycloneEvent* CycloneCatalog::find_event(EventId id) const {
  for (const auto& ev : events_) {
    if (ev.id == id) return &ev;
  }
  return nullptr;
}

CycloneCatalog CycloneCatalog::with_events(std::vector<CycloneEvent> events,
                                           double duration_years) const {
  CycloneCatalog out;
  out.locations_ = locations_;
  out.events_ = std::move(events);
  out.duration_years_ = duration_years;
  if (!(duration_years > 0.0)) {
    throw InputError("catalog duration must be positive");
  }
  return out;
}

std::vector<LocationId> RegionSpec::resolve(const std::vector<Location>& locations) const {
  std::vector<LocationId> ids;
  for (const auto& loc : locations) {
    bool inside = false;
    if (const auto* box = std::get_if<BoundingBox>(&area)) {
      inside = loc.lon_deg >= box->lon_min && loc.lon_deg <= box->lon_max &&
               loc.lat_deg >= box->lat_min && loc.lat_deg <= box->lat_max;
    } else {
      const auto& list = std::get<std::vector<LocationId>>(area);
      inside = std::find(list.begin(), list.end(), loc.id) != list.end();
    }
    if (inside && min_depth_m) {
      inside = loc.depth_m.has_value() && *loc.depth_m >= *min_depth_m;
    }
    if (inside) ids.push_back(loc.id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

CycloneCatalog load_catalog(const std::filesystem::path& footprint_file,
                            const std::filesystem::path& locations_file, double duration_years,
                            std::vector<std::string>* warnings) {
  if (!(duration_years > 0.0) || !std::isfinite(duration_years)) {
    throw InputError("duration must be positive, got " + csv::format(duration_years));
  }
  auto locations = read_locations(locations_file);
  std::set<LocationId> known;
  for (const auto& l : locations) known.insert(l.id);

  std::map<EventId, std::vector<FootprintEntry>> footprints;
  csv::Reader reader(footprint_file, kFootprintHeader);
  while (auto row = reader.next()) {
    const auto& f = *row;
    if (f.size() != 3) {
      throw InputError(reader.where() + "expected 3 fields, got " + std::to_string(f.size()));
    }
    const auto ev = csv::parse_int(f[0]);
    const auto loc = csv::parse_int(f[1]);
    const auto swh = csv::parse_double(f[2]);
    if (!ev || !loc || !swh) {
      throw InputError(reader.where() + "malformed footprint row");
    }
    if (!std::isfinite(*swh) || *swh < 0.0) {
      throw InputError(reader.where() + "max_swh_m must be finite and non-negative, got " + f[2]);
    }
    const auto loc_id = to_id(*loc, reader.where(), "location_id");
    if (known.count(loc_id) == 0) {
      throw InputError(reader.where() + "unknown location_id " + std::to_string(loc_id));
    }
    auto& entries = footprints[to_id(*ev, reader.where(), "cyclone_id")];
    for (const auto& e : entries) {
      if (e.location_id == loc_id) {
        throw InputError(reader.where() + "duplicate (cyclone_id, location_id) pair");
      }
    }
    entries.push_back({loc_id, *swh});
  }

  std::vector<CycloneEvent> events;
  for (auto& [id, entries] : footprints) {
    const bool all_zero = std::all_of(entries.begin(), entries.end(),
                                      [](const FootprintEntry& e) { return e.max_swh_m == 0.0; });
    if (all_zero) {
      if (warnings) warnings->push_back("dropped event " + std::to_string(id) + ": zero footprint");
      continue;
    }
    events.push_back({id, std::move(entries)});
  }
  if (events.empty()) {
    throw InputError(footprint_file.string() + ": no usable events");
  }
  return CycloneCatalog(std::move(locations), std::move(events), duration_years);
}

void write_catalog(const CycloneCatalog& catalog, const std::filesystem::path& footprint_file,
                   const std::filesystem::path& locations_file) {
  std::ofstream loc_out(locations_file);
  if (!loc_out) throw InputError("cannot write " + locations_file.string());
  loc_out << kLocationsHeader << '\n';
  for (const auto& l : catalog.locations()) {
    loc_out << l.id << ',' << csv::format(l.lon_deg) << ',' << csv::format(l.lat_deg) << ','
            << (l.depth_m ? csv::format(*l.depth_m) : std::string()) << '\n';
  }
  std::ofstream fp_out(footprint_file);
  if (!fp_out) throw InputError("cannot write " + footprint_file.string());
  fp_out << kFootprintHeader << '\n';
  for (const auto& ev : catalog.events()) {
    for (const auto& e : ev.footprint) {
      fp_out << ev.id << ',' << e.location_id << ',' << csv::format(e.max_swh_m) << '\n';
    }
  }
}

CycloneCatalog select_region(const CycloneCatalog& catalog, const RegionSpec& region) {
  const auto ids = region.resolve(catalog.locations());
  if (ids.empty()) {
    throw InputError("region contains no catalog locations");
  }
  std::vector<Location> locations;
  for (const auto id : ids) locations.push_back(*catalog.find_location(id));

  std::vector<CycloneEvent> events;
  for (const auto& ev : catalog.events()) {
    CycloneEvent restricted{ev.id, {}};
    bool positive = false;
    for (const auto& e : ev.footprint) {
      if (std::binary_search(ids.begin(), ids.end(), e.location_id)) {
        restricted.footprint.push_back(e);
        positive = positive || e.max_swh_m > 0.0;
      }
    }
    if (positive) events.push_back(std::move(restricted));
  }
  if (events.empty()) {
    throw InputError("region drops every event");
  }
  return CycloneCatalog(std::move(locations), std::move(events), catalog.duration_years());
}

StmSeries extract_stm(const CycloneCatalog& catalog) {
  if (catalog.events().empty()) {
    throw std::invalid_argument("extract_stm: catalog has no events");
  }
  StmSeries out;
  out.reserve(catalog.events().size());
  for (const auto& ev : catalog.events()) {
    StmRecord rec{ev.id, -1.0, 0};
    // Footprints are sorted by location id, so strict '>' keeps the lowest id on ties.
    for (const auto& e : ev.footprint) {
      if (e.max_swh_m > rec.value_m) {
        rec.value_m = e.max_swh_m;
        rec.location_id = e.location_id;
      }
    }
    out.push_back(rec);
  }
  return out;
}

ExposureMatrix::ExposureMatrix(std::vector<EventId> events, std::vector<LocationId> locations)
    : events_(std::move(events)),
      locations_(std::move(locations)),
      values_(events_.size() * locations_.size(), std::numeric_limits<double>::quiet_NaN()) {}

std::optional<double> ExposureMatrix::at(std::size_t row, std::size_t col) const {
  const double v = values_.at(row * locations_.size() + col);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

void ExposureMatrix::set(std::size_t row, std::size_t col, double exposure) {
  values_.at(row * locations_.size() + col) = exposure;
}

std::optional<std::size_t> ExposureMatrix::column_of(LocationId location) const {
  const auto it = std::find(locations_.begin(), locations_.end(), location);
  if (it == locations_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - locations_.begin());
}

std::optional<std::size_t> ExposureMatrix::row_of(EventId event) const {
  const auto it = std::find(events_.begin(), events_.end(), event);
  if (it == events_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - events_.begin());
}

ExposureMatrix extract_exposures(const CycloneCatalog& catalog, const StmSeries& stm) {
  std::vector<EventId> event_ids;
  for (const auto& r : stm) event_ids.push_back(r.event_id);
  std::vector<LocationId> location_ids;
  for (const auto& l : catalog.locations()) location_ids.push_back(l.id);

  ExposureMatrix matrix(std::move(event_ids), location_ids);
  for (std::size_t row = 0; row < stm.size(); ++row) {
    const auto& rec = stm[row];
    if (!(rec.value_m > 0.0)) {
      throw InputError("event " + std::to_string(rec.event_id) + " has zero STM");
    }
    const auto* ev = catalog.find_event(rec.event_id);
    if (ev == nullptr) {
      throw std::invalid_argument("extract_exposures: STM record for unknown event " +
                                  std::to_string(rec.event_id));
    }
    for (const auto& e : ev->footprint) {
      const auto col = std::lower_bound(location_ids.begin(), location_ids.end(), e.location_id) -
                       location_ids.begin();
      matrix.set(row, static_cast<std::size_t>(col),
                 e.location_id == rec.location_id ? 1.0 : e.max_swh_m / rec.value_m);
    }
  }
  return matrix;
}

double below_minimum(double minimum) {
  return minimum - 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(minimum));
}

TopEvents top_n_events(const StmSeries& stm, std::size_t n) {
  if (n < 1 || n > stm.size()) {
    throw std::invalid_argument("top_n_events: need 1 <= n <= " + std::to_string(stm.size()) +
                                ", got n = " + std::to_string(n));
  }
  StmSeries sorted = stm;
  std::sort(sorted.begin(), sorted.end(), [](const StmRecord& a, const StmRecord& b) {
    if (a.value_m != b.value_m) return a.value_m > b.value_m;
    return a.event_id < b.event_id;
  });
  TopEvents top;
  top.threshold_m = n < sorted.size() ? sorted[n].value_m : below_minimum(sorted.back().value_m);
  sorted.resize(n);
  top.retained = std::move(sorted);
  return top;
}

}  // namespace stme
