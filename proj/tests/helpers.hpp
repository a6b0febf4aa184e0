#pragma once

#include "stme/catalog.hpp"
#include "stme/random.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace stme::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("stme_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Locations 1..count on a line of longitudes, no depth.
inline std::vector<Location> line_locations(int count) {
  std::vector<Location> locs;
  for (int i = 1; i <= count; ++i) locs.push_back({i, -62.0 + 0.1 * i, 16.0, std::nullopt});
  return locs;
}

/// Dense catalog from a value matrix: events[i][j] is event i+1 at location j+1.
inline CycloneCatalog dense_catalog(const std::vector<std::vector<double>>& values,
                                    double duration_years) {
  const int cols = values.empty() ? 0 : static_cast<int>(values.front().size());
  std::vector<CycloneEvent> events;
  for (std::size_t i = 0; i < values.size(); ++i) {
    CycloneEvent ev{static_cast<EventId>(i + 1), {}};
    for (int j = 0; j < cols; ++j) ev.footprint.push_back({j + 1, values[i][static_cast<std::size_t>(j)]});
    events.push_back(std::move(ev));
  }
  return CycloneCatalog(line_locations(cols), std::move(events), duration_years);
}

}  // namespace stme::test
