#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stme::csv {

/// Line-oriented reader for the simple comma-separated formats used here
/// (no quoting). Blank lines are skipped.
class Reader {
 public:
  /// Opens the file and checks the header against `expected_header`.
  Reader(const std::filesystem::path& path, std::string_view expected_header);

  /// Next data row split on commas, or nullopt at end of file.
  std::optional<std::vector<std::string>> next();
  std::size_t line_number() const { return line_; }
  /// "path:line: " prefix for error messages.
  std::string where() const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::size_t line_{0};
};

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

/// Strict numeric parsing of a whole field; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view field);
std::optional<long long> parse_int(std::string_view field);

/// Shortest round-trip representation; identical bytes for identical values.
std::string format(double value);

}  // namespace stme::csv
