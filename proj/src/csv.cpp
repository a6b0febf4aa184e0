#include "stme/csv.hpp"

#include "stme/catalog.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace stme::csv {

Reader::Reader(const std::filesystem::path& path, std::string_view expected_header)
    : path_(path), in_(path) {
  if (!in_) {
    throw InputError("cannot open " + path.string());
  }
  std::string header;
  while (std::getline(in_, header)) {
    ++line_;
    if (!header.empty() && header.back() == '\r') header.pop_back();
    if (!trim(header).empty()) break;
  }
  // Tolerate a UTF-8 byte order mark.
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  if (trim(header) != expected_header) {
    throw InputError(where() + "expected header '" + std::string(expected_header) + "', got '" +
                     header + "'");
  }
}

std::optional<std::vector<std::string>> Reader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    return split(line);
  }
  return std::nullopt;
}

std::string Reader::where() const { return path_.string() + ":" + std::to_string(line_) + ": "; }

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::optional<double> parse_double(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

std::optional<long long> parse_int(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

std::string format(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace stme::csv
