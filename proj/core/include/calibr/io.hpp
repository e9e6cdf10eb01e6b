#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace calibr {

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

// Strict parse of a full token; throws std::invalid_argument on garbage.
// Accepts plain decimals/scientific plus "a/b" fractions (config convenience).
double parse_double(std::string_view token);

std::optional<double> try_parse_double(std::string_view token);

std::vector<std::string> split_line(std::string_view line, char sep = ',');

std::string join(std::span<const std::string> parts, char sep = ',');

// Flat key=value files ('#' starts a comment line). Used for fitted-parameter
// dumps, study configs and the per-run sidecar.
void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& entries);
std::map<std::string, std::string> read_kv(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace calibr
