#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mflang {

/// Shortest decimal form that round-trips exactly ("nan"/"inf" for specials).
std::string format_double(double x);

/// Writes to "<path>.tmp" and renames over `path`, creating parent
/// directories. Throws std::runtime_error naming the path on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Minimal CSV reader for the numeric files written here: header names and
/// rows of doubles (empty cells become NaN).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a header column; throws std::out_of_range if absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace mflang
