#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqi/error.hpp"

namespace pqi {

/// Comma-separated table with a header row. Written with LF line endings;
/// fields containing commas, quotes or newlines are quoted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const;
  /// Throws DataError if the column is missing.
  [[nodiscard]] std::size_t require_column(std::string_view name) const;
};

[[nodiscard]] CsvTable parse_csv(std::string_view text);
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);
[[nodiscard]] std::string format_csv(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

/// Shortest decimal form that round-trips to the same double.
[[nodiscard]] std::string format_number(double v);
/// Strict parse of a whole field as a double; throws DataError.
[[nodiscard]] double parse_number(std::string_view field);

}  // namespace pqi
