#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <string_view>

// Locale-independent number formatting and small file helpers shared by the
// CSV/JSON emitters and the CLI.

namespace shiftkrr {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

/// Strict parse of the whole string; throws InvalidArgument otherwise.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Numeric CSV without header: one row per line, `,` separated. Blank lines and
/// lines starting with `#` are skipped. All rows must have equal width.
Eigen::MatrixXd read_csv_matrix(const std::filesystem::path &path);

/// Writes `contents` to `<path>.partial`, then renames it onto `path`. On
/// failure the partial file is left behind (clearly marked) and an exception
/// is thrown.
void write_file_atomically(const std::filesystem::path &path, std::string_view contents);

}  // namespace shiftkrr
