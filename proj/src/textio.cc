#include "shiftkrr/textio.h"

#include <array>
#include <charconv>
#include <fstream>
#include <vector>

#include "shiftkrr/errors.h"

namespace shiftkrr {

std::string format_double(double value) {
  std::array<char, 64> buffer{};
  auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc()) {
    throw InvalidArgument("cannot format floating point value");
  }
  return std::string(buffer.data(), end);
}

namespace {

std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t' || text.front() == '\r')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  return text;
}

}  // namespace

double parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') {
    text.remove_prefix(1);
  }
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text) {
  text = trim(text);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

Eigen::MatrixXd read_csv_matrix(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidArgument("cannot open " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') {
      continue;
    }
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = view.find(',', start);
      std::string_view field = view.substr(start, comma == std::string_view::npos
                                                      ? std::string_view::npos
                                                      : comma - start);
      try {
        row.push_back(parse_double(field));
      } catch (const InvalidArgument &e) {
        throw InvalidArgument(path.string() + ":" + std::to_string(line_number) + ": " +
                              e.what());
      }
      if (comma == std::string_view::npos) {
        break;
      }
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidArgument(path.string() + ":" + std::to_string(line_number) +
                            ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw InvalidArgument(path.string() + ": no data rows");
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void write_file_atomically(const std::filesystem::path &path, std::string_view contents) {
  std::filesystem::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + partial.string() + " for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      throw std::runtime_error("write failed for " + partial.string());
    }
  }
  std::filesystem::rename(partial, path);
}

}  // namespace shiftkrr
