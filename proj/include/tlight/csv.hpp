#pragma once

// CSV records: one '#' comment line carrying units, one header row, then data.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tlight/compare.hpp"
#include "tlight/detection.hpp"
#include "tlight/estimators.hpp"

namespace tlight {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Shortest round-trip representation; identical inputs give identical bytes.
inline void append_number(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline void append_number(std::string& out, std::uint64_t v) {
  char buf[24];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace detail

/// Writes numeric columns of equal length.
inline void write_columns_csv(const std::filesystem::path& path, std::string_view units,
                              const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size() || columns.empty()) {
    throw std::invalid_argument("column names and data do not match");
  }
  const std::size_t rows = columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw std::invalid_argument("columns have different lengths");
  }
  std::string out;
  out.reserve(rows * 24 * columns.size() + 128);
  out += "# ";
  out += units;
  out += '\n';
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out += ',';
    out += names[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) out += ',';
      detail::append_number(out, columns[j][i]);
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

inline void write_counts_csv(const std::filesystem::path& path, const BinnedCounts& counts) {
  std::string out;
  out.reserve(counts.size() * 12 + 128);
  out += "# bin_width=";
  detail::append_number(out, counts.bin_width);
  out += " s, origin=";
  detail::append_number(out, counts.origin_time);
  out += " s, count [photons per bin]\nbin_index,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    detail::append_number(out, static_cast<std::uint64_t>(i));
    out += ',';
    detail::append_number(out, static_cast<std::uint64_t>(counts.counts[i]));
    out += '\n';
  }
  detail::write_file(path, out);
}

inline void write_curve_csv(const std::filesystem::path& path, const CorrelationCurve& curve) {
  write_columns_csv(path, "lag [s], G2 [dimensionless], stderr [dimensionless]",
                    {"lag", "value", "stderr"}, {curve.lags, curve.values, curve.std_error});
}

inline void write_distribution_csv(const std::filesystem::path& path,
                                   const NumberDistribution& dist) {
  std::vector<double> n(dist.probs.size());
  for (std::size_t i = 0; i < n.size(); ++i) n[i] = static_cast<double>(i);
  write_columns_csv(path, "n [photons], probability [dimensionless]", {"n", "probability"},
                    {n, dist.probs});
}

/// Reads the first two numeric columns, skipping '#' comments and a header row.
inline Series read_series_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  Series s;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected at least two columns");
    const auto second_end = line.find(',', comma + 1);
    const std::string_view first(line.data(), comma);
    const std::string_view second(line.data() + comma + 1,
                                  (second_end == std::string::npos ? line.size() : second_end) -
                                      comma - 1);
    double x = 0.0;
    double y = 0.0;
    const auto rx = std::from_chars(first.data(), first.data() + first.size(), x);
    const auto ry = std::from_chars(second.data(), second.data() + second.size(), y);
    const bool ok = rx.ec == std::errc() && ry.ec == std::errc() &&
                    rx.ptr == first.data() + first.size() &&
                    ry.ptr == second.data() + second.size();
    if (!ok) {
      if (!header_seen && s.x.empty()) {
        header_seen = true;
        continue;
      }
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    s.x.push_back(x);
    s.y.push_back(y);
  }
  return s;
}

}  // namespace tlight
