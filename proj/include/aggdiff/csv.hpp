// SPDX-FileCopyrightText: 2026 aggdiff authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Comma-separated output with a header row; reals use 17 significant digits
// so values round-trip exactly.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace aggdiff {

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

/// Time label used in snapshot file names, e.g. 0.5 -> "0.5", 10 -> "10".
inline std::string format_time_label(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", t);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot open " + path.string() + " for writing");
    columns_ = header.size();
    write_fields(header);
  }

  void row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw std::logic_error("csv: row width does not match header of " + path_.string());
    write_fields(fields);
  }

  void row(std::initializer_list<double> values) {
    std::vector<std::string> f;
    f.reserve(values.size());
    for (double v : values) f.push_back(format_real(v));
    row(f);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> f;
    f.reserve(values.size());
    for (double v : values) f.push_back(format_real(v));
    row(f);
  }

 private:
  void write_fields(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("write failed on " + path_.string());
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

}  // namespace aggdiff
