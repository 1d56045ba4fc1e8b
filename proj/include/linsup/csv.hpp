// Copyright 2026 The linsup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LINSUP_CSV_HPP_
#define LINSUP_CSV_HPP_

// Comma-separated numeric tables. No quoting: every field in the formats
// used here is a number or an identifier without commas.

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "linsup/error.hpp"

namespace linsup::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> line_numbers;  // 1-based source line of each row

  int Column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw Error(ErrorCode::kParse, "missing column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> SplitLine(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
      field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' ||
                              field.back() == '\r'))
      field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline Table Read(std::istream& in, const std::vector<std::string>& required = {}) {
  Table t;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = SplitLine(line);
      continue;
    }
    auto fields = SplitLine(line);
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) + ": expected " +
                                         std::to_string(t.header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw Error(ErrorCode::kParse, "empty table");
  for (const auto& name : required) t.Column(name);
  return t;
}

inline double ParseDouble(const std::string& s, long line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  }
  return v;
}

inline long ParseInt(const std::string& s, long line_no) {
  long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_no) + ": '" + s + "' is not an integer");
  }
  return v;
}

// Shortest text that reads back to the same double.
inline std::string Format(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class Writer {
 public:
  explicit Writer(const std::vector<std::string>& header) : columns_(header.size()) {
    Row(header);
  }

  template <typename... Fields>
  void Add(const Fields&... fields) {
    static_assert(sizeof...(Fields) > 0);
    std::vector<std::string> row;
    (row.push_back(ToField(fields)), ...);
    Row(row);
  }

  void AddRow(const std::vector<std::string>& row) { Row(row); }

  std::string str() const { return out_.str(); }

 private:
  static std::string ToField(const std::string& s) { return s; }
  static std::string ToField(const char* s) { return s; }
  static std::string ToField(double v) { return Format(v); }
  static std::string ToField(int v) { return std::to_string(v); }
  static std::string ToField(long v) { return std::to_string(v); }
  static std::string ToField(unsigned long v) { return std::to_string(v); }

  void Row(const std::vector<std::string>& row) {
    Require(row.size() == columns_, "csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) out_ << (i ? "," : "") << row[i];
    out_ << '\n';
  }

  std::size_t columns_;
  std::ostringstream out_;
};

}  // namespace linsup::csv

#endif  // LINSUP_CSV_HPP_
