// Copyright 2026 The rba-workbench Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "rba/workbench/report.hpp"

#include <sstream>

#include "json.hpp"
#include "rba/errors.hpp"

namespace rba::report {

std::string format_number(double v) { return nlohmann::json(v).dump(); }

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

bool nondecreasing_with_tolerance(std::span<const double> v, int max_inversions, double tol) {
  int inversions = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] >= v[i - 1]) continue;
    if (v[i - 1] - v[i] > tol) return false;
    if (++inversions > max_inversions) return false;
  }
  return true;
}

std::string CsvTable::str() const {
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of(",\"\n") != std::string::npos) {
        throw ConfigError("CSV cell contains a separator: " + cells[i]);
      }
      os << (i ? "," : "") << cells[i];
    }
    os << '\n';
  };
  line(header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw ConfigError("CSV row width does not match the header");
    line(r);
  }
  return os.str();
}

CsvTable CsvTable::parse(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string ln;
  bool first = true;
  while (std::getline(in, ln)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(ln);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!ln.empty() && ln.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw ParseError("CSV row width does not match the header");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace rba::report
