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


#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rba::report {

// Number text identical to the JSON serialization of the same double.
std::string format_number(double v);
std::string format_optional(const std::optional<double>& v);

// True when v is non-decreasing except for at most `max_inversions`
// adjacent drops, each no larger than `tol`.
bool nondecreasing_with_tolerance(std::span<const double> v, int max_inversions, double tol);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const;
  static CsvTable parse(const std::string& text);
};

}  // namespace rba::report
