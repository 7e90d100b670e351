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

#include <cstdint>
#include <string>
#include <vector>

#include "rba/detector/boxes.hpp"
#include "rba/image.hpp"

namespace rba {

// One labeled image. `ann_ids` parallels `anns`.
struct Sample {
  std::int64_t image_id = 0;
  std::string file_name;
  Image image;
  std::vector<det::Annotation> anns;
  std::vector<std::int64_t> ann_ids;

  bool operator==(const Sample&) const = default;
};

using Dataset = std::vector<Sample>;

inline std::size_t count_boxes(const Dataset& d) {
  std::size_t n = 0;
  for (const auto& s : d) n += s.anns.size();
  return n;
}

}  // namespace rba
