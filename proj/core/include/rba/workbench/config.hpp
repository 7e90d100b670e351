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
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace rba::cfg {

// Config values are typed by their registered default.
using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;

struct SweepAxis {
  std::string key;
  std::vector<Value> values;
};

struct SweepPoint;

class RunConfig {
 public:
  // Every known key with its default.
  static RunConfig defaults();
  static RunConfig parse(const std::string& json_text, const std::string& source = "config");
  static RunConfig load(const std::string& path);

  static const std::vector<std::string>& known_keys();
  static bool is_known(const std::string& key);

  const Value& get(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key) const;  // ints widen
  const std::string& get_string(const std::string& key) const;
  const std::vector<double>& get_list(const std::string& key) const;

  // Type-checked against the registered default; unknown key -> ConfigError.
  void set(const std::string& key, const Value& v);
  // "key=value" with value parsed by the key's type (lists as comma separated).
  void set_from_string(const std::string& assignment);

  const std::vector<SweepAxis>& sweep() const { return sweep_; }
  void set_sweep(std::vector<SweepAxis> axes);
  void clear_sweep() { sweep_.clear(); }

  using Point = SweepPoint;
  // Cartesian product of the sweep axes (axes in key order).
  std::vector<Point> expand() const;

  // Flat JSON with every key plus the sweep block; keys sorted.
  std::string to_json() const;
  // Canonical text over all keys (sweep included) and its FNV-1a digest.
  std::string canonical() const;
  std::string digest() const;

  bool operator==(const RunConfig& o) const { return canonical() == o.canonical(); }

 private:
  std::map<std::string, Value> values_;
  std::vector<SweepAxis> sweep_;
};

struct SweepPoint {
  std::string label;  // "key=value,..."
  RunConfig config;   // sweep values applied, no sweep block
};

std::string value_to_string(const Value& v);

}  // namespace rba::cfg
