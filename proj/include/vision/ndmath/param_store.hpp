/*
 * Copyright 2026 The VISION Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "vision/ndmath/value.hpp"

namespace vision::nd {

/// Named trainable tensors, iterated in name order.
class ParamStore {
 public:
  /// Registers a new parameter; duplicate names throw ContractError.
  Value& add(const std::string& name, Matrix init);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Value& at(const std::string& name);
  const Value& at(const std::string& name) const;

  const std::map<std::string, Value>& entries() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  void zero_grad();
  bool any_grad() const;

  /// Deep copy with fresh parameter nodes.
  ParamStore clone() const;
  /// Copies values from a store with identical names and shapes.
  void assign_from(const ParamStore& other);

  /// FNV-1a over names, shapes and values.
  std::uint64_t hash() const;

 private:
  std::map<std::string, Value> params_;
};

}  // namespace vision::nd
