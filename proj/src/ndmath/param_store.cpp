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

#include "vision/ndmath/param_store.hpp"

#include "vision/error.hpp"
#include "vision/hash.hpp"

namespace vision::nd {

Value& ParamStore::add(const std::string& name, Matrix init) {
  auto [it, inserted] = params_.emplace(name, Value::parameter(std::move(init)));
  if (!inserted) throw ContractError("parameter '" + name + "' registered twice");
  return it->second;
}

Value& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const Value& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, v] : params_) n += v.data().data.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, v] : params_) v.zero_grad();
}

bool ParamStore::any_grad() const {
  for (const auto& [_, v] : params_) {
    if (v.has_grad()) return true;
  }
  return false;
}

ParamStore ParamStore::clone() const {
  ParamStore out;
  for (const auto& [name, v] : params_) out.add(name, v.data());
  return out;
}

void ParamStore::assign_from(const ParamStore& other) {
  if (other.size() != size()) throw ContractError("assign_from: parameter sets differ");
  for (auto& [name, v] : params_) {
    const Matrix& src = other.at(name).data();
    if (src.rows != v.rows() || src.cols != v.cols()) {
      throw ContractError("assign_from: shape mismatch for '" + name + "'");
    }
    v.mutable_data() = src;
  }
}

std::uint64_t ParamStore::hash() const {
  Fnv1a h;
  auto mix = [&h](const void* p, std::size_t n) { h.update(p, n); };
  for (const auto& [name, v] : params_) {
    mix(name.data(), name.size());
    const std::uint64_t dims[2] = {v.rows(), v.cols()};
    mix(dims, sizeof dims);
    mix(v.data().data.data(), v.data().data.size() * sizeof(double));
  }
  return h.digest();
}

}  // namespace vision::nd
