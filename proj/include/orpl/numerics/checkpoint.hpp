// Copyright 2026 The ORPL Authors.
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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "orpl/numerics/param_store.hpp"

namespace orpl {

// Flat name -> (shape, float32 values) container.
//
// Layout (little-endian): "ORPK" | version u8 | count u32 |
//   { name_len u32 | name | rank u32 | dims i64[rank] | values f32[prod(dims)] }*
inline constexpr char kCheckpointMagic[4] = {'O', 'R', 'P', 'K'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct NamedArray {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

using Checkpoint = std::map<std::string, NamedArray>;

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Stores parameters as "<prefix>/<key>", Adam moments as "<prefix>/<key>@m"
// and "@v", and the step counter as "<prefix>/@step".
template <typename S>
void export_store(const ParamStore<S>& store, const std::string& prefix, Checkpoint& ckpt,
                  bool with_optimizer = true);

template <typename S>
void import_store(ParamStore<S>& store, const std::string& prefix, const Checkpoint& ckpt,
                  bool with_optimizer = true);

void put_scalar(Checkpoint& ckpt, const std::string& name, double value);
double get_scalar(const Checkpoint& ckpt, const std::string& name);
// Byte strings (e.g. RNG states), one byte per stored value.
void put_string(Checkpoint& ckpt, const std::string& name, const std::string& value);
std::string get_string(const Checkpoint& ckpt, const std::string& name);

template <typename S>
void put_matrix(Checkpoint& ckpt, const std::string& name, const Matrix<S>& m);
template <typename S>
Matrix<S> get_matrix(const Checkpoint& ckpt, const std::string& name);

}  // namespace orpl
