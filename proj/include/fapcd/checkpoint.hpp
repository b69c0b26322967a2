// Copyright 2026 The fapcd Authors.
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

#include <string>
#include <vector>

#include "json.hpp"

#include "fapcd/autodiff.hpp"
#include "fapcd/nn.hpp"

namespace fapcd::ckpt {

inline constexpr int kCheckpointVersion = 1;

struct TensorEntry {
  std::string group;  // "param", "adam_m", "adam_v" or a module-specific name
  std::string name;
  Matrix value;
};

// Header line of JSON followed by the tensors as raw little-endian doubles in
// header order.
struct CheckpointFile {
  std::string kind;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json meta = nlohmann::json::object();
  std::vector<TensorEntry> tensors;
  long long optimizer_step = 0;

  const TensorEntry* find(const std::string& group, const std::string& name) const;
  const Matrix& get(const std::string& group, const std::string& name) const;
  std::size_t scalar_count(const std::string& group) const;
};

// Writes through a temporary file and renames, so a crash never leaves a
// half-written checkpoint at `path`.
void write_checkpoint(const std::string& path, const CheckpointFile& file);
// Throws FormatError on a wrong magic, version mismatch or truncated payload.
CheckpointFile read_checkpoint(const std::string& path);

void store_parameters(CheckpointFile& file, const ad::ParameterSet& params,
                      const std::string& group = "param");
// Copies values into an already-built parameter set; names and shapes must match.
void restore_parameters(const CheckpointFile& file, ad::ParameterSet& params,
                        const std::string& group = "param");
// Moments, step count and hyperparameters; restore returns false when absent.
void store_optimizer(CheckpointFile& file, const ad::ParameterSet& params, const nn::Adam& adam);
bool restore_optimizer(const CheckpointFile& file, const ad::ParameterSet& params, nn::Adam& adam);

}  // namespace fapcd::ckpt
