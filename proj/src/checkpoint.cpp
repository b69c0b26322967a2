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

#include "fapcd/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fapcd/error.hpp"

namespace fapcd::ckpt {

using nlohmann::json;

const TensorEntry* CheckpointFile::find(const std::string& group, const std::string& name) const {
  for (const auto& t : tensors)
    if (t.group == group && t.name == name) return &t;
  return nullptr;
}

const Matrix& CheckpointFile::get(const std::string& group, const std::string& name) const {
  const TensorEntry* t = find(group, name);
  if (!t) throw FormatError("checkpoint lacks tensor " + group + "/" + name);
  return t->value;
}

std::size_t CheckpointFile::scalar_count(const std::string& group) const {
  std::size_t n = 0;
  for (const auto& t : tensors)
    if (t.group == group) n += static_cast<std::size_t>(t.value.size());
  return n;
}

void write_checkpoint(const std::string& path, const CheckpointFile& file) {
  json table = json::array();
  for (const auto& t : file.tensors)
    table.push_back({{"group", t.group}, {"name", t.name}, {"rows", t.value.rows()},
                     {"cols", t.value.cols()}});
  const json header = {{"format", "fapcd-checkpoint"}, {"version", kCheckpointVersion},
                       {"kind", file.kind},           {"config", file.config},
                       {"meta", file.meta},           {"optimizer_step", file.optimizer_step},
                       {"tensors", table}};
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write " + tmp);
    out << header.dump() << '\n';
    for (const auto& t : file.tensors)
      out.write(reinterpret_cast<const char*>(t.value.data()),
                static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!out) throw InputError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty checkpoint");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw FormatError(path + ": header is not JSON");
  }
  if (!header.is_object() || header.value("format", "") != "fapcd-checkpoint")
    throw FormatError(path + ": not a fapcd checkpoint");
  const int version = header.value("version", -1);
  if (version != kCheckpointVersion)
    throw FormatError(path + ": checkpoint version " + std::to_string(version) +
                      " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
  CheckpointFile file;
  try {
    file.kind = header.at("kind").get<std::string>();
    file.config = header.at("config");
    file.meta = header.at("meta");
    file.optimizer_step = header.at("optimizer_step").get<long long>();
    for (const auto& t : header.at("tensors")) {
      TensorEntry e;
      e.group = t.at("group").get<std::string>();
      e.name = t.at("name").get<std::string>();
      e.value.resize(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
      in.read(reinterpret_cast<char*>(e.value.data()),
              static_cast<std::streamsize>(e.value.size() * sizeof(double)));
      if (in.gcount() != static_cast<std::streamsize>(e.value.size() * sizeof(double)))
        throw FormatError(path + ": truncated payload at tensor " + e.name);
      file.tensors.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": malformed header: " + e.what());
  }
  return file;
}

void store_parameters(CheckpointFile& file, const ad::ParameterSet& params,
                      const std::string& group) {
  for (std::size_t i = 0; i < params.size(); ++i)
    file.tensors.push_back({group, params[i].name, params[i].value});
}

void restore_parameters(const CheckpointFile& file, ad::ParameterSet& params,
                        const std::string& group) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& v = file.get(group, params[i].name);
    if (v.rows() != params[i].value.rows() || v.cols() != params[i].value.cols())
      throw FormatError("tensor " + params[i].name + " has shape " + std::to_string(v.rows()) +
                        "x" + std::to_string(v.cols()) + ", model expects " +
                        std::to_string(params[i].value.rows()) + "x" +
                        std::to_string(params[i].value.cols()));
    params[i].value = v;
  }
  if (file.scalar_count(group) != params.scalar_count())
    throw FormatError("checkpoint holds parameters the model does not define");
}

void store_optimizer(CheckpointFile& file, const ad::ParameterSet& params, const nn::Adam& adam) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    file.tensors.push_back({"adam_m", params[i].name, adam.first_moments()[i]});
    file.tensors.push_back({"adam_v", params[i].name, adam.second_moments()[i]});
  }
  file.optimizer_step = adam.step_count();
  const auto& c = adam.config();
  file.meta["adam"] = {{"lr", c.lr},     {"beta1", c.beta1},
                       {"beta2", c.beta2}, {"eps", c.eps},
                       {"weight_decay", c.weight_decay}, {"grad_clip", c.grad_clip}};
}

bool restore_optimizer(const CheckpointFile& file, const ad::ParameterSet& params, nn::Adam& adam) {
  if (params.size() == 0 || !file.find("adam_m", params[0].name)) return false;
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam.first_moments()[i] = file.get("adam_m", params[i].name);
    adam.second_moments()[i] = file.get("adam_v", params[i].name);
  }
  adam.set_step_count(file.optimizer_step);
  if (file.meta.contains("adam")) {
    const auto& j = file.meta["adam"];
    auto& c = adam.config();
    try {
      c.lr = j.at("lr").get<double>();
      c.beta1 = j.at("beta1").get<double>();
      c.beta2 = j.at("beta2").get<double>();
      c.eps = j.at("eps").get<double>();
      c.weight_decay = j.at("weight_decay").get<double>();
      c.grad_clip = j.at("grad_clip").get<double>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("malformed optimizer settings: ") + e.what());
    }
  }
  return true;
}

}  // namespace fapcd::ckpt
