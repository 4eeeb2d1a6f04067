// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flexpose/nn/graph.hpp"
#include "flexpose/nn/tensor.hpp"

namespace flexpose::nn {

struct CheckpointMeta {
  std::string kind;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  nlohmann::json extra = nlohmann::json::object();
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::vector<NamedTensor> tensors;

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

// On-disk layout:
//   FLEXPOSE-CHECKPOINT 1\n
//   metadata-bytes <n>\n
//   <n bytes of JSON: kind, seed, step, extra, tensors[{name, shape}]>\n
//   little-endian float64 payload, tensors concatenated in declaration order
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const std::vector<NamedTensor>& tensors);
void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const ParameterList& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint tensors into params by name, verifying shapes.
void load_parameters(const Checkpoint& ckpt, const ParameterList& params);

}  // namespace flexpose::nn
