// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "flexpose/nn/checkpoint.hpp"
#include "flexpose/nn/tensor.hpp"

namespace flexpose::nn {

/// Per-feature affine normalization x -> (x - mean) / std.
class Standardizer {
 public:
  Standardizer() = default;
  explicit Standardizer(std::size_t features) : mean_(features, 0.0), std_(features, 1.0) {}
  Standardizer(std::vector<double> mean, std::vector<double> std);

  /// Column statistics of a rows x features matrix.
  static Standardizer fit(const Tensor& rows, double min_std = 1e-8);

  std::size_t features() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& std() const { return std_; }

  void apply(std::span<double> row) const;
  void invert(std::span<double> row) const;
  Tensor apply(const Tensor& rows) const;
  Tensor invert(const Tensor& rows) const;

  std::vector<NamedTensor> to_tensors(const std::string& prefix) const;
  static Standardizer from_checkpoint(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<double> mean_;
  std::vector<double> std_;
};

/// Streaming mean/variance (Welford) for data too large to hold at once.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(std::size_t features) : mean_(features, 0.0), m2_(features, 0.0) {}
  void add(std::span<const double> row);
  std::size_t count() const { return count_; }
  Standardizer finish(double min_std = 1e-8) const;

 private:
  std::size_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

}  // namespace flexpose::nn
