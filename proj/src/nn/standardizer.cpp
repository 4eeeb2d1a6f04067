// SPDX-License-Identifier: Apache-2.0
#include "flexpose/nn/standardizer.hpp"

#include <algorithm>
#include <cmath>

#include "flexpose/error.hpp"

namespace flexpose::nn {

Standardizer::Standardizer(std::vector<double> mean, std::vector<double> std)
    : mean_(std::move(mean)), std_(std::move(std)) {
  if (mean_.size() != std_.size()) throw DimensionError("standardizer mean/std sizes differ");
  for (double s : std_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("standardizer std must be positive");
  }
}

Standardizer Standardizer::fit(const Tensor& rows, double min_std) {
  StatsAccumulator acc(rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r) acc.add(rows.row(r));
  return acc.finish(min_std);
}

void Standardizer::apply(std::span<double> row) const {
  if (row.size() != mean_.size()) throw DimensionError("standardizer feature count mismatch");
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = (row[i] - mean_[i]) / std_[i];
}

void Standardizer::invert(std::span<double> row) const {
  if (row.size() != mean_.size()) throw DimensionError("standardizer feature count mismatch");
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = row[i] * std_[i] + mean_[i];
}

Tensor Standardizer::apply(const Tensor& rows) const {
  Tensor out = rows;
  for (std::size_t r = 0; r < out.rows(); ++r) apply(out.row(r));
  return out;
}

Tensor Standardizer::invert(const Tensor& rows) const {
  Tensor out = rows;
  for (std::size_t r = 0; r < out.rows(); ++r) invert(out.row(r));
  return out;
}

std::vector<NamedTensor> Standardizer::to_tensors(const std::string& prefix) const {
  return {{prefix + ".mean", Tensor({mean_.size()}, mean_)}, {prefix + ".std", Tensor({std_.size()}, std_)}};
}

Standardizer Standardizer::from_checkpoint(const Checkpoint& ckpt, const std::string& prefix) {
  const auto m = ckpt.get(prefix + ".mean").data();
  const auto s = ckpt.get(prefix + ".std").data();
  return Standardizer({m.begin(), m.end()}, {s.begin(), s.end()});
}

void StatsAccumulator::add(std::span<const double> row) {
  if (row.size() != mean_.size()) throw DimensionError("statistics feature count mismatch");
  ++count_;
  const double n = static_cast<double>(count_);
  for (std::size_t i = 0; i < row.size(); ++i) {
    const double d = row[i] - mean_[i];
    mean_[i] += d / n;
    m2_[i] += d * (row[i] - mean_[i]);
  }
}

Standardizer StatsAccumulator::finish(double min_std) const {
  if (count_ == 0) throw LengthError("no samples to standardize");
  std::vector<double> sd(mean_.size());
  for (std::size_t i = 0; i < sd.size(); ++i) {
    sd[i] = std::max(std::sqrt(m2_[i] / static_cast<double>(count_)), min_std);
  }
  return Standardizer(mean_, sd);
}

}  // namespace flexpose::nn
