// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flexpose/dldm/model.hpp"
#include "flexpose/eval/report.hpp"
#include "flexpose/pfp/model.hpp"
#include "flexpose/pfp/train.hpp"
#include "flexpose/pipeline/dataset.hpp"
#include "flexpose/runtime/calibration.hpp"

namespace flexpose::pipeline {

enum class ImuSource { kTight, kLoose };

runtime::CalibrationPlan plan_for(const SynthConfig& config);

/// Calibrates on the recording's gesture prefix using the chosen IMU stream
/// and returns the motion portion as model input.
pfp::PfpSequence to_pfp_sequence(const Recording& rec, ImuSource source, const runtime::CalibrationPlan& plan);

std::vector<pfp::PfpSequence> to_pfp_sequences(std::span<const Recording> recs, ImuSource source,
                                               const runtime::CalibrationPlan& plan);

/// Tight motion plus sampled displacement windows, normalized with the tight
/// T-pose references. Flex is calibrated as in to_pfp_sequence.
pfp::PfpSequence augmented_sequence(const Recording& rec, const dldm::DldmModel& model, std::uint64_t seed,
                                    const runtime::CalibrationPlan& plan);

/// Loose minus tight displacement over the motion portion of each recording,
/// cut into windows.
std::vector<dldm::DisplacementWindow> displacement_windows(std::span<const Recording> recs, std::size_t window,
                                                           std::size_t stride);

eval::PoseMetricsReport evaluate_pfp(const pfp::PfpModel& model, std::span<const pfp::PfpSequence> sequences);

}  // namespace flexpose::pipeline
