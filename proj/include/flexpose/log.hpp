// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <spdlog/spdlog.h>

namespace flexpose {

/// Sets the global log level from FLEXPOSE_LOG_LEVEL (trace, debug, info,
/// warn, error, critical, off). Unset or unknown values keep "info".
void init_logging_from_env();

}  // namespace flexpose
