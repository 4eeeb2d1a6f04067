// SPDX-License-Identifier: Apache-2.0
#include "flexpose/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace flexpose {

void init_logging_from_env() {
  auto logger = spdlog::stderr_color_mt("flexpose");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("FLEXPOSE_LOG_LEVEL")) {
    const std::string v(env);
    const auto level = spdlog::level::from_str(v);
    // from_str maps unknown names to "off"; only honour that when asked for.
    if (level != spdlog::level::off || v == "off") spdlog::set_level(level);
    else spdlog::warn("unknown FLEXPOSE_LOG_LEVEL '{}', using info", v);
  }
}

}  // namespace flexpose
