/* Copyright 2026 The MCM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef MCM_LOG_HPP_
#define MCM_LOG_HPP_

#include <functional>
#include <string>

namespace mcm {

enum class LogLevel { kInfo = 0, kWarning = 1 };

using LogSink = std::function<void(LogLevel, const std::string&)>;

// Replaces the process-wide sink. An empty sink restores the stderr default.
void SetLogSink(LogSink sink);
void Log(LogLevel level, const std::string& message);

inline void LogWarning(const std::string& message) { Log(LogLevel::kWarning, message); }
inline void LogInfo(const std::string& message) { Log(LogLevel::kInfo, message); }

// Shortest round-trip decimal form, used by every text log and config echo.
std::string FormatDouble(double value);

}  // namespace mcm

#endif  // MCM_LOG_HPP_
