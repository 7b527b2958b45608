#pragma once
#include <string>

namespace crowdship {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Threshold comes from the CROWDSHIP_LOG env var (debug|info|warn|error|off),
// read once on first use. Default: info.
LogLevel log_threshold();

void log_line(LogLevel level, const std::string& msg);

inline void log_debug(const std::string& m) { log_line(LogLevel::Debug, m); }
inline void log_info(const std::string& m) { log_line(LogLevel::Info, m); }
inline void log_warn(const std::string& m) { log_line(LogLevel::Warn, m); }
inline void log_error(const std::string& m) { log_line(LogLevel::Error, m); }

}  // namespace crowdship
