#include "crowdship/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace crowdship {

static LogLevel parse_level(const char* s) {
  if (!s) return LogLevel::Info;
  if (!std::strcmp(s, "debug")) return LogLevel::Debug;
  if (!std::strcmp(s, "info")) return LogLevel::Info;
  if (!std::strcmp(s, "warn")) return LogLevel::Warn;
  if (!std::strcmp(s, "error")) return LogLevel::Error;
  if (!std::strcmp(s, "off")) return LogLevel::Off;
  std::fprintf(stderr, "[warn] unknown CROWDSHIP_LOG value '%s', using info\n", s);
  return LogLevel::Info;
}

LogLevel log_threshold() {
  static LogLevel level = parse_level(std::getenv("CROWDSHIP_LOG"));
  return level;
}

void log_line(LogLevel level, const std::string& msg) {
  if (level < log_threshold()) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

}  // namespace crowdship
