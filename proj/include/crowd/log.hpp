#pragma once

#include <string_view>

namespace crowd::log {

enum class Level { Debug = 0, Info = 1, Warn = 2, Off = 3 };

/// Threshold read once from CROWD_LOG (debug|info|warn|off, default warn).
Level threshold();
void set_threshold(Level level);

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::Debug, m); }
inline void info(std::string_view m) { write(Level::Info, m); }
inline void warn(std::string_view m) { write(Level::Warn, m); }

}  // namespace crowd::log
