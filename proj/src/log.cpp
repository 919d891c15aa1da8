#include "tge/log.hpp"

#include <cstdlib>
#include <cstring>
#include <iostream>

namespace tge {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("TGE_LOG");
        if (env == nullptr) return LogLevel::warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        if (std::strcmp(env, "warn") == 0) return LogLevel::warn;
        if (std::strcmp(env, "info") == 0) return LogLevel::info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

void log_message(LogLevel level, const std::string& message) {
    if (level > log_level()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "tge [" << names[static_cast<int>(level)] << "] " << message << "\n";
}

}  // namespace tge
