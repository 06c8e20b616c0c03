#include "mfdelay/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace mfdelay {

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("MFDELAY_LOG");
        if (!env) return LogLevel::Error;
        const std::string s(env);
        if (s == "debug") return LogLevel::Debug;
        if (s == "info") return LogLevel::Info;
        return LogLevel::Error;
    }();
    return level;
}

void log_message(LogLevel level, const std::string& msg) {
    static std::mutex mu;
    const char* tag = level == LogLevel::Debug ? "debug" : level == LogLevel::Info ? "info" : "error";
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[mfdelay:" << tag << "] " << msg << "\n";
}

} // namespace mfdelay
