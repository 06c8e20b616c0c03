#pragma once

#include <sstream>
#include <string>

namespace mfdelay {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Level comes from MFDELAY_LOG in {error, info, debug}; default error.
LogLevel log_level();
void log_message(LogLevel level, const std::string& msg);

#define MFDELAY_LOG_AT(lvl, expr)                                                              \
    do {                                                                                       \
        if (static_cast<int>(lvl) <= static_cast<int>(::mfdelay::log_level())) {               \
            std::ostringstream log_os_;                                                        \
            log_os_ << expr;                                                                   \
            ::mfdelay::log_message(lvl, log_os_.str());                                        \
        }                                                                                      \
    } while (0)

#define MFDELAY_INFO(expr) MFDELAY_LOG_AT(::mfdelay::LogLevel::Info, expr)
#define MFDELAY_DEBUG(expr) MFDELAY_LOG_AT(::mfdelay::LogLevel::Debug, expr)
#define MFDELAY_ERROR(expr) MFDELAY_LOG_AT(::mfdelay::LogLevel::Error, expr)

} // namespace mfdelay
