#pragma once

#include <string>

namespace massive {

// Diagnostics go to stderr so machine-readable output on stdout / in files
// stays byte-stable. Bulk experiments (tests, benchmarks) can silence
// warnings entirely.
enum class log_level { silent = 0, warn = 1, info = 2 };

void set_log_level(log_level level);
log_level get_log_level();

void log_warn(const std::string& msg);
void log_info(const std::string& msg);

}  // namespace massive
