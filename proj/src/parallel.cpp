#include "massive/parallel.hpp"
#include "massive/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>
#include <thread>

namespace massive {

namespace {
std::atomic<int> g_threads{0};  // 0 = auto
std::atomic<log_level> g_log_level{log_level::warn};
std::mutex g_log_mutex;
}  // namespace

void set_num_threads(int threads) { g_threads.store(threads < 0 ? 0 : threads); }

int hardware_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

int num_threads() {
  int t = g_threads.load();
  return t == 0 ? hardware_threads() : t;
}

void set_log_level(log_level level) { g_log_level.store(level); }
log_level get_log_level() { return g_log_level.load(); }

void log_warn(const std::string& msg) {
  if (static_cast<int>(g_log_level.load()) < static_cast<int>(log_level::warn)) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[warn] " << msg << "\n";
}

void log_info(const std::string& msg) {
  if (static_cast<int>(g_log_level.load()) < static_cast<int>(log_level::info)) return;
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[info] " << msg << "\n";
}

}  // namespace massive
