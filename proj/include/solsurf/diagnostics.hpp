#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <string>

namespace solsurf {

using WarningHandler = std::function<void(const std::string&)>;

namespace detail {
struct WarningState {
  std::mutex mu;
  WarningHandler handler = [](const std::string& m) { std::cerr << "solsurf warning: " << m << '\n'; };
  std::set<std::string> seen;
};
inline WarningState& warning_state() {
  static WarningState s;
  return s;
}
}  // namespace detail

/// Replaces the warning sink (stderr by default). An empty handler silences warnings.
inline void set_warning_handler(WarningHandler h) {
  auto& s = detail::warning_state();
  std::lock_guard lock(s.mu);
  s.handler = std::move(h);
}

inline void warn(const std::string& msg) {
  auto& s = detail::warning_state();
  std::lock_guard lock(s.mu);
  if (s.handler) s.handler(msg);
}

/// Emits msg only the first time key is seen in this process.
inline void warn_once(const std::string& key, const std::string& msg) {
  auto& s = detail::warning_state();
  std::lock_guard lock(s.mu);
  if (!s.seen.insert(key).second) return;
  if (s.handler) s.handler(msg);
}

}  // namespace solsurf
