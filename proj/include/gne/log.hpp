#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace gne {

using LogSink = std::function<void(const std::string&)>;

namespace detail {
inline LogSink& warning_sink() {
  static LogSink sink = [](const std::string& msg) { std::cerr << "[warn] " << msg << '\n'; };
  return sink;
}
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Replace the warning sink; returns the previous one.
inline LogSink set_warning_sink(LogSink sink) {
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  LogSink old = std::move(detail::warning_sink());
  detail::warning_sink() = std::move(sink);
  return old;
}

inline void log_warning(const std::string& msg) {
  std::lock_guard<std::mutex> lock(detail::log_mutex());
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

}  // namespace gne
