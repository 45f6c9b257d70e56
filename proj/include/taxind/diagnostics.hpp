#pragma once

#include <iostream>
#include <mutex>
#include <string>
#include <vector>

namespace taxind {

/// Thread-safe collector for non-fatal warnings. Messages are echoed to stderr
/// when `echo` is set.
class Diagnostics {
 public:
  explicit Diagnostics(bool echo = false) : echo_(echo) {}

  void warn(const std::string& message) {
    std::lock_guard lock(mutex_);
    if (echo_) std::cerr << "warning: " << message << '\n';
    messages_.push_back(message);
  }

  std::vector<std::string> messages() const {
    std::lock_guard lock(mutex_);
    return messages_;
  }

 private:
  bool echo_;
  mutable std::mutex mutex_;
  std::vector<std::string> messages_;
};

}  // namespace taxind
