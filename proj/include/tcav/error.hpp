#pragma once

#include <stdexcept>
#include <string>

namespace tcav {

// Validation failures (bad shapes, bad configs, unbound leaves, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace tcav
