#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace catgeo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error with a stable machine-readable code ("AllDensitiesZero", "NotBinary", ...).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& msg)
      : std::runtime_error(code + ": " + msg), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& msg) {
  throw Error(code, msg);
}

// Quality flags attached to results that are degraded but still usable.
using Flags = std::vector<std::string>;

inline void add_flag(Flags& flags, const std::string& f) {
  for (const auto& g : flags)
    if (g == f) return;
  flags.push_back(f);
}

inline bool has_flag(const Flags& flags, const std::string& f) {
  for (const auto& g : flags)
    if (g == f) return true;
  return false;
}

}  // namespace catgeo
