#pragma once

#include <stdexcept>
#include <string>

namespace ckf {

/// Invalid argument values (non-finite inputs, non-positive scales, bad shapes).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numeric operation could not be carried out (e.g. a singular innovation covariance).
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs that are individually valid but inconsistent with each other,
/// such as a measurement flagged AtLower against an interval with no lower limit.
class contract_error : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw domain_error(what);
}

}  // namespace detail
}  // namespace ckf
