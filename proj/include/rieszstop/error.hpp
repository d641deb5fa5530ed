#pragma once

#include <stdexcept>
#include <string>

namespace rieszstop {

/// Argument outside the mathematical domain of an operation (nonpositive
/// price, degenerate correlation, u <= 0 for K0, ...).
class domain_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation at a point where the quantity is infinite (kernel diagonal).
class singularity_error : public domain_error {
public:
  using domain_error::domain_error;
};

/// Inconsistent or incomplete configuration.
class config_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to reach its target (bracketing, quadrature
/// tolerance, optimizer budget). `estimate` carries the best value reached.
class solver_error : public std::runtime_error {
public:
  solver_error(const std::string& what, double estimate = 0.0)
      : std::runtime_error(what), estimate_(estimate) {}
  double estimate() const noexcept { return estimate_; }

private:
  double estimate_;
};

/// A verification gate (MC identity, uniqueness gate) did not pass.
class gate_failure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const char* msg) {
  if (!cond) throw domain_error(msg);
}
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw domain_error(msg);
}
}  // namespace detail

}  // namespace rieszstop
