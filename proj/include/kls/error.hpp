#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kls {

/// Site or bond index outside the lattice.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Operation not defined for the given topology or site range.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parameter outside its admissible range.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Requested problem size exceeds a hard cap.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degenerate model (e.g. a plateau in j(rho)) for which the requested
/// quantity is not uniquely determined.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal consistency check failed (e.g. a sampled curve that should
/// be monotone is not).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The Markov chain has more than one closed communicating class, so the
/// stationary measure is not unique. Each class is a list of state indices.
class ReducibleChainError : public std::runtime_error {
 public:
  ReducibleChainError(const std::string& what,
                      std::vector<std::vector<std::size_t>> classes)
      : std::runtime_error(what), closed_classes(std::move(classes)) {}

  std::vector<std::vector<std::size_t>> closed_classes;
};

}  // namespace kls
