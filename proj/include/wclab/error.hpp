#pragma once

#include <stdexcept>
#include <string>

namespace wclab {

// Malformed operator specs, field dumps and config files.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape disagreements: vector lengths, channel counts, grids.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Violated preconditions that are neither parse nor shape problems
// (zero state difference, state difference inside the wave cone, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite values encountered during an experiment.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wclab
