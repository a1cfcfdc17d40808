#pragma once

#include <stdexcept>
#include <string>

namespace hubfield {

/// A numerical or modelling failure (degenerate density, non-invertible map,
/// unsolvable mass equation). Precondition violations use
/// std::invalid_argument instead.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. The message names the file and the offending line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hubfield
