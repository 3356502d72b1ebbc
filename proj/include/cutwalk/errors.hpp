#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cutwalk {

// Error taxonomy mirrors the CLI exit codes: config/schema (2),
// model-level (3, e.g. census on a recurrent walk), numeric caps (4).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class CapError : public Error {
 public:
  using Error::Error;
};

// Thrown when a continued-fraction tail bracket fails to close within the
// depth cap; carries the last bracket so the caller can retry or accept.
class TailDepthError : public CapError {
 public:
  TailDepthError(const std::string& what, double lo, double hi, std::int64_t depth)
      : CapError(what), bracket_lo(lo), bracket_hi(hi), depth(depth) {}
  double bracket_lo;
  double bracket_hi;
  std::int64_t depth;
};

// Corollary-family inversion failed at the requested clamp index; carries the
// smallest index at which the inversion is feasible.
class FeasibilityError : public ModelError {
 public:
  FeasibilityError(const std::string& what, std::int64_t smallest_feasible)
      : ModelError(what), smallest_feasible_n0(smallest_feasible) {}
  std::int64_t smallest_feasible_n0;
};

}  // namespace cutwalk
