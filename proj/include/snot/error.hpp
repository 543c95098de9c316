#pragma once

#include <stdexcept>
#include <string>

namespace snot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid dataset specs, malformed JSON configs, bad CLI arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A problem exceeds a configured size limit (solver entries, brute force N).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mismatched dimensions, empty inputs, stale caches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or divergence during training.
class TrainingFault : public Error {
 public:
  using Error::Error;
};

}  // namespace snot
