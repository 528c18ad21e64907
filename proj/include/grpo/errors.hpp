#pragma once

#include <stdexcept>
#include <string>

namespace grpo {

/// Token id outside the vocabulary.
class InvalidTokenError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Non-finite value produced during a computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed checkpoint, config or CSV text. Messages name the offending line.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Manifest ingestion failure; the message lists every rejected line.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace grpo
