#pragma once

#include <stdexcept>

namespace fednoil {

// Bad configuration value or an invalid combination of values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data (IDX containers, model blobs, CSV logs).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite activations or losses. Signals local divergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The dataset cannot satisfy a requested client allocation.
class AllocationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violations of the round protocol (empty aggregation set, all clients diverged).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fednoil
