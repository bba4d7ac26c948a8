#pragma once

#include <stdexcept>
#include <string>

namespace rainbowq {

// Invalid configuration (bad hyperparameter, unknown key, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

// Invalid call input (bad shape, out-of-range value, unknown env id, ...).
struct InputError : std::runtime_error {
  explicit InputError(const std::string& m) : std::runtime_error(m) {}
};

// Operation requested before its preconditions hold (e.g. sampling an
// underfilled replay buffer).
struct NotReadyError : std::runtime_error {
  explicit NotReadyError(const std::string& m) : std::runtime_error(m) {}
};

// API misuse with respect to internal state (backward before forward, ...).
struct StateError : std::runtime_error {
  explicit StateError(const std::string& m) : std::runtime_error(m) {}
};

// Filesystem / serialization failures; message carries the path.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// Training diverged (non-finite loss); surfaced to the run driver.
struct DivergedError : std::runtime_error {
  explicit DivergedError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace rainbowq
