// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace descnet {

/// Base of every error the library throws. `exit_code` is what the CLI
/// returns when the error escapes a command.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, int exit_code) : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Bad or missing input: files, labels, config keys.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(what, 2) {}
};

/// Non-finite values, failed gradient checks, divergent training.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what, 3) {}
};

/// Artifacts that do not belong together (hash or shape mismatch).
class CompatibilityError : public Error {
 public:
  explicit CompatibilityError(const std::string& what) : Error(what, 4) {}
};

/// Tensor shape errors are programming errors, not user input errors.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace descnet
