// Copyright (c) 2026 dustlayer contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dustlayer {

/// Process exit codes used by the CLI; library exceptions map onto them.
enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  condition1_failure = 3,
  condition2_failure = 4,
  numerical_failure = 5,
};

class Error : public std::runtime_error {
public:
  Error(ExitCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

private:
  ExitCode code_;
};

/// Malformed or inconsistent run configuration / input files.
struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ExitCode::config_error, m) {}
};

/// The size operator violates the simple-zero / negative-spectrum requirement.
struct Condition1Error : Error {
  explicit Condition1Error(const std::string& m) : Error(ExitCode::condition1_failure, m) {}
};

/// Initial data violate the surface deposition-pickup equilibrium.
struct Condition2Error : Error {
  explicit Condition2Error(const std::string& m) : Error(ExitCode::condition2_failure, m) {}
};

/// Solver blow-up, CFL violation, ill-conditioned bases, non-finite values.
struct NumericalError : Error {
  explicit NumericalError(const std::string& m) : Error(ExitCode::numerical_failure, m) {}
};

/// Operands live on different grids or snapshot lists.
struct GridMismatchError : ConfigError {
  explicit GridMismatchError(const std::string& m) : ConfigError(m) {}
};

}  // namespace dustlayer
