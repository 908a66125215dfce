// Error types shared across the library. The CLI maps them to exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace jolt {

// Exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  usage = 1,
  config = 2,
  io = 3,
  numeric = 4,
};

// Invalid API usage (e.g. backward before forward, empty buffer).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration values (shapes, rates, unknown presets or keys).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A documented input contract was violated (row sums, one-hot rows, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File system and serialization failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return ExitCode::config;
  if (dynamic_cast<const IoError*>(&e)) return ExitCode::io;
  if (dynamic_cast<const NumericError*>(&e)) return ExitCode::numeric;
  return ExitCode::usage;
}

}  // namespace jolt
