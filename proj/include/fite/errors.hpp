#pragma once

#include <stdexcept>
#include <string>

namespace fite {

struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DegenerateDirectionError : std::runtime_error {
  explicit DegenerateDirectionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidInputError : std::runtime_error {
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SolverError : std::runtime_error {
  SolverError(const std::string& msg, double residual)
      : std::runtime_error(msg), final_residual(residual) {}
  double final_residual;
};

struct TrainingError : std::runtime_error {
  TrainingError(const std::string& msg, long step)
      : std::runtime_error(msg), step_index(step) {}
  long step_index;
};

struct ExtractionError : std::runtime_error {
  explicit ExtractionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fite
