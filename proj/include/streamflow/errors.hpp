#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace streamflow {

// Raised for malformed documents, schema violations and bad bindings.
// `where` is a schema path such as "models.hpc.type" or a step path.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string where, const std::string& message)
      : std::runtime_error(where.empty() ? message : where + ": " + message),
        where_(std::move(where)) {}

  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConnectorError : public EngineError {
 public:
  using EngineError::EngineError;
};

class SchedulerError : public EngineError {
 public:
  using EngineError::EngineError;
};

class DataError : public EngineError {
 public:
  using EngineError::EngineError;
};

// Collected undeploy failures; thrown by DeploymentManager::undeploy_all
// after every model has been attempted.
class TeardownError : public EngineError {
 public:
  explicit TeardownError(std::vector<std::string> failures)
      : EngineError("teardown failed for " + std::to_string(failures.size()) +
                    " model(s)"),
        failures_(std::move(failures)) {}

  const std::vector<std::string>& failures() const noexcept { return failures_; }

 private:
  std::vector<std::string> failures_;
};

}  // namespace streamflow
