#pragma once

#include <stdexcept>
#include <string>

namespace fbsde {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IntegrationFailure : public std::runtime_error {
 public:
  IntegrationFailure(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class SimulationFailure : public std::runtime_error {
 public:
  SimulationFailure(const std::string& what, std::size_t step, std::size_t path)
      : std::runtime_error(what), step_(step), path_(path) {}
  std::size_t step() const noexcept { return step_; }
  std::size_t path() const noexcept { return path_; }

 private:
  std::size_t step_;
  std::size_t path_;
};

class SingularStep : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EvaluationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t stage)
      : std::runtime_error(what), stage_(stage) {}
  std::size_t stage() const noexcept { return stage_; }

 private:
  std::size_t stage_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fbsde
