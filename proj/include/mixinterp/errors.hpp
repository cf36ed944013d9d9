#pragma once

#include <stdexcept>
#include <string>

namespace mixinterp {

// Invalid arguments are reported with std::invalid_argument throughout.

class TrainingFailure : public std::runtime_error {
 public:
  TrainingFailure(int epoch, const std::string& what)
      : std::runtime_error("training failed at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class AttributionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OracleFailure : public std::runtime_error {
 public:
  OracleFailure(int step, const std::string& what)
      : std::runtime_error("score oracle failed at step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

class InsufficientSamples : public std::runtime_error {
 public:
  InsufficientSamples(std::size_t passed, std::size_t requested)
      : std::runtime_error("only " + std::to_string(passed) + " candidates passed the filters, " +
                           std::to_string(requested) + " requested"),
        passed_(passed) {}
  std::size_t passed() const { return passed_; }

 private:
  std::size_t passed_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mixinterp
