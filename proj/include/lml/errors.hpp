#pragma once

#include <stdexcept>
#include <string>

namespace lml {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class AmbiguousMajorityError : public Error {
 public:
  AmbiguousMajorityError() : Error("ambiguous majority: maximum count is tied") {}
};

class InfeasibleScenarioError : public Error {
 public:
  using Error::Error;
};

class PoolExhaustedError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class DegeneratePredictorError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lml
