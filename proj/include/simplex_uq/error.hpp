#pragma once

#include <stdexcept>
#include <string>

namespace simplex_uq {

/// Process exit status associated with each error family.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kRankOrShape = 2,
  kNumeric = 3,
  kUnknownSubcommand = 64,
};

class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code) : std::runtime_error(what), code_(code) {}
  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Invalid design or configuration parameters.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(what, ExitCode::kUsage) {}
};

// A composition vector violating the simplex constraints. `index` is the
// offending coordinate, or -1 when the violation is the sum.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, long index)
      : Error(what, ExitCode::kUsage), index_(index) {}
  long index() const noexcept { return index_; }

 private:
  long index_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what, ExitCode::kRankOrShape) {}
};

// Gram matrix of training compositions is singular or ill-conditioned.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, double condition_number)
      : Error(what, ExitCode::kRankOrShape), condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

// Normal matrix of the fixed-operator problem is rank deficient.
class NonUniqueSolutionError : public Error {
 public:
  explicit NonUniqueSolutionError(const std::string& what) : Error(what, ExitCode::kRankOrShape) {}
};

class SingularCovarianceError : public Error {
 public:
  explicit SingularCovarianceError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

// Requested closed form does not exist for the design.
class UnsupportedClosedFormError : public Error {
 public:
  explicit UnsupportedClosedFormError(const std::string& what) : Error(what, ExitCode::kUsage) {}
};

class UndefinedCorrelationError : public Error {
 public:
  explicit UndefinedCorrelationError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

class VarianceUndefinedError : public Error {
 public:
  explicit VarianceUndefinedError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

class DegenerateDesignError : public Error {
 public:
  explicit DegenerateDesignError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

// Proposal kernel could not land inside the simplex.
class StepScaleError : public Error {
 public:
  explicit StepScaleError(const std::string& what) : Error(what, ExitCode::kNumeric) {}
};

}  // namespace simplex_uq
