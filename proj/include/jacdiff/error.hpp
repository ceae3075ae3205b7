#pragma once

#include <stdexcept>
#include <string>

namespace jacdiff {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kSuccess = 0,
  kFormat = 2,
  kParameter = 3,
  kCertificate = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what, ExitCode::kParameter) {}
};

/// Weight evaluated at an endpoint where it diverges.
class SingularityError : public Error {
 public:
  explicit SingularityError(const std::string& what) : Error(what, ExitCode::kParameter) {}
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(what, ExitCode::kParameter) {}
};

/// Signal too short for the requested window.
class WindowError : public Error {
 public:
  explicit WindowError(const std::string& what) : Error(what, ExitCode::kParameter) {}
};

/// A kernel failed its moment certificate. Always a numerics bug.
class CertificateError : public Error {
 public:
  explicit CertificateError(const std::string& what) : Error(what, ExitCode::kCertificate) {}
};

/// Non-finite function values or too few usable evaluation points.
class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& what) : Error(what, ExitCode::kParameter) {}
};

/// Structurally malformed input file (non-uniform grid, wrong column count).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what, ExitCode::kFormat) {}
};

/// Unparseable cell in an input file.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what, ExitCode::kFormat) {}
};

}  // namespace jacdiff
