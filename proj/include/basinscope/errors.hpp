#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace basinscope {

/// Broad failure classes; the CLI maps these onto exit codes.
enum class ErrorCategory {
  Usage,        // malformed input, schema, unknown names
  Numerical,    // convergence failures, blow-up, domain errors
  Inconclusive  // a verdict could not be reached within the horizon
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::string token, const std::string& msg)
      : Error(ErrorCategory::Usage,
              "syntax error at position " + std::to_string(position) +
                  " near '" + token + "': " + msg),
        position_(position),
        token_(std::move(token)),
        detail_(msg) {}
  std::size_t position() const noexcept { return position_; }
  const std::string& token() const noexcept { return token_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t position_;
  std::string token_;
  std::string detail_;
};

class UnknownIdentifier : public Error {
 public:
  explicit UnknownIdentifier(std::string name, const std::string& context = {})
      : Error(ErrorCategory::Usage,
              "unknown identifier '" + name + "'" +
                  (context.empty() ? std::string() : " in " + context)),
        name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what)
      : Error(ErrorCategory::Usage, "schema error: " + what) {}
};

class UnknownModel : public Error {
 public:
  explicit UnknownModel(const std::string& name)
      : Error(ErrorCategory::Usage, "unknown builtin model '" + name + "'") {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what)
      : Error(ErrorCategory::Numerical, "domain error: " + what) {}
};

class NoConvergence : public Error {
 public:
  explicit NoConvergence(const std::string& what)
      : Error(ErrorCategory::Numerical, "no convergence: " + what) {}
};

class SingularJacobian : public Error {
 public:
  SingularJacobian() : Error(ErrorCategory::Numerical, "singular Jacobian") {}
};

class NotStable : public Error {
 public:
  NotStable()
      : Error(ErrorCategory::Usage, "equilibrium is not stable") {}
};

class NoAttractors : public Error {
 public:
  NoAttractors()
      : Error(ErrorCategory::Numerical, "no stable equilibrium inside the box") {}
};

class SingleBasin : public Error {
 public:
  SingleBasin()
      : Error(ErrorCategory::Numerical,
              "fewer than two attractor basins present") {}
};

class NoEscapeFound : public Error {
 public:
  NoEscapeFound()
      : Error(ErrorCategory::Numerical,
              "no escaping kick magnitude found after 60 doublings") {}
};

class BasinExit : public Error {
 public:
  BasinExit()
      : Error(ErrorCategory::Numerical,
              "forcing drives the system out of its basin") {}
};

class ImmediateFailure : public Error {
 public:
  ImmediateFailure()
      : Error(ErrorCategory::Numerical,
              "continuation failed at the starting point") {}
};

class NoFolds : public Error {
 public:
  NoFolds() : Error(ErrorCategory::Usage, "no fold points supplied") {}
};

class ClassificationInconclusive : public Error {
 public:
  explicit ClassificationInconclusive(const std::string& stage)
      : Error(ErrorCategory::Inconclusive,
              "classification inconclusive: undecided settle during " + stage) {}
};

}  // namespace basinscope
