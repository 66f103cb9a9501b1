#pragma once

#include <stdexcept>
#include <string>

namespace intent_ape {

/// Coarse failure classes. The CLI maps them onto its exit codes.
enum class ErrorCategory { Configuration, Runtime, Validation };

class Error : public std::runtime_error {
  public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    [[nodiscard]] ErrorCategory category() const noexcept { return category_; }

  private:
    ErrorCategory category_;
};

class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::Configuration, what) {}
};

class RuntimeFailure : public Error {
  public:
    explicit RuntimeFailure(const std::string& what) : Error(ErrorCategory::Runtime, what) {}
};

class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& what) : Error(ErrorCategory::Validation, what) {}
};

}  // namespace intent_ape
