#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace syndecomp {

/// Failure categories. The CLI maps them onto exit codes.
enum class ErrorKind {
  schema,
  parse,
  validation,
  usage,
  singular_fit,
  degenerate_design,
  no_identification,
  empty_window,
  empty_matched_group,
  numeric,
  insufficient_draws,
  degenerate_scale,
  singular_metric,
  bootstrap_failure,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every module. `module()` names the component that
/// raised it so that callers can point users at the right knob.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(message), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

  /// True for errors caused by bad input or configuration (as opposed to
  /// numerical trouble during estimation).
  bool is_input_error() const noexcept {
    return kind_ == ErrorKind::schema || kind_ == ErrorKind::parse ||
           kind_ == ErrorKind::validation || kind_ == ErrorKind::usage;
  }

 private:
  ErrorKind kind_;
  std::string module_;
};

/// Raised when a kernel ARF is evaluated where no training point lies
/// within one bandwidth.
class EmptyWindowError : public Error {
 public:
  EmptyWindowError(double mu, double nearest_endpoint, const std::string& message)
      : Error(ErrorKind::empty_window, "arf", message),
        mu_(mu),
        nearest_endpoint_(nearest_endpoint) {}

  double mu() const noexcept { return mu_; }
  double nearest_endpoint() const noexcept { return nearest_endpoint_; }

 private:
  double mu_;
  double nearest_endpoint_;
};

/// Raised by row-oriented parsers; `row()` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& message)
      : Error(ErrorKind::parse, "dataset", message), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace syndecomp
