#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace v2spin {

enum class ErrorKind {
  Domain,           // argument outside the mathematical domain of an operation
  Size,             // Hilbert space larger than the configured cap
  Validation,       // malformed or inconsistent input
  Labeling,         // eigenstates could not be given product-basis labels
  Hybridized,       // transition not identifiable because its states are mixed
  Matching,         // measurement key has no model counterpart
  NonIdentifiable,  // singular normal equations in a fit
  Parse,            // document does not match its schema
  Extraction,       // spectrum does not contain the requested features
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Size: return "size error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Labeling: return "labeling error";
    case ErrorKind::Hybridized: return "hybridized";
    case ErrorKind::Matching: return "matching error";
    case ErrorKind::NonIdentifiable: return "non-identifiable";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Extraction: return "extraction error";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures of the numerics rather than of the inputs.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::Hybridized || kind_ == ErrorKind::NonIdentifiable ||
           kind_ == ErrorKind::Extraction || kind_ == ErrorKind::Labeling;
  }

 private:
  ErrorKind kind_;
};

/// Raised by the fitter when the normal equations are singular. Carries the
/// unit null-space direction in free-parameter order.
class NonIdentifiableError : public Error {
 public:
  NonIdentifiableError(const std::string& what, std::vector<std::string> names,
                       std::vector<double> direction)
      : Error(ErrorKind::NonIdentifiable, what),
        names_(std::move(names)),
        direction_(std::move(direction)) {}

  const std::vector<std::string>& parameter_names() const noexcept { return names_; }
  const std::vector<double>& direction() const noexcept { return direction_; }

 private:
  std::vector<std::string> names_;
  std::vector<double> direction_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

using WarningSink = std::function<void(std::string_view)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

inline void warn(std::string_view msg) {
  if (auto& sink = warning_sink()) sink(msg);
}

}  // namespace v2spin
