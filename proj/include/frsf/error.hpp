#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace frsf {

enum class ErrorKind {
  parse,
  validation,
  schema,
  censoring_consistency,
  missing_series,
  domain,
  dimension,
  degenerate_series,
  truncation_domain,
  sparse_support,
  bandwidth_selection,
  parameter,
  resolution,
  degenerate_model,
  conditioning,
  contract,
  empty_sample,
  degenerate_split,
  unlearnable,
  input,
  coverage,
  name,
  undefined_concordance,
  evaluability,
  io,
};

std::string_view to_string(ErrorKind kind);

// Every library failure is reported through this type; `kind` lets callers
// (and tests) distinguish the contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }
  /// Same kind, message prefixed with "<context>: ".
  Error with_context(const std::string& context) const { return Error(kind_, context + ": " + detail_); }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace frsf
