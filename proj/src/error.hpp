// Copyright 2026 The metric-lens Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef METRIC_LENS_ERROR_HPP_
#define METRIC_LENS_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlens {

enum class ErrorCode {
  config,
  empty_input,
  parse,
  schema,
  span,
  missing_segment,
  shape,
  trace_format,
  no_corruption_site,
  insufficient_donor,
  insufficient_dev_data,
  no_evaluable,
  io,
  internal,
};

const char* error_code_name(ErrorCode code);

// The single exception type thrown by the core. `line` is 1-based and only
// meaningful for parse/schema errors raised while reading a file.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::size_t line_;
};

}  // namespace mlens

#endif  // METRIC_LENS_ERROR_HPP_
