// Copyright 2026 The Recalib Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RECALIB_ERROR_HPP
#define RECALIB_ERROR_HPP

#include <stdexcept>
#include <string>

namespace recalib {

/// Every failure the toolkit can report. Readers and builders never return
/// partial values; they throw an Error carrying one of these codes.
enum class ErrorCode {
  // calibration text parsing
  missing_key,
  malformed_number,
  wrong_arity,
  // rotation checks
  not_a_rotation,
  // binary readers
  truncated_file,
  count_mismatch,
  bad_magic,
  bad_header,
  truncated_pixels,
  // sampling and losses
  bad_range,
  empty_label_class,
  form_mismatch,
  // tensor files
  unsupported_version,
  length_mismatch,
  // recalibration and evaluation
  no_interested_points,
  degenerate_mask,
  not_decomposable,
  bad_grid,
  // configuration and I/O
  bad_config,
  io_error,
  internal,
};

inline const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::missing_key: return "missing_key";
    case ErrorCode::malformed_number: return "malformed_number";
    case ErrorCode::wrong_arity: return "wrong_arity";
    case ErrorCode::not_a_rotation: return "not_a_rotation";
    case ErrorCode::truncated_file: return "truncated_file";
    case ErrorCode::count_mismatch: return "count_mismatch";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::bad_header: return "bad_header";
    case ErrorCode::truncated_pixels: return "truncated_pixels";
    case ErrorCode::bad_range: return "bad_range";
    case ErrorCode::empty_label_class: return "empty_label_class";
    case ErrorCode::form_mismatch: return "form_mismatch";
    case ErrorCode::unsupported_version: return "unsupported_version";
    case ErrorCode::length_mismatch: return "length_mismatch";
    case ErrorCode::no_interested_points: return "no_interested_points";
    case ErrorCode::degenerate_mask: return "degenerate_mask";
    case ErrorCode::not_decomposable: return "not_decomposable";
    case ErrorCode::bad_grid: return "bad_grid";
    case ErrorCode::bad_config: return "bad_config";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace recalib

#endif  // RECALIB_ERROR_HPP
