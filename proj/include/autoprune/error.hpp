// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace autoprune {

enum class Errc {
    missing_manifest,
    unknown_version,
    bad_manifest,
    shape_mismatch,
    non_finite,
    io_failure,
    empty_corpus,
    malformed_corpus,
    token_out_of_range,
    invalid_argument,
    singular_gram,
    invalid_contrast_cap,
    infeasible_budget,
    syntax_error,
    shape_error,
    dimension_mismatch,
    group_misaligned,
    missing_calibration,
    missing_placeholder,
    generator_failure,
    unparseable_candidate,
    search_exhausted,
    config_invalid,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

} // namespace autoprune
