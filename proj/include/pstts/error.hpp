#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pstts {

enum class ErrorCode {
  invalid_input,
  unknown_phoneme,
  unknown_vowel,
  rate_mismatch,
  division_degenerate,
  degenerate_embedding,
  degenerate_series,
  alignment_infeasible,
  band_infeasible,
  fixture_miss,
  provider_error,
  io_error,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::unknown_phoneme: return "unknown-phoneme";
    case ErrorCode::unknown_vowel: return "unknown-vowel";
    case ErrorCode::rate_mismatch: return "rate-mismatch";
    case ErrorCode::division_degenerate: return "division-degenerate";
    case ErrorCode::degenerate_embedding: return "degenerate-embedding";
    case ErrorCode::degenerate_series: return "degenerate-series";
    case ErrorCode::alignment_infeasible: return "alignment-infeasible";
    case ErrorCode::band_infeasible: return "band-infeasible";
    case ErrorCode::fixture_miss: return "fixture-miss";
    case ErrorCode::provider_error: return "provider-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

/// Base exception for every library failure. The code drives CLI exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A provider call failed while evaluating a particular candidate.
class ProviderError : public Error {
 public:
  ProviderError(std::size_t candidate_index, ErrorCode cause, const std::string& message)
      : Error(ErrorCode::provider_error,
              "candidate " + std::to_string(candidate_index) + ": " + message),
        candidate_index_(candidate_index),
        cause_(cause) {}

  std::size_t candidate_index() const noexcept { return candidate_index_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::size_t candidate_index_;
  ErrorCode cause_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::invalid_input, message);
}

/// Process exit status: 0 success, 2 invalid input/config, 3 fixture miss,
/// 4 algorithmic infeasibility, 5 internal error.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::fixture_miss: return 3;
    case ErrorCode::alignment_infeasible:
    case ErrorCode::band_infeasible: return 4;
    case ErrorCode::provider_error: return 5;
    default: return 2;
  }
}

inline int exit_code_for(const Error& err) {
  if (const auto* p = dynamic_cast<const ProviderError*>(&err)) return exit_code_for(p->cause());
  return exit_code_for(err.code());
}

}  // namespace pstts
