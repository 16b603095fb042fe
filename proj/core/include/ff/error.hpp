#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ff {

/// Stable error categories. The CLI prints `code_name(code)` as a prefix so
/// scripts can match on it.
enum class ErrorCode {
  InvalidArgument,
  Io,
  Parse,
  NonFinite,
  ShapeMismatch,
  Segmentation,
  Weights,
  UnknownLabel,
  Divergence,
  StaleCache,
  MissingCheckpoint,
  Stage,
};

std::string_view code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

// Non-fatal diagnostics (excluded channels, zero-epoch training, ...).
using WarningHandler = std::function<void(std::string_view)>;
void set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace ff
