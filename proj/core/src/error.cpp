#include "ff/error.hpp"

#include <iostream>
#include <mutex>

namespace ff {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "E_ARG";
    case ErrorCode::Io: return "E_IO";
    case ErrorCode::Parse: return "E_PARSE";
    case ErrorCode::NonFinite: return "E_NONFINITE";
    case ErrorCode::ShapeMismatch: return "E_SHAPE";
    case ErrorCode::Segmentation: return "E_SEGMENT";
    case ErrorCode::Weights: return "E_WEIGHTS";
    case ErrorCode::UnknownLabel: return "E_LABEL";
    case ErrorCode::Divergence: return "E_DIVERGED";
    case ErrorCode::StaleCache: return "E_STALE";
    case ErrorCode::MissingCheckpoint: return "E_CHECKPOINT";
    case ErrorCode::Stage: return "E_STAGE";
  }
  return "E_UNKNOWN";
}

namespace {
std::mutex g_warn_mutex;
WarningHandler& handler_slot() {
  static WarningHandler handler = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return handler;
}
}  // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_warn_mutex);
  handler_slot() = std::move(handler);
}

void warn(std::string_view message) {
  std::lock_guard lock(g_warn_mutex);
  if (handler_slot()) handler_slot()(message);
}

}  // namespace ff
