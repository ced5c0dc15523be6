#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vfscan {

enum class ErrorCode {
  InvalidArgument,
  MalformedDiff,
  CorpusFormat,
  TooFewProjects,
  MissingTimestamp,
  NoPositives,
  EmptyCommit,
  InvalidSetting,
  BackendUnavailable,
  DimensionMismatch,
  EmptySequence,
  ArityMismatch,
  EmptySplit,
  NoVulnFixInTrain,
  DegenerateTraining,
  SingleClass,
  EmptyList,
  DegenerateOptimal,
  DegenerateInput,
  CheckpointFormat,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedDiff: return "MalformedDiff";
    case ErrorCode::CorpusFormat: return "CorpusFormat";
    case ErrorCode::TooFewProjects: return "TooFewProjects";
    case ErrorCode::MissingTimestamp: return "MissingTimestamp";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::EmptyCommit: return "EmptyCommit";
    case ErrorCode::InvalidSetting: return "InvalidSetting";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::NoVulnFixInTrain: return "NoVulnFixInTrain";
    case ErrorCode::DegenerateTraining: return "DegenerateTraining";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::DegenerateOptimal: return "DegenerateOptimal";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::CheckpointFormat: return "CheckpointFormat";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace vfscan
