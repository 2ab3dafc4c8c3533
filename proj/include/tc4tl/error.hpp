#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace tc4tl {

enum class Errc {
  // event files / key files
  MalformedHeader,
  UnknownChannelTag,
  ArityMismatch,
  NoBluetoothSamples,
  MalformedLine,
  InvalidDistanceForGrain,
  DuplicateFileId,
  InvalidDataset,
  // calibration
  EmptyGrain,
  DegenerateGrid,
  // model training
  EmptyTrainingSet,
  ShapeMismatch,
  NonFiniteLoss,
  SingleClassTraining,
  SingleClassValidation,
  EmptyGrid,
  TaskMismatch,
  // scoring
  NoPositives,
  NoNegatives,
  MissingPrediction,
  // synthesis
  InconsistentLabel,
  // persistence
  IoFailure,
  UnknownModelVersion,
};

inline const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedHeader: return "MalformedHeader";
    case Errc::UnknownChannelTag: return "UnknownChannelTag";
    case Errc::ArityMismatch: return "ArityMismatch";
    case Errc::NoBluetoothSamples: return "NoBluetoothSamples";
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::InvalidDistanceForGrain: return "InvalidDistanceForGrain";
    case Errc::DuplicateFileId: return "DuplicateFileId";
    case Errc::InvalidDataset: return "InvalidDataset";
    case Errc::EmptyGrain: return "EmptyGrain";
    case Errc::DegenerateGrid: return "DegenerateGrid";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::SingleClassTraining: return "SingleClassTraining";
    case Errc::SingleClassValidation: return "SingleClassValidation";
    case Errc::EmptyGrid: return "EmptyGrid";
    case Errc::TaskMismatch: return "TaskMismatch";
    case Errc::NoPositives: return "NoPositives";
    case Errc::NoNegatives: return "NoNegatives";
    case Errc::MissingPrediction: return "MissingPrediction";
    case Errc::InconsistentLabel: return "InconsistentLabel";
    case Errc::IoFailure: return "IoFailure";
    case Errc::UnknownModelVersion: return "UnknownModelVersion";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

// Process exit code classes used by the command-line tool:
// 0 success, 2 usage, 3 data error, 4 numeric failure.
inline int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::DegenerateGrid:
    case Errc::ShapeMismatch:
    case Errc::NonFiniteLoss:
    case Errc::NoPositives:
    case Errc::NoNegatives:
      return 4;
    default:
      return 3;
  }
}

}  // namespace tc4tl
