#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adscreen {

enum class ErrorKind {
  // data errors
  MalformedHeader,
  NoParticipantSpeech,
  MissingLabel,
  EmptyVocabulary,
  SingleClass,
  NonFinite,
  UncalibratedModel,
  DimensionMismatch,
  UnknownId,
  EmptySequence,
  TooFewGroups,
  DataFormat,
  Io,
  // usage errors
  Config,
  UnsupportedCombination,
  // everything else
  Invariant,
};

std::string_view to_string(ErrorKind kind);

/// Usage errors map to CLI exit code 2, invariant violations to 70 and
/// everything else to 3.
enum class ErrorClass { Usage, Data, Internal };
ErrorClass classify(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace adscreen
