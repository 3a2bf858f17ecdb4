#include "adscreen/error.hpp"

namespace adscreen {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::NoParticipantSpeech: return "NoParticipantSpeech";
    case ErrorKind::MissingLabel: return "MissingLabel";
    case ErrorKind::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::UncalibratedModel: return "UncalibratedModel";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::TooFewGroups: return "TooFewGroups";
    case ErrorKind::DataFormat: return "DataFormat";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Config: return "Config";
    case ErrorKind::UnsupportedCombination: return "UnsupportedCombination";
    case ErrorKind::Invariant: return "Invariant";
  }
  return "Unknown";
}

ErrorClass classify(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::UnsupportedCombination:
      return ErrorClass::Usage;
    case ErrorKind::Invariant:
      return ErrorClass::Internal;
    default:
      return ErrorClass::Data;
  }
}

}  // namespace adscreen
