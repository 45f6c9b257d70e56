#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace taxind {

enum class ErrorCode {
  // input / configuration
  ConfigError,
  ParseError,
  SchemaError,
  VocabularyError,
  DuplicateTerm,
  GoldInvalid,
  TermMismatch,
  MultipleRoots,
  CycleInGold,
  InvalidTaxonomy,
  NodeSetMismatch,
  MissingEmbedding,
  // provider
  MissingReplayEntry,
  TransportError,
  AuthError,
  DimensionMismatch,
  // solver
  Infeasible,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::VocabularyError: return "VocabularyError";
    case ErrorCode::DuplicateTerm: return "DuplicateTerm";
    case ErrorCode::GoldInvalid: return "GoldInvalid";
    case ErrorCode::TermMismatch: return "TermMismatch";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::CycleInGold: return "CycleInGold";
    case ErrorCode::InvalidTaxonomy: return "InvalidTaxonomy";
    case ErrorCode::NodeSetMismatch: return "NodeSetMismatch";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::MissingReplayEntry: return "MissingReplayEntry";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Infeasible: return "Infeasible";
  }
  return "Unknown";
}

/// Errors raised by provider access (chat/embedding/encyclopedia).
inline bool is_provider_error(ErrorCode code) {
  return code == ErrorCode::MissingReplayEntry || code == ErrorCode::TransportError ||
         code == ErrorCode::AuthError || code == ErrorCode::DimensionMismatch;
}

/// Structured-output failures; these are eligible for a single reprompt.
inline bool is_output_error(ErrorCode code) {
  return code == ErrorCode::ParseError || code == ErrorCode::SchemaError ||
         code == ErrorCode::VocabularyError;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace taxind
