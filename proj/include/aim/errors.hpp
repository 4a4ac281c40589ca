#pragma once

#include <stdexcept>
#include <string>

namespace aim {

// Base class for all library errors. Messages carry enough position
// information (conversation id, turn index) to locate bad input.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ParseError : Error {
  using Error::Error;
};

struct FeatureDimMismatch : ParseError {
  FeatureDimMismatch(const std::string& conv, int turn, int expected, int got)
      : ParseError("feature dim mismatch in conversation '" + conv + "' turn " +
                   std::to_string(turn) + ": expected " + std::to_string(expected) +
                   " values, got " + std::to_string(got)),
        conversation(conv), turn_index(turn) {}
  std::string conversation;
  int turn_index;
};

struct AlternationViolation : ParseError {
  AlternationViolation(const std::string& conv, int index)
      : ParseError("speaker alternation violated in conversation '" + conv +
                   "' at turn " + std::to_string(index)),
        conversation(conv), turn_index(index) {}
  std::string conversation;
  int turn_index;
};

struct NonFiniteFeature : ParseError {
  NonFiniteFeature(const std::string& conv, int turn, int dim)
      : ParseError("non-finite feature in conversation '" + conv + "' turn " +
                   std::to_string(turn) + " dim " + std::to_string(dim)) {}
};

struct AlreadyNormalized : Error {
  AlreadyNormalized() : Error("corpus is already normalized") {}
};

struct ShapeError : Error {
  using Error::Error;
};

struct EmptyWindow : Error {
  EmptyWindow() : Error("attention window is empty") {}
};

struct EmptyConversation : Error {
  EmptyConversation() : Error("no therapist-turn probabilities to fuse") {}
};

struct TraceMismatch : Error {
  using Error::Error;
};

struct NonFiniteGradient : Error {
  explicit NonFiniteGradient(const std::string& where)
      : Error("non-finite gradient in " + where) {}
};

struct MissingLabel : Error {
  explicit MissingLabel(const std::string& conv)
      : Error("conversation '" + conv + "' has no label") {}
};

struct EmptyHistory : Error {
  EmptyHistory() : Error("training history is empty") {}
};

struct EmptyEvalSet : Error {
  EmptyEvalSet() : Error("evaluation set is empty") {}
};

struct InvalidFoldCount : Error {
  explicit InvalidFoldCount(int k)
      : Error("invalid fold count " + std::to_string(k) + " (need k >= 2)") {}
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace aim
