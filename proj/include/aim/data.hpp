#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aim/linalg.hpp"

namespace aim {

enum class Speaker { Therapist, Client };

inline char speaker_tag(Speaker s) { return s == Speaker::Therapist ? 'T' : 'C'; }

// One speaker turn: who spoke, the acoustic feature vector summarizing the
// turn, and its 1-based position in the conversation.
struct Turn {
  Speaker speaker = Speaker::Client;
  Vec features;
  int index = 0;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;
  std::optional<int> label;  // 1 = high empathy, 0 = low empathy

  int num_turns() const { return static_cast<int>(turns.size()); }
  std::vector<int> therapist_turns() const;  // 1-based indices, ascending
};

// Per-(conversation, speaker) normalization statistics actually applied.
struct NormStats {
  Vec mean;
  Vec std;
};

struct Corpus {
  std::vector<Conversation> conversations;
  int feature_dim = 0;
  bool normalized = false;
  // keyed by (conversation id, speaker tag); recorded iff normalized
  std::map<std::pair<std::string, char>, NormStats> normalization_state;

  std::size_t size() const { return conversations.size(); }
};

enum class NormScope {
  // Statistics per speaker within each conversation (default; self-contained,
  // no cross-conversation leakage).
  Conversation,
  // Statistics per speaker role pooled over the whole corpus.
  CorpusPooled,
};

// Corpus file format, one conversation per block:
//   #conv <id> <label|?> <D>
//   <T|C>\t<f1>,<f2>,...,<fD>
// A stream may hold several blocks; a directory of such files is a corpus.
Corpus parse_corpus(std::istream& in, int feature_dim, const std::string& source_name = "<stream>");
Corpus parse_corpus_file(const std::string& path, int feature_dim);
Corpus parse_corpus_dir(const std::string& dir, int feature_dim);

void serialize_conversation(const Conversation& conv, int feature_dim, std::ostream& out);
std::string conversation_to_string(const Conversation& conv, int feature_dim);

// Validates alternation, contiguous 1..N indices, dimension and finiteness.
// Used by the parser and by the synthetic generator.
void validate_conversation(const Conversation& conv, int feature_dim);

// Speaker-dependent z-normalization: per dimension, x -> (x - mu) / max(sigma, eps)
// with population sigma. Throws AlreadyNormalized on a second application.
constexpr double kNormEps = 1e-8;
Corpus zscore_normalize(const Corpus& corpus, NormScope scope = NormScope::Conversation);

}  // namespace aim
