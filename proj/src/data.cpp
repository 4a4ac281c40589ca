#include "aim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aim/errors.hpp"

namespace aim {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Splits "f1,f2,...,fD"; throws on anything that is not a finite float.
Vec parse_feature_row(const std::string& text, const std::string& conv_id, int turn_index) {
  Vec out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t consumed = 0;
    double value = 0.0;
    try {
      value = std::stod(tok, &consumed);
    } catch (const std::exception&) {
      throw ParseError("conversation '" + conv_id + "' turn " + std::to_string(turn_index) +
                       ": bad feature value '" + tok + "'");
    }
    while (consumed < tok.size() && std::isspace(static_cast<unsigned char>(tok[consumed]))) ++consumed;
    if (consumed != tok.size()) {
      throw ParseError("conversation '" + conv_id + "' turn " + std::to_string(turn_index) +
                       ": trailing junk in feature value '" + tok + "'");
    }
    out.push_back(value);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

NormStats speaker_stats(const std::vector<const Turn*>& turns, int dim) {
  NormStats st;
  st.mean.assign(dim, 0.0);
  st.std.assign(dim, 0.0);
  const double n = static_cast<double>(turns.size());
  for (const Turn* t : turns) {
    for (int d = 0; d < dim; ++d) st.mean[d] += t->features[d];
  }
  for (int d = 0; d < dim; ++d) st.mean[d] /= n;
  for (const Turn* t : turns) {
    for (int d = 0; d < dim; ++d) {
      const double delta = t->features[d] - st.mean[d];
      st.std[d] += delta * delta;
    }
  }
  for (int d = 0; d < dim; ++d) st.std[d] = std::sqrt(st.std[d] / n);  // population std
  return st;
}

}  // namespace

std::vector<int> Conversation::therapist_turns() const {
  std::vector<int> idx;
  for (const Turn& t : turns) {
    if (t.speaker == Speaker::Therapist) idx.push_back(t.index);
  }
  return idx;
}

void validate_conversation(const Conversation& conv, int feature_dim) {
  if (conv.turns.empty()) {
    throw ParseError("conversation '" + conv.id + "' has no turns");
  }
  bool has_therapist = false;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const Turn& t = conv.turns[i];
    if (t.index != static_cast<int>(i) + 1) {
      throw ParseError("conversation '" + conv.id + "': turn indices not contiguous at position " +
                       std::to_string(i + 1));
    }
    if (static_cast<int>(t.features.size()) != feature_dim) {
      throw FeatureDimMismatch(conv.id, t.index, feature_dim,
                               static_cast<int>(t.features.size()));
    }
    for (int d = 0; d < feature_dim; ++d) {
      if (!std::isfinite(t.features[d])) throw NonFiniteFeature(conv.id, t.index, d);
    }
    if (i > 0 && conv.turns[i - 1].speaker == t.speaker) {
      throw AlternationViolation(conv.id, t.index);
    }
    if (t.speaker == Speaker::Therapist) has_therapist = true;
  }
  if (!has_therapist) {
    throw ParseError("conversation '" + conv.id + "' has no therapist turn");
  }
}

Corpus parse_corpus(std::istream& in, int feature_dim, const std::string& source_name) {
  Corpus corpus;
  corpus.feature_dim = feature_dim;

  std::string line;
  int line_no = 0;
  Conversation current;
  bool in_block = false;
  int declared_dim = 0;

  auto positional = [&](const std::string& msg) {
    return ParseError(source_name + ":" + std::to_string(line_no) + ": " + msg);
  };

  auto finish_block = [&]() {
    if (!in_block) return;
    validate_conversation(current, corpus.feature_dim);
    for (const Conversation& c : corpus.conversations) {
      if (c.id == current.id) {
        throw ParseError("duplicate conversation id '" + current.id + "'");
      }
    }
    corpus.conversations.push_back(std::move(current));
    current = Conversation{};
    in_block = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    if (line.rfind("#conv", 0) == 0) {
      finish_block();
      std::istringstream head(line);
      std::string tag, id, label_tok;
      head >> tag >> id >> label_tok >> declared_dim;
      if (head.fail() || id.empty()) {
        throw positional("malformed header '" + line + "'");
      }
      if (declared_dim <= 0) throw positional("declared feature dim must be positive");
      if (corpus.feature_dim == 0) corpus.feature_dim = declared_dim;
      if (declared_dim != corpus.feature_dim) {
        throw positional("conversation '" + id + "' declares D=" + std::to_string(declared_dim) +
                         " but corpus uses D=" + std::to_string(corpus.feature_dim));
      }
      current.id = id;
      if (label_tok == "?") {
        current.label.reset();
      } else if (label_tok == "0" || label_tok == "1") {
        current.label = label_tok == "1" ? 1 : 0;
      } else {
        throw positional("label must be 0, 1 or ?, got '" + label_tok + "'");
      }
      in_block = true;
      continue;
    }
    if (!in_block) throw positional("turn row before any #conv header");

    std::size_t sep = line.find_first_of(" \t");
    if (sep == std::string::npos) throw positional("missing feature values");
    std::string tag = line.substr(0, sep);
    std::size_t value_start = line.find_first_not_of(" \t", sep);
    if (value_start == std::string::npos) throw positional("missing feature values");

    Turn turn;
    if (tag == "T") {
      turn.speaker = Speaker::Therapist;
    } else if (tag == "C") {
      turn.speaker = Speaker::Client;
    } else {
      throw positional("unknown speaker tag '" + tag + "' in conversation '" + current.id + "'");
    }
    turn.index = static_cast<int>(current.turns.size()) + 1;
    turn.features = parse_feature_row(line.substr(value_start), current.id, turn.index);
    if (static_cast<int>(turn.features.size()) != corpus.feature_dim) {
      throw FeatureDimMismatch(current.id, turn.index, corpus.feature_dim,
                               static_cast<int>(turn.features.size()));
    }
    for (int d = 0; d < corpus.feature_dim; ++d) {
      if (!std::isfinite(turn.features[d])) throw NonFiniteFeature(current.id, turn.index, d);
    }
    // Catch alternation early so the reported index is the offending row.
    if (!current.turns.empty() && current.turns.back().speaker == turn.speaker) {
      throw AlternationViolation(current.id, turn.index);
    }
    current.turns.push_back(std::move(turn));
  }
  finish_block();
  return corpus;
}

Corpus parse_corpus_file(const std::string& path, int feature_dim) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_corpus(in, feature_dim, path);
}

Corpus parse_corpus_dir(const std::string& dir, int feature_dim) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ParseError("'" + dir + "' is not a directory");
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file()) paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());  // directory order is not deterministic
  if (paths.empty()) throw ParseError("directory '" + dir + "' contains no corpus files");

  Corpus corpus;
  corpus.feature_dim = feature_dim;
  for (const std::string& p : paths) {
    Corpus part = parse_corpus_file(p, corpus.feature_dim);
    corpus.feature_dim = part.feature_dim;
    for (Conversation& c : part.conversations) {
      for (const Conversation& existing : corpus.conversations) {
        if (existing.id == c.id) throw ParseError("duplicate conversation id '" + c.id + "'");
      }
      corpus.conversations.push_back(std::move(c));
    }
  }
  return corpus;
}

void serialize_conversation(const Conversation& conv, int feature_dim, std::ostream& out) {
  out << "#conv " << conv.id << ' ' << (conv.label ? std::to_string(*conv.label) : "?") << ' '
      << feature_dim << '\n';
  for (const Turn& t : conv.turns) {
    out << speaker_tag(t.speaker) << '\t';
    for (std::size_t d = 0; d < t.features.size(); ++d) {
      if (d > 0) out << ',';
      out << format_double(t.features[d]);
    }
    out << '\n';
  }
}

std::string conversation_to_string(const Conversation& conv, int feature_dim) {
  std::ostringstream oss;
  serialize_conversation(conv, feature_dim, oss);
  return oss.str();
}

Corpus zscore_normalize(const Corpus& corpus, NormScope scope) {
  if (corpus.normalized) throw AlreadyNormalized();

  Corpus out = corpus;
  out.normalized = true;
  const int dim = corpus.feature_dim;

  if (scope == NormScope::CorpusPooled) {
    for (Speaker sp : {Speaker::Therapist, Speaker::Client}) {
      std::vector<const Turn*> turns;
      for (const Conversation& c : corpus.conversations) {
        for (const Turn& t : c.turns) {
          if (t.speaker == sp) turns.push_back(&t);
        }
      }
      if (turns.empty()) continue;
      const NormStats st = speaker_stats(turns, dim);
      for (Conversation& c : out.conversations) {
        bool present = false;
        for (Turn& t : c.turns) {
          if (t.speaker != sp) continue;
          present = true;
          for (int d = 0; d < dim; ++d) {
            t.features[d] = (t.features[d] - st.mean[d]) / std::max(st.std[d], kNormEps);
          }
        }
        if (present) out.normalization_state[{c.id, speaker_tag(sp)}] = st;
      }
    }
    return out;
  }

  for (Conversation& c : out.conversations) {
    for (Speaker sp : {Speaker::Therapist, Speaker::Client}) {
      std::vector<const Turn*> turns;
      for (const Turn& t : c.turns) {
        if (t.speaker == sp) turns.push_back(&t);
      }
      if (turns.empty()) continue;
      const NormStats st = speaker_stats(turns, dim);
      for (Turn& t : c.turns) {
        if (t.speaker != sp) continue;
        for (int d = 0; d < dim; ++d) {
          t.features[d] = (t.features[d] - st.mean[d]) / std::max(st.std[d], kNormEps);
        }
      }
      out.normalization_state[{c.id, speaker_tag(sp)}] = st;
    }
  }
  return out;
}

}  // namespace aim
