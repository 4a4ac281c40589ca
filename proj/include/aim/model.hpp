#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "aim/data.hpp"
#include "aim/nn.hpp"

namespace aim {

enum class Variant { AIM, IM, AIM_T, AIM_C, AIM_CONCAT };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);  // throws ConfigError

// Two readings of the same-speaker influence window for AIM_T / AIM_C:
// the K most recent turns of that speaker (default), or that speaker's
// turns within the last K turns.
enum class SpeakerWindowMode { KMostRecent, WithinLastK };

struct ModelConfig {
  Variant variant = Variant::AIM;
  int feature_dim = 88;
  int hidden = 64;
  int proj = 32;
  int window = 3;       // K
  double lambda = 0.2;  // influence scale
  SpeakerWindowMode window_mode = SpeakerWindowMode::KMostRecent;

  bool uses_attention() const { return variant != Variant::IM; }
  // Dimension of the refined representation fed to the output layer.
  int rep_dim() const { return variant == Variant::AIM_CONCAT ? 2 * hidden : hidden; }
  void validate() const;  // throws ConfigError
};

struct ModelParams {
  GruParams gru;  // shared across both speakers
  Mat w_x;        // P x H projection, no bias
  Mat w_o;        // 1 x rep_dim output weights
  double b_o = 0.0;

  ModelParams() = default;
  explicit ModelParams(const ModelConfig& cfg);
  void fill(double v);
};

// Tensors in declared (checkpoint) order: gru.*, proj.w_x, out.w_o, out.b_o.
std::vector<TensorRef> model_tensors(ModelParams& p);

// Glorot-uniform weights, zero biases, fully determined by seed.
ModelParams init_params(std::uint64_t seed, const ModelConfig& cfg);

struct EncodeResult {
  std::vector<Vec> h;               // h[t] for t = 0..N-1 (turn t+1)
  std::vector<GruCellCache> cache;  // per-turn cell caches for backprop
};

// One GRU chain over all turns of both speakers, h_0 = 0. The conversation
// model re-encodes a short context per target turn (see forward_conversation);
// this whole-sequence encoder is the building block and is exposed for
// inspection tooling.
EncodeResult encode(const Conversation& conv, const ModelParams& params);

// Historical turn indices (1-based, chronological) attended from therapist
// turn i. Empty for IM and at the conversation start.
std::vector<int> influence_window(int i, const ModelConfig& cfg, const Conversation& conv);

struct AttendResult {
  Vec scores;  // raw dot products, window order
  Vec alpha;   // softmax weights
  Vec v;       // influence embedding, weighted sum of window h
};

// Dot-product attention: u_j = tanh(W_x h_j), scores u_j . u_i, weighted
// sum of the window's GRU outputs. Throws EmptyWindow on an empty window.
AttendResult attend(int i, const std::vector<int>& window, const std::vector<Vec>& h,
                    const ModelParams& params);

// (1-lambda) h + lambda v for the scaled variants, [h ; v] for AIM_concat,
// plain h for IM. A missing v is treated as the zero vector.
Vec refine(const Vec& h_i, const std::optional<Vec>& v, const ModelConfig& cfg);

double turn_probability(const Vec& rep, const ModelParams& params);

// Median of therapist-turn probabilities; even counts average the two
// middle order statistics. Throws EmptyConversation on empty input.
double median_fuse(const Vec& probs);

// Positions (into the fused sequence) receiving gradient, with weights:
// the median element, or both middle elements at 0.5 for even counts.
std::vector<std::pair<std::size_t, double>> median_fuse_backward(const Vec& probs);

// Context turns encoded for one therapist turn: the window plus everything
// between it and the target, ending at the target itself. Every variant
// encodes the same span for a given window size, so IM and AIM at lambda=0
// agree bit for bit.
std::vector<int> encoding_context(int i, const ModelConfig& cfg, const Conversation& conv);

struct TherapistTurnRecord {
  int turn_index = 0;         // 1-based conversation index
  std::vector<int> context;   // encoded turns, chronological, ends with turn_index
  std::vector<int> window;    // attended subset of context, possibly empty
  std::vector<GruCellCache> cache;  // one per context turn
  std::vector<Vec> h;         // chain states per context turn
  std::vector<Vec> u;         // projections (window keys + query); empty for IM
  Vec scores;
  Vec alpha;                  // sums to 1 when window non-empty
  Vec v;                      // zero vector when window empty
  Vec rep;
  double logit = 0.0;
  double y = 0.0;
};

struct ForwardTrace {
  ModelConfig config;
  std::size_t num_turns = 0;
  std::vector<TherapistTurnRecord> therapist;
  double y_est = 0.0;
};

// Per therapist turn: encode the influence context with a fresh GRU chain
// (h_0 = 0 at the context start), attend over the window states, refine and
// score, then median-fuse the per-turn probabilities.
std::pair<double, ForwardTrace> forward_conversation(const Conversation& conv,
                                                     const ModelParams& params,
                                                     const ModelConfig& cfg);

// Reverse-mode of forward_conversation: routes dL/dy_est through median
// fusion, the output layer, attention (both alpha and h paths) and each
// context chain. Throws TraceMismatch if the trace does not match.
ModelParams backward_conversation(const ForwardTrace& trace, const Conversation& conv,
                                  const ModelParams& params, const ModelConfig& cfg,
                                  double d_y_est);

// Line-oriented diagnostic dump: per therapist turn the window, attention
// weights and probability, then the fused estimate.
void dump_trace(const ForwardTrace& trace, std::ostream& out);

// Self-describing text checkpoint; doubles are written as hex floats so a
// save/load round trip is bit-exact.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& cfg, std::uint64_t seed);
struct Checkpoint {
  ModelParams params;
  ModelConfig config;
  std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace aim
