#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aim/data.hpp"

namespace aim {

enum class InfluenceMode { Interpersonal, Intrapersonal, Mixed, None };

std::string influence_mode_name(InfluenceMode m);
InfluenceMode parse_influence_mode(const std::string& name);  // throws ConfigError

struct SynthConfig {
  int n_conversations = 80;
  int turns_min = 12;
  int turns_max = 20;
  int feature_dim = 16;
  InfluenceMode mode = InfluenceMode::Mixed;
  int lag = 3;
  double signal_strength = 0.8;
  double label_balance = 0.5;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

// One planted signal site, for test oracles: which turn of which
// conversation was biased and with which carrier sign.
struct PlantedTurn {
  std::size_t conversation = 0;  // index into corpus.conversations
  int turn_index = 0;            // 1-based
  double sign = 1.0;
};

struct SynthInfo {
  std::vector<int> carrier_dims;  // sign-balanced spike dimensions
  std::vector<int> payload_dims;  // aligned payload dimensions
  double bias_magnitude = 0.0;    // per-dimension |bias| = strength * base
  std::vector<PlantedTurn> client_sites;     // class-dependent client plants
  std::vector<PlantedTurn> therapist_sites;  // class-dependent therapist plants
  std::vector<PlantedTurn> decoy_sites;      // label-independent confounders
};

// Alternating client/therapist conversations with standard-normal features.
//
// High-empathy conversations mark every other therapist turn as an "event"
// (random parity). For each event the farthest in-window historical turn of
// the influencing speaker receives a spike: sign-balanced values on the
// carrier dimensions (so per-speaker means stay near zero and the signal
// survives z-normalization) plus an aligned positive shift on the payload
// dimensions. Influence windows of size >= lag therefore almost always
// contain a spike, shorter windows only half the time.
//   interpersonal  - spikes on client turns; label-independent decoy spikes
//                    (scrambled payload) land on other client turns so very
//                    long windows pick up confounding history
//   intrapersonal  - spikes on therapist turns
//   mixed          - both (therapist spikes carry no payload), plus a weak
//                    unsigned payload shift on the event turns themselves,
//                    the only directly-readable channel in the target turn
//   none           - no history structure; high-empathy conversations get an
//                    unsigned shift on most therapist turns (signal entirely
//                    in the target turn)
Corpus generate(const SynthConfig& cfg);
std::pair<Corpus, SynthInfo> generate_with_info(const SynthConfig& cfg);

// Generator constants (exposed for tests).
inline constexpr int kSynthSubspace = 8;           // carrier + payload dims
inline constexpr double kSynthBiasBase = 4.0;      // |spike| at strength 1
inline constexpr double kSynthEventRateNone = 0.7;
inline constexpr double kSynthMixedOffset = 0.25;  // unsigned event-turn shift, mixed mode
inline constexpr double kSynthDecoyRate = 0.25;    // client decoys, interpersonal/mixed
inline constexpr double kSynthPayloadScale = 1.25; // payload |shift| relative to the carrier
inline constexpr double kSynthMixedIntraScale = 0.5;  // carrier scale of therapist plants in mixed mode

}  // namespace aim
