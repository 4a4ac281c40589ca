#include "aim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "aim/errors.hpp"
#include "aim/rng.hpp"

namespace aim {

namespace {

constexpr std::uint64_t kLabelStream = 0x4c41424c;

bool is_client(int index) { return index % 2 == 1; }  // turn 1 is the client

// Farthest turn of the wanted speaker in [i - lag, i - 1], or 0 if none.
int farthest_in_window(int i, int lag, bool want_client) {
  for (int j = std::max(1, i - lag); j < i; ++j) {
    if (is_client(j) == want_client) return j;
  }
  return 0;
}

// Balanced +-1 multiset, shuffled; an odd leftover gets a random sign.
std::vector<double> balanced_signs(std::size_t n, Rng& rng) {
  std::vector<double> signs;
  signs.reserve(n);
  for (std::size_t i = 0; i < n / 2; ++i) signs.push_back(1.0);
  for (std::size_t i = 0; i < n / 2; ++i) signs.push_back(-1.0);
  if (n % 2 == 1) signs.push_back(rng.bernoulli(0.5) ? 1.0 : -1.0);
  rng.shuffle(signs);
  return signs;
}

}  // namespace

std::string influence_mode_name(InfluenceMode m) {
  switch (m) {
    case InfluenceMode::Interpersonal: return "interpersonal";
    case InfluenceMode::Intrapersonal: return "intrapersonal";
    case InfluenceMode::Mixed: return "mixed";
    case InfluenceMode::None: return "none";
  }
  return "?";
}

InfluenceMode parse_influence_mode(const std::string& name) {
  if (name == "interpersonal") return InfluenceMode::Interpersonal;
  if (name == "intrapersonal") return InfluenceMode::Intrapersonal;
  if (name == "mixed") return InfluenceMode::Mixed;
  if (name == "none") return InfluenceMode::None;
  throw ConfigError("unknown influence mode '" + name + "'");
}

void SynthConfig::validate() const {
  if (n_conversations < 2) throw ConfigError("need at least 2 conversations");
  if (turns_min < 2 || turns_max < turns_min) throw ConfigError("bad turns range");
  if (feature_dim < 1) throw ConfigError("feature dim must be positive");
  if (lag < 1) throw ConfigError("lag must be >= 1");
  if (signal_strength < 0.0 || signal_strength > 1.0) {
    throw ConfigError("signal strength must lie in [0, 1]");
  }
  if (label_balance < 0.0 || label_balance > 1.0) {
    throw ConfigError("label balance must lie in [0, 1]");
  }
}

Corpus generate(const SynthConfig& cfg) { return generate_with_info(cfg).first; }

std::pair<Corpus, SynthInfo> generate_with_info(const SynthConfig& cfg) {
  cfg.validate();

  Corpus corpus;
  corpus.feature_dim = cfg.feature_dim;

  SynthInfo info;
  const int subspace = std::min(kSynthSubspace, cfg.feature_dim);
  const int payload_count = std::max(1, (subspace + 1) / 3);
  const int carrier_count = std::max(1, subspace - payload_count);
  for (int d = 0; d < carrier_count; ++d) info.carrier_dims.push_back(d);
  for (int d = carrier_count; d < carrier_count + payload_count && d < cfg.feature_dim; ++d) {
    info.payload_dims.push_back(d);
  }
  const double bias = cfg.signal_strength * kSynthBiasBase;
  info.bias_magnitude = bias;

  // exact label counts, assignment shuffled by the label stream
  const int n = cfg.n_conversations;
  const int n_high = static_cast<int>(std::llround(cfg.label_balance * n));
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  {
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng label_rng(mix_seed(cfg.seed, kLabelStream));
    label_rng.shuffle(order);
    for (int i = 0; i < n_high; ++i) labels[order[static_cast<std::size_t>(i)]] = 1;
  }

  for (int c = 0; c < n; ++c) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(c) + 1));

    Conversation conv;
    char id[32];
    // four sessions per dyad, mirroring typical counseling corpora
    std::snprintf(id, sizeof(id), "d%04d_%d", c / 4, c % 4);
    conv.id = id;
    conv.label = labels[static_cast<std::size_t>(c)];

    const int n_turns =
        cfg.turns_min +
        static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.turns_max - cfg.turns_min + 1)));
    conv.turns.reserve(static_cast<std::size_t>(n_turns));
    for (int j = 1; j <= n_turns; ++j) {
      Turn turn;
      turn.speaker = is_client(j) ? Speaker::Client : Speaker::Therapist;
      turn.index = j;
      turn.features.resize(static_cast<std::size_t>(cfg.feature_dim));
      for (int d = 0; d < cfg.feature_dim; ++d) {
        turn.features[static_cast<std::size_t>(d)] = rng.normal();
      }
      conv.turns.push_back(std::move(turn));
    }

    auto add_to = [&](int turn_index, const std::vector<int>& dims, double amount) {
      for (int d : dims) {
        conv.turns[static_cast<std::size_t>(turn_index - 1)].features[static_cast<std::size_t>(d)] +=
            amount;
      }
    };

    std::vector<int> therapist_turns;
    for (int j = 2; j <= n_turns; j += 2) therapist_turns.push_back(j);
    const bool historical = cfg.mode != InfluenceMode::None;
    std::vector<bool> taken(static_cast<std::size_t>(n_turns) + 1, false);

    if (cfg.signal_strength > 0.0 && !therapist_turns.empty()) {
      if (!historical) {
        if (*conv.label == 1) {
          // unsigned shift on most therapist turns; at least one stays clean
          // so per-speaker normalization cannot absorb it as a constant
          int n_shift = std::max(
              1, static_cast<int>(std::llround(kSynthEventRateNone *
                                               static_cast<double>(therapist_turns.size()))));
          if (therapist_turns.size() > 1) {
            n_shift = std::min(n_shift, static_cast<int>(therapist_turns.size()) - 1);
          }
          std::vector<int> pool = therapist_turns;
          rng.shuffle(pool);
          std::vector<int> shifted(pool.begin(), pool.begin() + n_shift);
          std::sort(shifted.begin(), shifted.end());
          for (int t : shifted) {
            add_to(t, info.carrier_dims, bias);
            add_to(t, info.payload_dims, bias);
            info.therapist_sites.push_back({static_cast<std::size_t>(c), t, 1.0});
          }
        }
      } else if (*conv.label == 1) {
        // every other therapist turn is an event (random parity), so windows
        // reaching back `lag` turns nearly always contain a spike while a
        // one-turn window does only half the time
        std::vector<int> events;
        const std::size_t parity = rng.below(2);
        for (std::size_t k = parity; k < therapist_turns.size(); k += 2) {
          events.push_back(therapist_turns[k]);
        }
        if (events.empty()) events.push_back(therapist_turns.back());

        std::vector<int> client_targets;
        std::vector<int> therapist_targets;
        for (int e : events) {
          if (cfg.mode != InfluenceMode::Intrapersonal) {
            const int j = farthest_in_window(e, cfg.lag, true);
            if (j > 0 && !taken[static_cast<std::size_t>(j)]) {
              taken[static_cast<std::size_t>(j)] = true;
              client_targets.push_back(j);
            }
          }
          if (cfg.mode != InfluenceMode::Interpersonal) {
            const int j = farthest_in_window(e, cfg.lag, false);
            if (j > 0 && !taken[static_cast<std::size_t>(j)]) {
              taken[static_cast<std::size_t>(j)] = true;
              therapist_targets.push_back(j);
            }
          }
          if (cfg.mode == InfluenceMode::Mixed) {
            // weak directly-readable channel on the event turn itself
            add_to(e, info.payload_dims, kSynthMixedOffset * bias);
          }
        }

        const std::vector<double> client_signs = balanced_signs(client_targets.size(), rng);
        for (std::size_t k = 0; k < client_targets.size(); ++k) {
          add_to(client_targets[k], info.carrier_dims, client_signs[k] * bias);
          add_to(client_targets[k], info.payload_dims, kSynthPayloadScale * bias);
          info.client_sites.push_back(
              {static_cast<std::size_t>(c), client_targets[k], client_signs[k]});
        }
        const std::vector<double> therapist_signs = balanced_signs(therapist_targets.size(), rng);
        const double intra_carrier =
            cfg.mode == InfluenceMode::Mixed ? kSynthMixedIntraScale * bias : bias;
        for (std::size_t k = 0; k < therapist_targets.size(); ++k) {
          add_to(therapist_targets[k], info.carrier_dims, therapist_signs[k] * intra_carrier);
          if (cfg.mode == InfluenceMode::Intrapersonal) {
            add_to(therapist_targets[k], info.payload_dims, kSynthPayloadScale * bias);
          }
          info.therapist_sites.push_back(
              {static_cast<std::size_t>(c), therapist_targets[k], therapist_signs[k]});
        }
      }

      if (historical && cfg.mode != InfluenceMode::Intrapersonal) {
        // label-independent decoys: spike-like carriers with scrambled
        // payload; long windows pick these up in both classes
        for (int j = 1; j <= n_turns; j += 2) {
          if (taken[static_cast<std::size_t>(j)] || !rng.bernoulli(kSynthDecoyRate)) continue;
          const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
          add_to(j, info.carrier_dims, sign * bias);
          for (int d : info.payload_dims) {
            add_to(j, {d}, (rng.bernoulli(0.5) ? 1.0 : -1.0) * bias);
          }
          info.decoy_sites.push_back({static_cast<std::size_t>(c), j, sign});
        }
      }
    }

    validate_conversation(conv, cfg.feature_dim);
    corpus.conversations.push_back(std::move(conv));
  }

  return {std::move(corpus), std::move(info)};
}

}  // namespace aim
