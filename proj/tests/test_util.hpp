#pragma once

#include <string>

#include "aim/data.hpp"
#include "aim/model.hpp"
#include "aim/rng.hpp"

namespace testutil {

// Alternating conversation starting with the client, random features.
inline aim::Conversation random_conversation(aim::Rng& rng, int n_turns, int dim,
                                             const std::string& id = "c", int label = 1) {
  aim::Conversation conv;
  conv.id = id;
  conv.label = label;
  for (int i = 1; i <= n_turns; ++i) {
    aim::Turn t;
    t.index = i;
    t.speaker = i % 2 == 1 ? aim::Speaker::Client : aim::Speaker::Therapist;
    t.features.resize(static_cast<std::size_t>(dim));
    for (double& f : t.features) f = rng.normal();
    conv.turns.push_back(std::move(t));
  }
  return conv;
}

inline aim::ModelConfig tiny_config(aim::Variant variant, int dim = 3, int hidden = 2,
                                    int proj = 2, int window = 2, double lambda = 0.2) {
  aim::ModelConfig cfg;
  cfg.variant = variant;
  cfg.feature_dim = dim;
  cfg.hidden = hidden;
  cfg.proj = proj;
  cfg.window = window;
  cfg.lambda = lambda;
  return cfg;
}

}  // namespace testutil
