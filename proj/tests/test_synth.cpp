#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "aim/data.hpp"
#include "aim/errors.hpp"
#include "aim/eval.hpp"
#include "aim/synth.hpp"
#include "aim/train.hpp"
#include "test_util.hpp"

using namespace aim;

namespace {

std::string corpus_text(const Corpus& corpus) {
  std::ostringstream out;
  for (const Conversation& conv : corpus.conversations) {
    serialize_conversation(conv, corpus.feature_dim, out);
  }
  return out.str();
}

SynthConfig base_config(InfluenceMode mode, std::uint64_t seed, int n = 60) {
  SynthConfig cfg;
  cfg.n_conversations = n;
  cfg.mode = mode;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("generate: determinism, bit-identical corpora") {
  const SynthConfig cfg = base_config(InfluenceMode::Mixed, 77);
  const Corpus a = generate(cfg);
  const Corpus b = generate(cfg);
  CHECK(corpus_text(a) == corpus_text(b));
  CHECK(a.size() == 60);
}

TEST_CASE("generate: output passes every corpus invariant") {
  for (InfluenceMode mode : {InfluenceMode::Interpersonal, InfluenceMode::Intrapersonal,
                             InfluenceMode::Mixed, InfluenceMode::None}) {
    const Corpus corpus = generate(base_config(mode, 5, 30));
    std::set<std::string> ids;
    for (const Conversation& conv : corpus.conversations) {
      validate_conversation(conv, corpus.feature_dim);
      CHECK(ids.insert(conv.id).second);
      CHECK(conv.label.has_value());
    }
  }
}

TEST_CASE("generate: labels balanced per label_balance") {
  SynthConfig cfg = base_config(InfluenceMode::Mixed, 9, 50);
  cfg.label_balance = 0.5;
  const Corpus corpus = generate(cfg);
  int high = 0;
  for (const Conversation& conv : corpus.conversations) high += *conv.label;
  CHECK(high == 25);

  cfg.label_balance = 0.2;
  int high2 = 0;
  for (const Conversation& conv : generate(cfg).conversations) high2 += *conv.label;
  CHECK(high2 == 10);
}

TEST_CASE("generate: zero strength gives a label-independent feature distribution") {
  SynthConfig a = base_config(InfluenceMode::Mixed, 123, 20);
  a.signal_strength = 0.0;
  SynthConfig b = a;
  b.label_balance = 1.0;  // same seeds, different labels
  const Corpus ca = generate(a);
  const Corpus cb = generate(b);
  for (std::size_t c = 0; c < ca.size(); ++c) {
    REQUIRE(ca.conversations[c].turns.size() == cb.conversations[c].turns.size());
    for (std::size_t t = 0; t < ca.conversations[c].turns.size(); ++t) {
      CHECK(ca.conversations[c].turns[t].features == cb.conversations[c].turns[t].features);
    }
  }
}

TEST_CASE("generate: planted client bias is measurable at its sites") {
  SynthConfig cfg = base_config(InfluenceMode::Interpersonal, 31, 80);
  cfg.signal_strength = 1.0;
  const auto [corpus, info] = generate_with_info(cfg);
  REQUIRE(!info.client_sites.empty());
  CHECK(info.therapist_sites.empty());  // interpersonal mode never touches therapist turns
  CHECK(info.bias_magnitude == doctest::Approx(kSynthBiasBase));

  // sign-corrected sample mean over planted sites recovers the bias vector;
  // sites also hit by a decoy are skipped so only the planted shift remains
  std::set<std::pair<std::size_t, int>> decoyed;
  for (const PlantedTurn& site : info.decoy_sites) {
    decoyed.insert({site.conversation, site.turn_index});
  }
  double mean = 0.0;
  double outside = 0.0;
  std::size_t count = 0, outside_count = 0;
  for (const PlantedTurn& site : info.client_sites) {
    const Turn& turn = corpus.conversations[site.conversation].turns[site.turn_index - 1];
    CHECK(turn.speaker == Speaker::Client);
    if (decoyed.count({site.conversation, site.turn_index})) continue;
    for (int d : info.subspace) {
      mean += site.sign * turn.features[d];
      ++count;
    }
    for (int d = kSynthSubspace; d < cfg.feature_dim; ++d) {
      outside += site.sign * turn.features[d];
      ++outside_count;
    }
  }
  mean /= static_cast<double>(count);
  // noise is unit normal: the standard error at ~1000 site-dims is ~0.03
  CHECK(mean == doctest::Approx(kSynthBiasBase).epsilon(0.05));

  // dimensions outside the subspace stay unbiased
  outside /= static_cast<double>(outside_count);
  CHECK(std::fabs(outside) < 0.2);
}

TEST_CASE("generate: signs are balanced within each conversation") {
  SynthConfig cfg = base_config(InfluenceMode::Interpersonal, 41, 60);
  cfg.signal_strength = 1.0;
  const auto [corpus, info] = generate_with_info(cfg);
  std::map<std::size_t, double> sign_sum;
  std::map<std::size_t, int> site_count;
  for (const PlantedTurn& site : info.client_sites) {
    sign_sum[site.conversation] += site.sign;
    site_count[site.conversation] += 1;
  }
  for (const auto& [conv, sum] : sign_sum) {
    CHECK(std::fabs(sum) <= 1.0);  // at most the odd leftover
    CHECK(site_count[conv] >= 1);
  }
}

TEST_CASE("generate: interpersonal mode leaves therapist turns class-neutral") {
  SynthConfig cfg = base_config(InfluenceMode::Interpersonal, 51, 100);
  cfg.signal_strength = 1.0;
  const Corpus corpus = generate(cfg);

  // class-conditional means of therapist-turn features must agree within
  // sampling error (the bias never touches therapist turns)
  for (int d = 0; d < std::min(kSynthSubspace, cfg.feature_dim); ++d) {
    double mean1 = 0.0, mean0 = 0.0;
    std::size_t n1 = 0, n0 = 0;
    for (const Conversation& conv : corpus.conversations) {
      for (const Turn& t : conv.turns) {
        if (t.speaker != Speaker::Therapist) continue;
        if (*conv.label == 1) {
          mean1 += t.features[d];
          ++n1;
        } else {
          mean0 += t.features[d];
          ++n0;
        }
      }
    }
    mean1 /= static_cast<double>(n1);
    mean0 /= static_cast<double>(n0);
    const double se = std::sqrt(1.0 / n1 + 1.0 / n0);
    CHECK(std::fabs(mean1 - mean0) < 5.0 * se);
  }
}

TEST_CASE("generate: intrapersonal sites sit on therapist turns within the lag") {
  SynthConfig cfg = base_config(InfluenceMode::Intrapersonal, 61, 40);
  cfg.signal_strength = 1.0;
  const auto [corpus, info] = generate_with_info(cfg);
  CHECK(info.client_sites.empty());
  REQUIRE(!info.therapist_sites.empty());
  for (const PlantedTurn& site : info.therapist_sites) {
    const Turn& turn = corpus.conversations[site.conversation].turns[site.turn_index - 1];
    CHECK(turn.speaker == Speaker::Therapist);
  }
}

TEST_CASE("generate: mixed mode is the union of both plants") {
  SynthConfig cfg = base_config(InfluenceMode::Mixed, 71, 40);
  cfg.signal_strength = 1.0;
  const auto [corpus, info] = generate_with_info(cfg);
  CHECK(!info.client_sites.empty());
  CHECK(!info.therapist_sites.empty());
}

TEST_CASE("generate: none mode plants directly separable per-turn signal") {
  // IM alone must classify a none-mode corpus nearly perfectly
  SynthConfig cfg = base_config(InfluenceMode::None, 81, 72);
  cfg.feature_dim = 10;
  cfg.turns_min = 14;
  cfg.turns_max = 20;
  cfg.signal_strength = 1.0;
  const Corpus corpus = zscore_normalize(generate(cfg));

  Corpus train_set, dev_set, test_set;
  train_set.feature_dim = dev_set.feature_dim = test_set.feature_dim = corpus.feature_dim;
  train_set.normalized = dev_set.normalized = test_set.normalized = true;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (i < 40) train_set.conversations.push_back(corpus.conversations[i]);
    else if (i < 52) dev_set.conversations.push_back(corpus.conversations[i]);
    else test_set.conversations.push_back(corpus.conversations[i]);
  }

  const ModelConfig mcfg = testutil::tiny_config(Variant::IM, 10, 8, 4, 3);
  TrainConfig tcfg;
  tcfg.epochs = 100;
  tcfg.seed = 3;
  const TrainResult result = train(train_set, dev_set, mcfg, tcfg);
  const double acc = accuracy(predict_corpus(test_set, result.best_params, mcfg),
                              corpus_labels(test_set));
  CHECK(acc >= 0.95);
}

TEST_CASE("generate: config validation") {
  SynthConfig cfg;
  cfg.n_conversations = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.lag = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.signal_strength = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SynthConfig{};
  cfg.turns_min = 10;
  cfg.turns_max = 8;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
