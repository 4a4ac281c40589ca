#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "aim/data.hpp"
#include "aim/model.hpp"

namespace aim {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 1;
  bool shuffle = true;

  void validate() const;  // throws ConfigError
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;  // 1-based; max dev accuracy, earliest on ties
};

struct TrainResult {
  ModelParams best_params;
  TrainHistory history;
};

// Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
constexpr double kProbClamp = 1e-7;

// Mean binary cross entropy over a mini-batch of conversation-level
// probabilities against 0/1 targets.
double bce_batch_loss(const Vec& y_est, const std::vector<int>& y_tgt);

// d loss / d y_est[l] = (y - t) / (y (1 - y)) / L at the clamped value.
Vec bce_batch_grad(const Vec& y_est, const std::vector<int>& y_tgt);

// Conversation-level probabilities for a whole corpus, in corpus order.
Vec predict_corpus(const Corpus& corpus, const ModelParams& params, const ModelConfig& cfg);

std::vector<int> corpus_labels(const Corpus& corpus);  // throws MissingLabel

// Mini-batch training with per-epoch seeded shuffling, one Adam step per
// batch (final partial batch included) and best-dev checkpoint selection.
TrainResult train(const Corpus& train_set, const Corpus& dev_set, const ModelConfig& mcfg,
                  const TrainConfig& tcfg);

// 1-based epoch of highest dev accuracy, earliest on ties.
int select_best(const TrainHistory& history);

// CSV: header then one `epoch,train_loss,dev_acc` row per epoch.
void write_train_log(const TrainHistory& history, std::ostream& out);

}  // namespace aim
