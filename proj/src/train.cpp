#include "aim/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "aim/errors.hpp"
#include "aim/eval.hpp"
#include "aim/rng.hpp"

namespace aim {

namespace {

constexpr std::uint64_t kInitStream = 0x494e4954;     // parameter init
constexpr std::uint64_t kShuffleStream = 0x53485546;  // epoch shuffling

double clamp_prob(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (lr <= 0.0) throw ConfigError("learning rate must be positive");
}

double bce_batch_loss(const Vec& y_est, const std::vector<int>& y_tgt) {
  if (y_est.size() != y_tgt.size()) throw ShapeError("bce: prediction/target length mismatch");
  if (y_est.empty()) throw ShapeError("bce: empty batch");
  double sum = 0.0;
  for (std::size_t l = 0; l < y_est.size(); ++l) {
    const double p = clamp_prob(y_est[l]);
    sum += y_tgt[l] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(y_est.size());
}

Vec bce_batch_grad(const Vec& y_est, const std::vector<int>& y_tgt) {
  if (y_est.size() != y_tgt.size()) throw ShapeError("bce: prediction/target length mismatch");
  Vec grad(y_est.size());
  const double inv_l = 1.0 / static_cast<double>(y_est.size());
  for (std::size_t l = 0; l < y_est.size(); ++l) {
    const double p = clamp_prob(y_est[l]);
    grad[l] = (p - static_cast<double>(y_tgt[l])) / (p * (1.0 - p)) * inv_l;
  }
  return grad;
}

Vec predict_corpus(const Corpus& corpus, const ModelParams& params, const ModelConfig& cfg) {
  Vec out;
  out.reserve(corpus.size());
  for (const Conversation& conv : corpus.conversations) {
    out.push_back(forward_conversation(conv, params, cfg).first);
  }
  return out;
}

std::vector<int> corpus_labels(const Corpus& corpus) {
  std::vector<int> labels;
  labels.reserve(corpus.size());
  for (const Conversation& conv : corpus.conversations) {
    if (!conv.label) throw MissingLabel(conv.id);
    labels.push_back(*conv.label);
  }
  return labels;
}

TrainResult train(const Corpus& train_set, const Corpus& dev_set, const ModelConfig& mcfg,
                  const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  const std::vector<int> train_labels = corpus_labels(train_set);
  const std::vector<int> dev_labels = corpus_labels(dev_set);
  if (train_set.conversations.empty()) throw ConfigError("empty training set");

  ModelParams params = init_params(mix_seed(tcfg.seed, kInitStream), mcfg);
  AdamState adam(total_size(model_tensors(params)));
  const AdamConfig adam_cfg{tcfg.lr, tcfg.beta1, tcfg.beta2, 1e-8};

  Rng shuffle_rng(mix_seed(tcfg.seed, kShuffleStream));
  const std::size_t n = train_set.conversations.size();
  std::vector<std::size_t> order(n);

  TrainResult result;
  result.best_params = params;
  double best_acc = -1.0;

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    if (tcfg.shuffle) shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += tcfg.batch_size) {
      const std::size_t stop = std::min(n, start + tcfg.batch_size);
      std::vector<ForwardTrace> traces;
      Vec y_est;
      std::vector<int> y_tgt;
      for (std::size_t b = start; b < stop; ++b) {
        const Conversation& conv = train_set.conversations[order[b]];
        auto [y, trace] = forward_conversation(conv, params, mcfg);
        y_est.push_back(y);
        y_tgt.push_back(train_labels[order[b]]);
        traces.push_back(std::move(trace));
      }
      const double batch_loss = bce_batch_loss(y_est, y_tgt);
      if (!std::isfinite(batch_loss)) {
        throw Error("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += batch_loss * static_cast<double>(stop - start);

      const Vec d_y = bce_batch_grad(y_est, y_tgt);
      ModelParams grads(mcfg);
      grads.fill(0.0);
      auto grad_tensors = model_tensors(grads);
      for (std::size_t b = start; b < stop; ++b) {
        const Conversation& conv = train_set.conversations[order[b]];
        ModelParams g = backward_conversation(traces[b - start], conv, params, mcfg, d_y[b - start]);
        auto gt = model_tensors(g);
        for (std::size_t k = 0; k < grad_tensors.size(); ++k) {
          for (std::size_t idx = 0; idx < grad_tensors[k].size; ++idx) {
            grad_tensors[k].data[idx] += gt[k].data[idx];
          }
        }
      }
      adam_step(model_tensors(params), grad_tensors, adam, adam_cfg);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    stats.dev_accuracy = accuracy(predict_corpus(dev_set, params, mcfg), dev_labels);
    result.history.epochs.push_back(stats);

    if (stats.dev_accuracy > best_acc) {
      best_acc = stats.dev_accuracy;
      result.best_params = params;
      result.history.best_epoch = epoch;
    }
  }
  return result;
}

int select_best(const TrainHistory& history) {
  if (history.epochs.empty()) throw EmptyHistory();
  int best = history.epochs.front().epoch;
  double best_acc = history.epochs.front().dev_accuracy;
  for (const EpochStats& s : history.epochs) {
    if (s.dev_accuracy > best_acc) {
      best_acc = s.dev_accuracy;
      best = s.epoch;
    }
  }
  return best;
}

void write_train_log(const TrainHistory& history, std::ostream& out) {
  out << "epoch,train_loss,dev_acc\n";
  char buf[96];
  for (const EpochStats& s : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g\n", s.epoch, s.train_loss, s.dev_accuracy);
    out << buf;
  }
}

}  // namespace aim
