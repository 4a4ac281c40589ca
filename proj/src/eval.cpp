#include "aim/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "aim/errors.hpp"
#include "aim/rng.hpp"

namespace aim {

namespace {

constexpr std::uint64_t kPlanStream = 0x504c414e;  // fold assignment
constexpr std::uint64_t kFoldStream = 0x464f4c44;  // per-fold training

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& indices) {
  Corpus out;
  out.feature_dim = corpus.feature_dim;
  out.normalized = corpus.normalized;
  out.conversations.reserve(indices.size());
  for (std::size_t i : indices) out.conversations.push_back(corpus.conversations[i]);
  return out;
}

}  // namespace

double accuracy(const Vec& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw ShapeError("accuracy: length mismatch");
  if (preds.empty()) throw EmptyEvalSet();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int predicted = preds[i] > 0.5 ? 1 : 0;
    if (predicted == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::string dyad_key(const std::string& conversation_id) {
  const std::size_t us = conversation_id.rfind('_');
  if (us == std::string::npos || us + 1 == conversation_id.size()) return conversation_id;
  for (std::size_t i = us + 1; i < conversation_id.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(conversation_id[i]))) return conversation_id;
  }
  return conversation_id.substr(0, us);
}

CvPlan kfold_split(const Corpus& corpus, int k, std::uint64_t seed, bool group_by_dyad) {
  if (k < 2) throw InvalidFoldCount(k);
  if (corpus.size() < static_cast<std::size_t>(k)) {
    throw ConfigError("corpus has " + std::to_string(corpus.size()) + " conversations, need >= " +
                      std::to_string(k) + " for " + std::to_string(k) + "-fold CV");
  }

  CvPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(k, {});
  Rng rng(mix_seed(seed, kPlanStream));

  if (!group_by_dyad) {
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    // first (n mod k) folds take the extra conversation
    const std::size_t base = corpus.size() / k;
    const std::size_t extra = corpus.size() % k;
    std::size_t cursor = 0;
    for (int f = 0; f < k; ++f) {
      const std::size_t take = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
      for (std::size_t j = 0; j < take; ++j) plan.folds[f].push_back(order[cursor++]);
    }
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      groups[dyad_key(corpus.conversations[i].id)].push_back(i);
    }
    std::vector<std::string> keys;
    keys.reserve(groups.size());
    for (const auto& [key, members] : groups) keys.push_back(key);
    rng.shuffle(keys);
    if (groups.size() < static_cast<std::size_t>(k)) {
      throw ConfigError("only " + std::to_string(groups.size()) + " dyads for " +
                        std::to_string(k) + " folds");
    }
    // greedy: each group goes to the currently smallest fold
    for (const std::string& key : keys) {
      int target = 0;
      for (int f = 1; f < k; ++f) {
        if (plan.folds[f].size() < plan.folds[target].size()) target = f;
      }
      for (std::size_t i : groups[key]) plan.folds[target].push_back(i);
    }
  }

  for (int f = 0; f < k; ++f) {
    std::sort(plan.folds[f].begin(), plan.folds[f].end());
    for (std::size_t i : plan.folds[f]) plan.fold_of[corpus.conversations[i].id] = f;
  }
  return plan;
}

CvReport cross_validate(const Corpus& corpus, const ModelConfig& mcfg, const TrainConfig& tcfg,
                        const CvPlan& plan) {
  corpus_labels(corpus);  // fail fast on unlabeled input

  CvReport report;
  report.config_echo = describe_config(mcfg, tcfg);
  for (int j = 0; j < plan.k; ++j) {
    const int test_f = plan.test_fold(j);
    const int dev_f = plan.dev_fold(j);
    std::vector<std::size_t> train_idx;
    for (int f = 0; f < plan.k; ++f) {
      if (f == test_f || f == dev_f) continue;
      train_idx.insert(train_idx.end(), plan.folds[f].begin(), plan.folds[f].end());
    }
    std::sort(train_idx.begin(), train_idx.end());

    const Corpus train_set = subset(corpus, train_idx);
    const Corpus dev_set = subset(corpus, plan.folds[dev_f]);
    const Corpus test_set = subset(corpus, plan.folds[test_f]);

    TrainConfig fold_cfg = tcfg;
    fold_cfg.seed = mix_seed(tcfg.seed, kFoldStream + static_cast<std::uint64_t>(j));
    const TrainResult result = train(train_set, dev_set, mcfg, fold_cfg);

    const double acc = accuracy(predict_corpus(test_set, result.best_params, mcfg),
                                corpus_labels(test_set));
    report.fold_accuracy.push_back(acc);
    report.fold_best_epoch.push_back(result.history.best_epoch);
  }
  report.mean_accuracy =
      std::accumulate(report.fold_accuracy.begin(), report.fold_accuracy.end(), 0.0) /
      static_cast<double>(report.fold_accuracy.size());
  return report;
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "lambda") return SweepParam::Lambda;
  if (name == "window_K") return SweepParam::WindowK;
  if (name == "variant") return SweepParam::VariantParam;
  throw ConfigError("unknown sweep parameter '" + name + "' (expected lambda, window_K or variant)");
}

std::vector<SweepRow> sweep(const Corpus& corpus, const ModelConfig& base_mcfg,
                            const TrainConfig& tcfg, const CvPlan& plan, SweepParam param,
                            const std::vector<std::string>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (const std::string& value : values) {
    ModelConfig mcfg = base_mcfg;
    switch (param) {
      case SweepParam::Lambda:
        mcfg.lambda = std::stod(value);
        break;
      case SweepParam::WindowK:
        mcfg.window = std::stoi(value);
        break;
      case SweepParam::VariantParam:
        mcfg.variant = parse_variant(value);
        break;
    }
    mcfg.validate();
    const CvReport report = cross_validate(corpus, mcfg, tcfg, plan);
    rows.push_back({value, report.mean_accuracy});
  }
  return rows;
}

std::vector<std::string> parse_sweep_values(const std::string& text) {
  std::vector<std::string> out;
  const std::size_t range = text.find("..");
  if (range != std::string::npos && text.find(',') == std::string::npos) {
    const int lo = std::stoi(text.substr(0, range));
    const int hi = std::stoi(text.substr(range + 2));
    if (hi < lo) throw ConfigError("bad range '" + text + "'");
    for (int v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
    return out;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!tok.empty()) out.push_back(tok);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty value list '" + text + "'");
  return out;
}

std::string describe_config(const ModelConfig& mcfg, const TrainConfig& tcfg) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "variant=%s dim=%d hidden=%d proj=%d window=%d lambda=%g epochs=%d batch=%d lr=%g seed=%llu",
                variant_name(mcfg.variant).c_str(), mcfg.feature_dim, mcfg.hidden, mcfg.proj,
                mcfg.window, mcfg.lambda, tcfg.epochs, tcfg.batch_size, tcfg.lr,
                static_cast<unsigned long long>(tcfg.seed));
  return buf;
}

void write_cv_report(const CvReport& report, std::ostream& out) {
  out << "# " << report.config_echo << '\n';
  out << "fold,test_accuracy,best_epoch\n";
  char buf[96];
  for (std::size_t f = 0; f < report.fold_accuracy.size(); ++f) {
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%d\n", f, report.fold_accuracy[f],
                  report.fold_best_epoch[f]);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean,%.12g,\n", report.mean_accuracy);
  out << buf;
}

void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& param_name,
                       const std::string& config_echo, std::ostream& out) {
  out << "# " << config_echo << '\n';
  out << param_name << ",mean_accuracy\n";
  char buf[96];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.12g\n", row.value.c_str(), row.mean_accuracy);
    out << buf;
  }
}

void write_plot_data(const std::vector<SweepRow>& rows, std::ostream& out) {
  char buf[96];
  for (const SweepRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s %.12g\n", row.value.c_str(), row.mean_accuracy);
    out << buf;
  }
}

}  // namespace aim
