#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "aim/data.hpp"
#include "aim/train.hpp"

namespace aim {

// Fraction of items where (y_est > 0.5) matches the label; a probability
// of exactly 0.5 classifies as low. Throws EmptyEvalSet.
double accuracy(const Vec& preds, const std::vector<int>& labels);

// Rotation plan for k-fold cross-validation: iteration j tests on fold j
// and develops on fold (j + 1) mod k, training on the rest.
struct CvPlan {
  int k = 6;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;      // indices into corpus.conversations
  std::map<std::string, int> fold_of;               // conversation id -> fold

  int test_fold(int iteration) const { return iteration; }
  int dev_fold(int iteration) const { return (iteration + 1) % k; }
};

// Seeded permutation split into k near-equal folds (sizes differ by <= 1).
// With group_by_dyad, conversations sharing a dyad key (the id with a
// trailing "_<digits>" stripped) are kept in one fold; sizes then balance
// only as well as the groups allow.
CvPlan kfold_split(const Corpus& corpus, int k, std::uint64_t seed, bool group_by_dyad = false);

std::string dyad_key(const std::string& conversation_id);

struct CvReport {
  Vec fold_accuracy;
  std::vector<int> fold_best_epoch;
  double mean_accuracy = 0.0;
  std::string config_echo;
};

CvReport cross_validate(const Corpus& corpus, const ModelConfig& mcfg, const TrainConfig& tcfg,
                        const CvPlan& plan);

enum class SweepParam { Lambda, WindowK, VariantParam };

SweepParam parse_sweep_param(const std::string& name);  // lambda | window_K | variant

struct SweepRow {
  std::string value;
  double mean_accuracy = 0.0;
};

// Runs cross_validate once per value with the shared fold plan and seeds;
// rows come back in the order the values were given.
std::vector<SweepRow> sweep(const Corpus& corpus, const ModelConfig& base_mcfg,
                            const TrainConfig& tcfg, const CvPlan& plan, SweepParam param,
                            const std::vector<std::string>& values);

// "a,b,c" lists plus "lo..hi" integer ranges (useful for window_K).
std::vector<std::string> parse_sweep_values(const std::string& text);

std::string describe_config(const ModelConfig& mcfg, const TrainConfig& tcfg);

void write_cv_report(const CvReport& report, std::ostream& out);
void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& param_name,
                       const std::string& config_echo, std::ostream& out);
// Two-column "value accuracy" rows for plotting.
void write_plot_data(const std::vector<SweepRow>& rows, std::ostream& out);

}  // namespace aim
