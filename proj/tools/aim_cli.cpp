#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "aim/data.hpp"
#include "aim/errors.hpp"
#include "aim/eval.hpp"
#include "aim/manifest.hpp"
#include "aim/model.hpp"
#include "aim/synth.hpp"
#include "aim/train.hpp"

namespace fs = std::filesystem;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Shared model/training flags for train, cross-validate and sweep.
struct RunFlags {
  std::string variant = "aim";
  int hidden = 64;
  int proj = 32;
  double lambda = 0.2;
  int window = 3;
  std::string speaker_window = "recent";
  int epochs = 100;
  int batch = 8;
  double lr = 0.001;
  std::uint64_t seed = 1;
  std::string norm_scope = "conversation";

  void add_model_options(CLI::App* cmd) {
    cmd->add_option("--variant", variant, "model variant")
        ->check(CLI::IsMember({"aim", "im", "aim_t", "aim_c", "aim_concat"}));
    cmd->add_option("--hidden", hidden, "GRU hidden size")->check(CLI::PositiveNumber);
    cmd->add_option("--proj", proj, "attention projection size")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", lambda, "influence scale in [0,1]");
    cmd->add_option("--window", window, "influence window size K")->check(CLI::PositiveNumber);
    cmd->add_option("--speaker-window", speaker_window,
                    "aim_t/aim_c window semantics: K most recent same-speaker turns, or the "
                    "same-speaker turns within the last K")
        ->check(CLI::IsMember({"recent", "within_k"}));
  }
  void add_train_options(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--batch", batch, "mini-batch size")->check(CLI::PositiveNumber);
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--seed", seed, "master seed; all randomness derives from it");
    cmd->add_option("--norm-scope", norm_scope,
                    "z-normalization statistics per conversation or pooled over the corpus")
        ->check(CLI::IsMember({"conversation", "corpus"}));
  }

  aim::ModelConfig model_config(int feature_dim) const {
    aim::ModelConfig mcfg;
    mcfg.variant = aim::parse_variant(variant);
    mcfg.feature_dim = feature_dim;
    mcfg.hidden = hidden;
    mcfg.proj = proj;
    mcfg.lambda = lambda;
    mcfg.window = window;
    mcfg.window_mode = speaker_window == "recent" ? aim::SpeakerWindowMode::KMostRecent
                                                  : aim::SpeakerWindowMode::WithinLastK;
    mcfg.validate();
    return mcfg;
  }
  aim::TrainConfig train_config() const {
    aim::TrainConfig tcfg;
    tcfg.epochs = epochs;
    tcfg.batch_size = batch;
    tcfg.lr = lr;
    tcfg.seed = seed;
    tcfg.validate();
    return tcfg;
  }
  aim::NormScope scope() const {
    return norm_scope == "corpus" ? aim::NormScope::CorpusPooled : aim::NormScope::Conversation;
  }

  void warn_ignored_flags(const CLI::App* cmd, std::ostream& err) const {
    if (variant != "im") return;
    if (cmd->count("--lambda") > 0) {
      err << "warning: --lambda has no effect with --variant im\n";
    }
    if (cmd->count("--window") > 0) {
      err << "warning: --window has no effect with --variant im\n";
    }
  }

  void echo(std::map<std::string, std::string>& cfg) const {
    cfg["variant"] = variant;
    cfg["hidden"] = std::to_string(hidden);
    cfg["proj"] = std::to_string(proj);
    cfg["lambda"] = fmt(lambda);
    cfg["window"] = std::to_string(window);
    cfg["speaker_window"] = speaker_window;
    cfg["epochs"] = std::to_string(epochs);
    cfg["batch"] = std::to_string(batch);
    cfg["lr"] = fmt(lr);
    cfg["norm_scope"] = norm_scope;
  }
};

aim::Corpus load_corpus(const std::string& path) {
  if (fs::is_directory(path)) return aim::parse_corpus_dir(path, 0);
  return aim::parse_corpus_file(path, 0);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw aim::Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw aim::Error("failed while writing '" + path + "'");
}

int run_gen_synth(const aim::SynthConfig& cfg, const std::string& out_dir) {
  Timer timer;
  const aim::Corpus corpus = aim::generate(cfg);
  fs::create_directories(out_dir);

  aim::RunManifest manifest;
  manifest.command = "gen-synth";
  manifest.seed = cfg.seed;
  manifest.config = {{"n", std::to_string(cfg.n_conversations)},
                     {"turns_min", std::to_string(cfg.turns_min)},
                     {"turns_max", std::to_string(cfg.turns_max)},
                     {"dim", std::to_string(cfg.feature_dim)},
                     {"mode", aim::influence_mode_name(cfg.mode)},
                     {"lag", std::to_string(cfg.lag)},
                     {"strength", fmt(cfg.signal_strength)},
                     {"balance", fmt(cfg.label_balance)}};
  for (const aim::Conversation& conv : corpus.conversations) {
    const std::string path = (fs::path(out_dir) / (conv.id + ".txt")).string();
    write_text_file(path, aim::conversation_to_string(conv, corpus.feature_dim));
    manifest.outputs.push_back(path);
  }
  manifest.duration_seconds = timer.seconds();
  manifest.write((fs::path(out_dir) / "manifest.json").string());
  std::cout << "wrote " << corpus.size() << " conversations to " << out_dir << "\n";
  return 0;
}

int run_train(const RunFlags& flags, const CLI::App* cmd, const std::string& train_path,
              const std::string& dev_path, const std::string& out_path, std::string log_path) {
  Timer timer;
  flags.warn_ignored_flags(cmd, std::cerr);
  if (log_path.empty()) log_path = out_path + ".log.csv";

  aim::Corpus train_set = aim::zscore_normalize(load_corpus(train_path), flags.scope());
  aim::Corpus dev_set = aim::zscore_normalize(load_corpus(dev_path), flags.scope());
  if (train_set.feature_dim != dev_set.feature_dim) {
    throw aim::Error("train and dev corpora disagree on feature dim");
  }

  const aim::ModelConfig mcfg = flags.model_config(train_set.feature_dim);
  const aim::TrainConfig tcfg = flags.train_config();
  const aim::TrainResult result = aim::train(train_set, dev_set, mcfg, tcfg);

  aim::save_checkpoint(out_path, result.best_params, mcfg, tcfg.seed);
  std::ostringstream log;
  aim::write_train_log(result.history, log);
  write_text_file(log_path, log.str());

  aim::RunManifest manifest;
  manifest.command = "train";
  manifest.seed = tcfg.seed;
  flags.echo(manifest.config);
  manifest.config["dim"] = std::to_string(mcfg.feature_dim);
  manifest.inputs = {train_path, dev_path};
  manifest.outputs = {out_path, log_path};
  manifest.duration_seconds = timer.seconds();
  manifest.write(out_path + ".manifest.json");

  const aim::EpochStats& best = result.history.epochs[static_cast<std::size_t>(result.history.best_epoch - 1)];
  std::cout << "best epoch " << result.history.best_epoch << " dev_acc " << best.dev_accuracy
            << " -> " << out_path << "\n";
  return 0;
}

int run_cross_validate(const RunFlags& flags, const CLI::App* cmd, const std::string& data_path,
                       int k, bool dyad_disjoint, const std::string& out_path) {
  Timer timer;
  flags.warn_ignored_flags(cmd, std::cerr);
  const aim::Corpus corpus = aim::zscore_normalize(load_corpus(data_path), flags.scope());
  const aim::ModelConfig mcfg = flags.model_config(corpus.feature_dim);
  const aim::TrainConfig tcfg = flags.train_config();

  const aim::CvPlan plan = aim::kfold_split(corpus, k, tcfg.seed, dyad_disjoint);
  const aim::CvReport report = aim::cross_validate(corpus, mcfg, tcfg, plan);

  std::ostringstream csv;
  aim::write_cv_report(report, csv);
  write_text_file(out_path, csv.str());

  aim::RunManifest manifest;
  manifest.command = "cross-validate";
  manifest.seed = tcfg.seed;
  flags.echo(manifest.config);
  manifest.config["k"] = std::to_string(k);
  manifest.config["dyad_disjoint"] = dyad_disjoint ? "true" : "false";
  manifest.inputs = {data_path};
  manifest.outputs = {out_path};
  manifest.duration_seconds = timer.seconds();
  manifest.write(out_path + ".manifest.json");

  std::cout << "mean accuracy " << report.mean_accuracy << " -> " << out_path << "\n";
  return 0;
}

int run_sweep(const RunFlags& flags, const CLI::App* cmd, const std::string& data_path, int k,
              const std::string& param_name, const std::string& values_text,
              const std::string& out_path, const std::string& plot_path) {
  Timer timer;
  flags.warn_ignored_flags(cmd, std::cerr);
  const aim::Corpus corpus = aim::zscore_normalize(load_corpus(data_path), flags.scope());
  const aim::ModelConfig mcfg = flags.model_config(corpus.feature_dim);
  const aim::TrainConfig tcfg = flags.train_config();

  const aim::SweepParam param = aim::parse_sweep_param(param_name);
  const std::vector<std::string> values = aim::parse_sweep_values(values_text);
  const aim::CvPlan plan = aim::kfold_split(corpus, k, tcfg.seed);
  const std::vector<aim::SweepRow> rows = aim::sweep(corpus, mcfg, tcfg, plan, param, values);

  std::ostringstream csv;
  aim::write_sweep_table(rows, param_name, aim::describe_config(mcfg, tcfg), csv);
  write_text_file(out_path, csv.str());
  if (!plot_path.empty()) {
    std::ostringstream dat;
    aim::write_plot_data(rows, dat);
    write_text_file(plot_path, dat.str());
  }

  aim::RunManifest manifest;
  manifest.command = "sweep";
  manifest.seed = tcfg.seed;
  flags.echo(manifest.config);
  manifest.config["k"] = std::to_string(k);
  manifest.config["param"] = param_name;
  manifest.config["values"] = values_text;
  manifest.inputs = {data_path};
  manifest.outputs = {out_path};
  if (!plot_path.empty()) manifest.outputs.push_back(plot_path);
  manifest.duration_seconds = timer.seconds();
  manifest.write(out_path + ".manifest.json");

  for (const aim::SweepRow& row : rows) {
    std::cout << param_name << "=" << row.value << " mean_accuracy " << row.mean_accuracy << "\n";
  }
  return 0;
}

int run_predict(const std::string& data_path, const std::string& checkpoint_path,
                const std::string& out_path, const std::string& trace_path,
                const std::string& norm_scope) {
  Timer timer;
  const aim::Checkpoint ck = aim::load_checkpoint(checkpoint_path);
  const aim::NormScope scope =
      norm_scope == "corpus" ? aim::NormScope::CorpusPooled : aim::NormScope::Conversation;
  const aim::Corpus corpus = aim::zscore_normalize(load_corpus(data_path), scope);
  if (corpus.feature_dim != ck.config.feature_dim) {
    throw aim::Error("corpus feature dim " + std::to_string(corpus.feature_dim) +
                     " does not match checkpoint dim " + std::to_string(ck.config.feature_dim));
  }

  std::ostringstream body;
  std::ostringstream traces;
  aim::Vec labeled_preds;
  std::vector<int> labels;
  char buf[64];
  for (const aim::Conversation& conv : corpus.conversations) {
    const auto [y_est, trace] = aim::forward_conversation(conv, ck.params, ck.config);
    std::snprintf(buf, sizeof(buf), "%.12g", y_est);
    body << conv.id << '\t' << buf << '\t' << (y_est > 0.5 ? "high" : "low") << '\n';
    if (conv.label) {
      labeled_preds.push_back(y_est);
      labels.push_back(*conv.label);
    }
    if (!trace_path.empty()) {
      traces << "#conv " << conv.id << '\n';
      aim::dump_trace(trace, traces);
    }
  }
  if (!labels.empty()) {
    std::snprintf(buf, sizeof(buf), "%.12g", aim::accuracy(labeled_preds, labels));
    body << "# accuracy " << buf << " over " << labels.size() << " labeled conversations\n";
  }

  std::cout << body.str();
  if (!out_path.empty()) {
    write_text_file(out_path, body.str());
    if (!trace_path.empty()) write_text_file(trace_path, traces.str());

    aim::RunManifest manifest;
    manifest.command = "predict";
    manifest.seed = ck.seed;
    manifest.config = {{"checkpoint", checkpoint_path},
                       {"variant", aim::variant_name(ck.config.variant)},
                       {"norm_scope", norm_scope}};
    manifest.inputs = {data_path, checkpoint_path};
    manifest.outputs = {out_path};
    if (!trace_path.empty()) manifest.outputs.push_back(trace_path);
    manifest.duration_seconds = timer.seconds();
    manifest.write(out_path + ".manifest.json");
  } else if (!trace_path.empty()) {
    write_text_file(trace_path, traces.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based influence model for turn-level empathy estimation"};
  app.require_subcommand(1);

  // gen-synth
  aim::SynthConfig synth_cfg;
  std::string synth_mode = "mixed";
  std::string synth_out;
  CLI::App* gen = app.add_subcommand("gen-synth", "generate a synthetic labeled corpus");
  gen->add_option("--n", synth_cfg.n_conversations, "number of conversations")
      ->check(CLI::Range(2, 1000000));
  gen->add_option("--turns-min", synth_cfg.turns_min, "minimum turns per conversation");
  gen->add_option("--turns-max", synth_cfg.turns_max, "maximum turns per conversation");
  gen->add_option("--dim", synth_cfg.feature_dim, "feature dimension")->check(CLI::PositiveNumber);
  gen->add_option("--mode", synth_mode, "where the class signal is planted")
      ->check(CLI::IsMember({"interpersonal", "intrapersonal", "mixed", "none"}));
  gen->add_option("--lag", synth_cfg.lag, "how many turns back the signal lives")
      ->check(CLI::PositiveNumber);
  gen->add_option("--strength", synth_cfg.signal_strength, "signal strength in [0,1]");
  gen->add_option("--balance", synth_cfg.label_balance, "fraction of high-empathy labels");
  gen->add_option("--seed", synth_cfg.seed, "master seed");
  gen->add_option("--out", synth_out, "output corpus directory")->required();

  // train
  RunFlags train_flags;
  std::string train_dir, dev_dir, train_out, train_log;
  CLI::App* train_cmd = app.add_subcommand("train", "train one model");
  train_cmd->add_option("--train", train_dir, "training corpus (directory or file)")->required();
  train_cmd->add_option("--dev", dev_dir, "development corpus for model selection")->required();
  train_flags.add_model_options(train_cmd);
  train_flags.add_train_options(train_cmd);
  train_cmd->add_option("--out", train_out, "checkpoint output path")->required();
  train_cmd->add_option("--log", train_log, "training log CSV (default <out>.log.csv)");

  // cross-validate
  RunFlags cv_flags;
  std::string cv_data, cv_out;
  int cv_k = 6;
  bool cv_dyad = false;
  CLI::App* cv_cmd = app.add_subcommand("cross-validate", "k-fold cross-validation");
  cv_cmd->add_option("--data", cv_data, "labeled corpus (directory or file)")->required();
  cv_cmd->add_option("--k", cv_k, "fold count");
  cv_cmd->add_flag("--dyad-disjoint", cv_dyad, "keep conversations of one dyad in one fold");
  cv_flags.add_model_options(cv_cmd);
  cv_flags.add_train_options(cv_cmd);
  cv_cmd->add_option("--out", cv_out, "report CSV path")->required();

  // sweep
  RunFlags sweep_flags;
  std::string sweep_data, sweep_param, sweep_values, sweep_out, sweep_plot;
  int sweep_k = 6;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "hyperparameter sweep over cross-validation");
  sweep_cmd->add_option("--data", sweep_data, "labeled corpus (directory or file)")->required();
  sweep_cmd->add_option("--param", sweep_param, "lambda, window_K or variant")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma list or lo..hi integer range")->required();
  sweep_cmd->add_option("--k", sweep_k, "fold count");
  sweep_flags.add_model_options(sweep_cmd);
  sweep_flags.add_train_options(sweep_cmd);
  sweep_cmd->add_option("--out", sweep_out, "sweep table CSV path")->required();
  sweep_cmd->add_option("--plot-data", sweep_plot, "optional two-column plot data path");

  // predict
  std::string pred_data, pred_ck, pred_out, pred_trace, pred_scope = "conversation";
  CLI::App* pred_cmd = app.add_subcommand("predict", "score conversations with a checkpoint");
  pred_cmd->add_option("--data", pred_data, "corpus (directory or file)")->required();
  pred_cmd->add_option("--checkpoint", pred_ck, "checkpoint path")->required();
  pred_cmd->add_option("--out", pred_out, "write predictions here as well as stdout");
  pred_cmd->add_option("--dump-trace", pred_trace, "write per-turn attention traces here");
  pred_cmd->add_option("--norm-scope", pred_scope, "z-normalization scope")
      ->check(CLI::IsMember({"conversation", "corpus"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      synth_cfg.mode = aim::parse_influence_mode(synth_mode);
      synth_cfg.validate();
      return run_gen_synth(synth_cfg, synth_out);
    }
    if (train_cmd->parsed()) {
      return run_train(train_flags, train_cmd, train_dir, dev_dir, train_out, train_log);
    }
    if (cv_cmd->parsed()) {
      return run_cross_validate(cv_flags, cv_cmd, cv_data, cv_k, cv_dyad, cv_out);
    }
    if (sweep_cmd->parsed()) {
      return run_sweep(sweep_flags, sweep_cmd, sweep_data, sweep_k, sweep_param, sweep_values,
                       sweep_out, sweep_plot);
    }
    if (pred_cmd->parsed()) {
      return run_predict(pred_data, pred_ck, pred_out, pred_trace, pred_scope);
    }
  } catch (const aim::InvalidFoldCount& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
