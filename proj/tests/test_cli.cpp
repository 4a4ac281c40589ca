#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "aim/manifest.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* env = std::getenv("AIM_CLI");
  REQUIRE_MESSAGE(env != nullptr, "AIM_CLI must point at the aim binary");
  return env;
}

int run(const std::string& args, const std::string& stdout_file = "",
        const std::string& stderr_file = "") {
  std::string cmd = cli_path() + " " + args;
  if (!stdout_file.empty()) cmd += " > " + stdout_file;
  if (!stderr_file.empty()) cmd += " 2> " + stderr_file;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("aim_cli_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& sub = "") const {
    return sub.empty() ? path.string() : (path / sub).string();
  }
};

// Hashes of all regular files under a directory, manifest excluded.
std::map<std::string, std::string> artifact_hashes(const fs::path& dir) {
  std::map<std::string, std::string> hashes;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.find("manifest") != std::string::npos) continue;
    hashes[fs::relative(entry.path(), dir).string()] = aim::fnv1a_file_hex(entry.path().string());
  }
  return hashes;
}

std::string gen_args(const std::string& out, int n = 14, const std::string& extra = "") {
  return "gen-synth --n " + std::to_string(n) +
         " --turns-min 6 --turns-max 9 --dim 5 --mode none --strength 1 --seed 7 --out " + out +
         " " + extra;
}

}  // namespace

TEST_CASE("gen-synth: writes the corpus plus exactly one manifest") {
  TempDir tmp("gen");
  REQUIRE(run(gen_args(tmp.str("d"), 40), "/dev/null") == 0);
  std::size_t corpus_files = 0, manifests = 0;
  for (const auto& entry : fs::directory_iterator(tmp.str("d"))) {
    if (entry.path().filename() == "manifest.json") {
      ++manifests;
    } else {
      ++corpus_files;
    }
  }
  CHECK(corpus_files == 40);
  CHECK(manifests == 1);

  const auto manifest = nlohmann::json::parse(slurp(tmp.str("d") + "/manifest.json"));
  CHECK(manifest["command"] == "gen-synth");
  CHECK(manifest["seed"] == 7);
  CHECK(manifest["outputs"].size() == 40);
}

TEST_CASE("gen-synth: identical flags give identical file hashes") {
  TempDir tmp("det");
  REQUIRE(run(gen_args(tmp.str("a")), "/dev/null") == 0);
  REQUIRE(run(gen_args(tmp.str("b")), "/dev/null") == 0);
  const auto ha = artifact_hashes(tmp.str("a"));
  const auto hb = artifact_hashes(tmp.str("b"));
  REQUIRE(!ha.empty());
  CHECK(ha == hb);
}

TEST_CASE("gen-synth: bogus mode is a usage error") {
  TempDir tmp("bogus");
  CHECK(run("gen-synth --n 4 --mode bogus --out " + tmp.str("d"), "/dev/null", "/dev/null") != 0);
}

TEST_CASE("train: same seed twice gives an identical checkpoint hash") {
  TempDir tmp("train");
  REQUIRE(run(gen_args(tmp.str("train_d")), "/dev/null") == 0);
  REQUIRE(run("gen-synth --n 8 --turns-min 6 --turns-max 9 --dim 5 --mode none --strength 1 "
              "--seed 8 --out " + tmp.str("dev_d"), "/dev/null") == 0);

  const std::string flags = "train --train " + tmp.str("train_d") + " --dev " + tmp.str("dev_d") +
                            " --hidden 4 --proj 2 --epochs 3 --seed 5 --out ";
  REQUIRE(run(flags + tmp.str("a.ck"), "/dev/null") == 0);
  REQUIRE(run(flags + tmp.str("b.ck"), "/dev/null") == 0);
  CHECK(aim::fnv1a_file_hex(tmp.str("a.ck")) == aim::fnv1a_file_hex(tmp.str("b.ck")));
  CHECK(fs::exists(tmp.str("a.ck.log.csv")));
  CHECK(fs::exists(tmp.str("a.ck.manifest.json")));
  const std::string log = slurp(tmp.str("a.ck.log.csv"));
  CHECK(log.rfind("epoch,train_loss,dev_acc\n", 0) == 0);
}

TEST_CASE("train: default flags mirror the reference configuration") {
  TempDir tmp("defaults");
  REQUIRE(run(gen_args(tmp.str("train_d"), 10), "/dev/null") == 0);
  REQUIRE(run("gen-synth --n 6 --turns-min 6 --turns-max 9 --dim 5 --mode none --strength 1 "
              "--seed 9 --out " + tmp.str("dev_d"), "/dev/null") == 0);
  REQUIRE(run("train --train " + tmp.str("train_d") + " --dev " + tmp.str("dev_d") + " --out " +
              tmp.str("d.ck"), "/dev/null") == 0);

  const auto manifest = nlohmann::json::parse(slurp(tmp.str("d.ck.manifest.json")));
  CHECK(manifest["config"]["variant"] == "aim");
  CHECK(manifest["config"]["hidden"] == "64");
  CHECK(manifest["config"]["proj"] == "32");
  CHECK(manifest["config"]["lambda"] == "0.2");
  CHECK(manifest["config"]["window"] == "3");
  CHECK(manifest["config"]["epochs"] == "100");
  CHECK(manifest["config"]["batch"] == "8");
  CHECK(manifest["config"]["lr"] == "0.001");
  CHECK(manifest["seed"] == 1);

  const std::string ck = slurp(tmp.str("d.ck"));
  CHECK(ck.find("hidden 64") != std::string::npos);
  CHECK(ck.find("proj 32") != std::string::npos);
}

TEST_CASE("train: --variant im warns that lambda and window are ignored") {
  TempDir tmp("warn");
  REQUIRE(run(gen_args(tmp.str("train_d"), 8), "/dev/null") == 0);
  REQUIRE(run("train --train " + tmp.str("train_d") + " --dev " + tmp.str("train_d") +
                  " --variant im --lambda 0.5 --window 4 --hidden 3 --proj 2 --epochs 1 --out " +
                  tmp.str("im.ck"),
              "/dev/null", tmp.str("stderr.txt")) == 0);
  const std::string err = slurp(tmp.str("stderr.txt"));
  CHECK(err.find("--lambda has no effect") != std::string::npos);
  CHECK(err.find("--window has no effect") != std::string::npos);
}

TEST_CASE("predict: labeled input prints an accuracy footer, unlabeled does not") {
  TempDir tmp("pred");
  REQUIRE(run(gen_args(tmp.str("d"), 10), "/dev/null") == 0);
  REQUIRE(run("train --train " + tmp.str("d") + " --dev " + tmp.str("d") +
                  " --hidden 4 --proj 2 --epochs 5 --seed 3 --out " + tmp.str("m.ck"),
              "/dev/null") == 0);

  REQUIRE(run("predict --data " + tmp.str("d") + " --checkpoint " + tmp.str("m.ck") + " --out " +
                  tmp.str("preds.tsv"),
              "/dev/null") == 0);
  const std::string preds = slurp(tmp.str("preds.tsv"));
  CHECK(preds.find("# accuracy ") != std::string::npos);
  CHECK(preds.find("d0000_0\t") != std::string::npos);

  // unlabeled corpus: rewrite labels as '?'
  fs::create_directories(tmp.str("u"));
  for (const auto& entry : fs::directory_iterator(tmp.str("d"))) {
    if (entry.path().filename() == "manifest.json") continue;
    std::string text = slurp(entry.path().string());
    const std::size_t sp1 = text.find(' ');
    const std::size_t sp2 = text.find(' ', sp1 + 1);
    const std::size_t sp3 = text.find(' ', sp2 + 1);
    text = text.substr(0, sp2 + 1) + "?" + text.substr(sp3);
    std::ofstream out(tmp.str("u") + "/" + entry.path().filename().string());
    out << text;
  }
  REQUIRE(run("predict --data " + tmp.str("u") + " --checkpoint " + tmp.str("m.ck") + " --out " +
                  tmp.str("preds_u.tsv"),
              "/dev/null") == 0);
  const std::string unlabeled = slurp(tmp.str("preds_u.tsv"));
  CHECK(unlabeled.find("# accuracy") == std::string::npos);
  CHECK(unlabeled.find("\tlow") != std::string::npos);

  // trace dump carries window and attention lines
  REQUIRE(run("predict --data " + tmp.str("u") + " --checkpoint " + tmp.str("m.ck") + " --out " +
                  tmp.str("p2.tsv") + " --dump-trace " + tmp.str("trace.txt"),
              "/dev/null") == 0);
  const std::string trace = slurp(tmp.str("trace.txt"));
  CHECK(trace.find("turn 2 window 1 alpha") != std::string::npos);
  CHECK(trace.find("median ") != std::string::npos);
}

TEST_CASE("predict: rerun is byte-identical") {
  TempDir tmp("pred_det");
  REQUIRE(run(gen_args(tmp.str("d"), 8), "/dev/null") == 0);
  REQUIRE(run("train --train " + tmp.str("d") + " --dev " + tmp.str("d") +
                  " --hidden 3 --proj 2 --epochs 2 --seed 4 --out " + tmp.str("m.ck"),
              "/dev/null") == 0);
  REQUIRE(run("predict --data " + tmp.str("d") + " --checkpoint " + tmp.str("m.ck") + " --out " +
                  tmp.str("p1.tsv"), "/dev/null") == 0);
  REQUIRE(run("predict --data " + tmp.str("d") + " --checkpoint " + tmp.str("m.ck") + " --out " +
                  tmp.str("p2.tsv"), "/dev/null") == 0);
  CHECK(aim::fnv1a_file_hex(tmp.str("p1.tsv")) == aim::fnv1a_file_hex(tmp.str("p2.tsv")));
}

TEST_CASE("cross-validate: produces per-fold rows; k=1 is rejected") {
  TempDir tmp("cv");
  REQUIRE(run(gen_args(tmp.str("d"), 12), "/dev/null") == 0);
  REQUIRE(run("cross-validate --data " + tmp.str("d") +
                  " --k 6 --hidden 3 --proj 2 --epochs 2 --seed 1 --out " + tmp.str("cv.csv"),
              "/dev/null") == 0);
  const std::string csv = slurp(tmp.str("cv.csv"));
  CHECK(csv.find("fold,test_accuracy,best_epoch") != std::string::npos);
  CHECK(csv.find("mean,") != std::string::npos);
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows == 9);  // comment + header + 6 folds + mean

  CHECK(run("cross-validate --data " + tmp.str("d") + " --k 1 --epochs 1 --out " +
                tmp.str("bad.csv"),
            "/dev/null", "/dev/null") != 0);
}

TEST_CASE("sweep: value grids and plot data") {
  TempDir tmp("sweep");
  REQUIRE(run(gen_args(tmp.str("d"), 12), "/dev/null") == 0);
  REQUIRE(run("sweep --data " + tmp.str("d") +
                  " --param lambda --values 0,0.5 --k 6 --hidden 3 --proj 2 --epochs 1 --seed 2 "
                  "--out " + tmp.str("s.csv") + " --plot-data " + tmp.str("s.dat"),
              "/dev/null") == 0);
  const std::string csv = slurp(tmp.str("s.csv"));
  CHECK(csv.find("lambda,mean_accuracy") != std::string::npos);
  CHECK(csv.find("0,") != std::string::npos);
  CHECK(csv.find("0.5,") != std::string::npos);
  const std::string dat = slurp(tmp.str("s.dat"));
  CHECK(dat.find("0 ") == 0);

  REQUIRE(run("sweep --data " + tmp.str("d") +
                  " --param window_K --values 1..3 --k 6 --hidden 3 --proj 2 --epochs 1 --seed 2 "
                  "--out " + tmp.str("k.csv"),
              "/dev/null") == 0);
  const std::string kcsv = slurp(tmp.str("k.csv"));
  CHECK(kcsv.find("window_K,mean_accuracy") != std::string::npos);
  CHECK(kcsv.find("\n1,") != std::string::npos);
  CHECK(kcsv.find("\n2,") != std::string::npos);
  CHECK(kcsv.find("\n3,") != std::string::npos);
}
