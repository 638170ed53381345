#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <sys/wait.h>

#include "ecglens/csv.hpp"
#include "ecglens/dataset_io.hpp"
#include "ecglens/harness.hpp"
#include "support/fixtures.hpp"

using namespace ecglens;
using namespace ecglens::harness;

namespace {

HarnessConfig small_config(const std::filesystem::path& out) {
  HarnessConfig cfg;
  cfg.output_dir = out;
  cfg.seed = 7;
  cfg.dataset.synthetic.train = 100;
  cfg.dataset.synthetic.val = 25;
  cfg.dataset.synthetic.test = 25;
  cfg.augment.add_per_class = {{Superclass::MI, 10}, {Superclass::HYP, 5}};
  cfg.models.forest_trees = 4;
  cfg.models.logistic.epochs = 3;
  cfg.train.max_epochs = 2;
  cfg.train.patience = 2;
  cfg.models.ecg_lens_width_scale = 0.05;
  return cfg;
}

struct RunResult {
  int code = -1;
  std::string err;
};

RunResult run_cli(const std::string& args, const fixtures::TempDir& dir) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string(ECGLENS_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                          " 2> " + err_path.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const auto bytes = fixtures::read_bytes(err_path);
  r.err.assign(bytes.begin(), bytes.end());
  return r;
}

std::string text_of(const std::filesystem::path& p) {
  const auto b = fixtures::read_bytes(p);
  return {b.begin(), b.end()};
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Usage;
}

}  // namespace

TEST_CASE("config parsing keeps defaults and rejects unknown keys") {
  const auto def = parse_config("{}");
  CHECK(def.seed == 42);
  CHECK(def.output_dir == "out");
  CHECK(def.models.forest_trees == 100);
  CHECK(def.augment.add_per_class.at(Superclass::CD) == 1000);
  CHECK(def.augment.add_per_class.count(Superclass::NORM) == 0);

  const auto cfg = parse_config(R"({"seed": 3, "train": {"lr": 0.01}, "models": {"ecg_lens": {"width_scale": 0.5}}})");
  CHECK(cfg.seed == 3);
  CHECK(cfg.train.lr == 0.01);
  CHECK(cfg.models.ecg_lens_width_scale == 0.5);

  try {
    parse_config(R"({"train": {"lr": 0.01, "momentum": 0.9}})");
    FAIL("unknown key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("train.momentum") != std::string::npos);
  }
  CHECK(code_of([] { parse_config(R"({"seed": "x"})"); }) == ErrorCode::Config);
  CHECK(code_of([] { parse_config("{not json"); }) == ErrorCode::Config);
  CHECK(code_of([] { parse_config(R"({"augment": {"add_per_class": {"XYZ": 3}}})"); }) == ErrorCode::Config);
  CHECK(code_of([] { parse_config(R"({"split": {"train_folds": [1, 1]}})"); }) == ErrorCode::Config);
}

TEST_CASE("config serialization round trips") {
  auto cfg = small_config("somewhere");
  cfg.models.lstm_net.max_epochs = 4;
  const auto text = config_to_json(cfg);
  CHECK(config_to_json(parse_config(text)) == text);
  CHECK(config_to_json(parse_config(config_to_json(HarnessConfig{}))) == config_to_json(HarnessConfig{}));
}

TEST_CASE("config validation") {
  auto cfg = small_config("x");
  CHECK_NOTHROW(validate(cfg));
  cfg.dataset.source = "other";
  CHECK(code_of([&] { validate(cfg); }) == ErrorCode::Config);
  cfg.dataset.source = "ptbxl";
  cfg.dataset.root.clear();
  CHECK(code_of([&] { validate(cfg); }) == ErrorCode::Config);
  cfg = small_config("x");
  cfg.split.val_fold = cfg.split.test_fold;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = small_config("x");
  cfg.models.forest_trees = 0;
  CHECK_THROWS_AS(validate(cfg), Error);
}

TEST_CASE("environment override of the data root") {
  HarnessConfig cfg;
  ::setenv(kDataRootEnv, "/data/ptbxl", 1);
  apply_environment(cfg);
  ::unsetenv(kDataRootEnv);
  CHECK(cfg.dataset.root == "/data/ptbxl");
}

TEST_CASE("model names and seeds") {
  CHECK(model_names().size() == 6);
  CHECK(is_model_name("ecg_lens"));
  CHECK_FALSE(is_model_name("ECG-Lens"));
  CHECK(display_name("random_forest") == "RF");
  CHECK(display_name("simple_cnn") == "CNN");
  CHECK(display_name("ecg_lens") == "ECG-Lens");
  CHECK(model_seed(1, "lstm_net") != model_seed(1, "simple_cnn"));
  CHECK(model_seed(1, "lstm_net") == derive_seed(1, {fnv1a64("lstm_net")}));
}

TEST_CASE("prepare is idempotent and augment with zero counts copies the split") {
  fixtures::TempDir dir("prepare");
  auto cfg = small_config(dir.path());
  const auto r = cmd_prepare(cfg);
  CHECK(r.train == 100);
  CHECK(r.val == 25);
  CHECK(r.test == 25);
  const Paths paths{dir.path()};
  const auto first = fixtures::read_bytes(paths.split_file("train"));
  const auto norm = text_of(paths.normalization());
  cmd_prepare(cfg);
  CHECK(fixtures::read_bytes(paths.split_file("train")) == first);
  CHECK(text_of(paths.normalization()) == norm);
  CHECK(std::filesystem::exists(paths.prepared() / "class_counts.csv"));
  CHECK(std::filesystem::exists(paths.prepared() / "split_manifest.csv"));

  const auto aug = cmd_augment(cfg);
  CHECK(aug.augmented == 115);
  CHECK(aug.counts[class_index(Superclass::MI)] == 30);
  CHECK(aug.counts[class_index(Superclass::HYP)] == 25);

  cfg.augment.add_per_class.clear();
  const auto none = cmd_augment(cfg);
  CHECK(none.augmented == none.original);
  CHECK(load_dataset(paths.augmented_train()).records == load_dataset(paths.split_file("train")).records);
}

TEST_CASE("train, evaluate and report on a small synthetic run") {
  fixtures::TempDir dir("pipeline");
  auto cfg = small_config(dir.path());
  cmd_prepare(cfg);
  cmd_augment(cfg);
  const Paths paths{dir.path()};

  CHECK(code_of([&] { cmd_evaluate(cfg, "decision_tree"); }) == ErrorCode::Io);
  CHECK(code_of([&] { cmd_train(cfg, "svm"); }) == ErrorCode::Usage);

  cmd_train(cfg, "decision_tree");
  const auto report = cmd_evaluate(cfg, "decision_tree");
  const auto cm = metrics::parse_confusion_counts_csv(text_of(paths.model_dir("decision_tree") / "confusion_counts.csv"));
  CHECK(cm.total() == 25);
  const auto stored = read_metrics_json(paths.metrics("decision_tree"));
  CHECK(stored.accuracy == metrics::accuracy(cm));
  CHECK(stored.accuracy == report.accuracy);
  CHECK(stored.f1 == metrics::precision_recall_f1(cm).f1);

  const auto outcome = cmd_train(cfg, "simple_cnn");
  CHECK(outcome.epochs >= 1);
  CHECK(outcome.epochs <= 2);
  const auto history = text_of(paths.model_dir("simple_cnn") / "history.csv");
  CHECK(line_count(history) == outcome.epochs + 1);
  const auto ckpt = models::load_checkpoint(paths.checkpoint("simple_cnn"));
  CHECK(ckpt.metadata.at("model") == "simple_cnn");
  CHECK(ckpt.metadata.at("train_records") == "115");
  CHECK(ckpt.normalization.has_value());
  CHECK(code_of([&] { cmd_evaluate(cfg, "ecg_lens", paths.checkpoint("simple_cnn")); }) == ErrorCode::Format);
  cmd_evaluate(cfg, "simple_cnn");

  const auto md = text_of(cmd_report(cfg));
  CHECK(md.find("DT") != std::string::npos);
  CHECK(md.find("CNN") != std::string::npos);
  CHECK(md.find("ECG-Lens") != std::string::npos);
}

TEST_CASE("command line exit codes and single-line errors") {
  fixtures::TempDir dir("cli");
  auto r = run_cli("", dir);
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error[E_USAGE]:", 0) == 0);

  fixtures::write_file(dir / "small.json", config_to_json(small_config(dir / "out")));
  r = run_cli("--config " + (dir / "small.json").string() + " train --model svm", dir);
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error[E_USAGE]:", 0) == 0);
  CHECK(line_count(r.err) == 1);
  CHECK(r.err.find("ecg_lens") != std::string::npos);

  r = run_cli("--config " + (dir / "missing.json").string() + " prepare", dir);
  CHECK(r.code == 4);
  CHECK(r.err.rfind("error[E_IO]:", 0) == 0);

  fixtures::write_file(dir / "bad.json", "{\"bogus\": 1}");
  r = run_cli("--config " + (dir / "bad.json").string() + " prepare", dir);
  CHECK(r.code == 3);
  CHECK(r.err.rfind("error[E_CONFIG]:", 0) == 0);
  CHECK(line_count(r.err) == 1);

  r = run_cli("--config " + (dir / "small.json").string() + " evaluate --model lstm_net", dir);
  CHECK(r.code == 4);

  r = run_cli("--config " + (dir / "small.json").string() + " prepare", dir);
  CHECK(r.code == 0);
  CHECK(r.err.empty());
  CHECK(std::filesystem::exists(dir / "out" / "prepared" / "train.ecgds"));
}
