// ecglens: command-line harness for the ECG benchmark pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ecglens/harness.hpp"

namespace {

using namespace ecglens;

int exit_code(ErrorCode code) { return 2 + static_cast<int>(code); }

int fail(ErrorCode code, const std::string& message) {
  std::string line = message;
  for (auto& ch : line)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "error[" << error_code_name(code) << "]: " << line << '\n';
  return exit_code(code);
}

std::string counts_line(const std::array<std::size_t, kNumClasses>& counts) {
  std::string s;
  for (auto c : kAllSuperclasses) {
    s += (s.empty() ? "" : " ") + std::string(superclass_name(c)) + "=" + std::to_string(counts[class_index(c)]);
  }
  return s;
}

void print_report(const std::string& model, const metrics::MetricsReport& r) {
  std::printf("%s: accuracy %.4f  roc_auc %.4f  f1 %.4f  precision %.4f  recall %.4f  (n=%llu)\n", model.c_str(),
              r.accuracy, r.roc_auc, r.f1, r.precision, r.recall, static_cast<unsigned long long>(r.samples));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG superclass classification benchmark"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path, model, out_dir, checkpoint;
  std::optional<std::uint64_t> seed;
  bool synthetic = false;
  app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
  app.add_option("--model", model, "model name for train/evaluate");
  app.add_option("--out", out_dir, "output directory (overrides output_dir)");
  app.add_option("--seed", seed, "global seed (overrides seed)");
  app.add_flag("--synthetic", synthetic, "use the synthetic dataset generator");
  app.add_option("--checkpoint", checkpoint, "checkpoint to evaluate instead of the default one");

  auto* prepare = app.add_subcommand("prepare", "build train/val/test splits and normalization stats");
  auto* augment = app.add_subcommand("augment", "balance the training split with wavelet augmentation");
  auto* train = app.add_subcommand("train", "train one model (--model)");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate one model on the test split (--model)");
  auto* benchmark = app.add_subcommand("benchmark", "prepare, augment, train and evaluate all six models");
  auto* report = app.add_subcommand("report", "write report.md from evaluated models");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(ErrorCode::Usage, e.what());
  }

  try {
    harness::HarnessConfig cfg = config_path.empty() ? harness::HarnessConfig{} : harness::load_config(config_path);
    harness::apply_environment(cfg);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) cfg.seed = *seed;
    if (synthetic) cfg.dataset.source = "synthetic";

    if (prepare->parsed()) {
      const auto r = harness::cmd_prepare(cfg);
      std::printf("prepared train=%zu val=%zu test=%zu; train classes: %s\n", r.train, r.val, r.test,
                  counts_line(r.train_counts).c_str());
    } else if (augment->parsed()) {
      const auto r = harness::cmd_augment(cfg);
      std::printf("augmented train %zu -> %zu; classes: %s\n", r.original, r.augmented, counts_line(r.counts).c_str());
    } else if (train->parsed() || evaluate->parsed()) {
      if (model.empty()) {
        std::string list;
        for (const auto& n : harness::model_names()) list += (list.empty() ? "" : ", ") + n;
        return fail(ErrorCode::Usage, "--model is required; expected one of: " + list);
      }
      if (train->parsed()) {
        const auto r = harness::cmd_train(cfg, model);
        if (r.epochs)
          std::printf("trained %s for %zu epochs (best epoch %d) -> %s\n", model.c_str(), r.epochs, r.best_epoch,
                      r.checkpoint.string().c_str());
        else
          std::printf("trained %s -> %s\n", model.c_str(), r.checkpoint.string().c_str());
      } else {
        std::optional<std::filesystem::path> ckpt;
        if (!checkpoint.empty()) ckpt = checkpoint;
        print_report(model, harness::cmd_evaluate(cfg, model, ckpt));
      }
    } else if (benchmark->parsed()) {
      for (const auto& [name, r] : harness::cmd_benchmark(cfg)) print_report(name, r);
      std::printf("tables written to %s\n", harness::Paths{cfg.output_dir}.benchmark().string().c_str());
    } else if (report->parsed()) {
      std::printf("report written to %s\n", harness::cmd_report(cfg).string().c_str());
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(ErrorCode::Io, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ErrorCode::Data, "out of memory");
  }
  return 0;
}
