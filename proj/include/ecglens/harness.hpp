#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecglens/classical.hpp"
#include "ecglens/metrics.hpp"
#include "ecglens/models.hpp"
#include "ecglens/preprocess.hpp"
#include "ecglens/swt.hpp"
#include "ecglens/synthetic.hpp"

namespace ecglens::harness {

/// Overrides dataset.root when set.
inline constexpr const char* kDataRootEnv = "ECGLENS_DATA_ROOT";

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic" or "ptbxl"
  std::string root;
  std::string metadata_csv = "ptbxl_database.csv";
  std::string statements_csv = "scp_statements.csv";
  SyntheticSpec synthetic;
};

struct AugmentConfig {
  bool enabled = true;
  std::map<Superclass, std::size_t> add_per_class = {
      {Superclass::MI, 1000}, {Superclass::STTC, 1000}, {Superclass::CD, 1000}, {Superclass::HYP, 1000}};
  double gain_low = 0.9;
  double gain_high = 1.1;
  double noise_scale = 0.05;
  int levels = 3;
  std::string wavelet = "db4";
};

/// Optional per-network overrides of the shared training settings.
struct NeuralOverrides {
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<int> max_epochs;
  std::optional<int> patience;
};

struct ModelsConfig {
  classical::TreeParams decision_tree;
  int forest_trees = 100;
  classical::TreeParams forest_tree;
  int forest_features_per_split = 0;
  bool forest_bootstrap = true;
  classical::LogisticParams logistic;
  NeuralOverrides simple_cnn;
  NeuralOverrides lstm_net;
  NeuralOverrides ecg_lens;
  double ecg_lens_width_scale = 1.0;
};

struct HarnessConfig {
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 42;
  DatasetConfig dataset;
  SplitSpec split;
  AugmentConfig augment;
  models::TrainConfig train;  // seed is ignored; each model derives its own
  ModelsConfig models;
};

/// Parses the JSON config. Missing keys keep their defaults; unknown keys
/// and wrongly typed values raise Error(Config) naming the key path.
HarnessConfig parse_config(const std::string& json_text);
HarnessConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const HarnessConfig& cfg);

/// Applies the data-root environment override.
void apply_environment(HarnessConfig& cfg);

void validate(const HarnessConfig& cfg);

/// decision_tree, random_forest, logistic_regression, simple_cnn, lstm_net, ecg_lens
const std::array<std::string, 6>& model_names();
bool is_model_name(const std::string& name);
/// Column labels used in the benchmark tables (RF, DT, LR, ECG-Lens, LSTM, CNN).
std::string display_name(const std::string& model);

/// derive_seed(seed, fnv1a64(model name)).
std::uint64_t model_seed(std::uint64_t seed, const std::string& model);

struct Paths {
  std::filesystem::path root;

  std::filesystem::path prepared() const { return root / "prepared"; }
  std::filesystem::path split_file(const std::string& split) const { return prepared() / (split + ".ecgds"); }
  std::filesystem::path normalization() const { return prepared() / "normalization.json"; }
  std::filesystem::path augmented_train() const { return root / "augmented" / "train.ecgds"; }
  std::filesystem::path model_dir(const std::string& model) const { return root / "models" / model; }
  std::filesystem::path checkpoint(const std::string& model) const { return model_dir(model) / "checkpoint.ecgl"; }
  std::filesystem::path metrics(const std::string& model) const { return model_dir(model) / "metrics.json"; }
  std::filesystem::path benchmark() const { return root / "benchmark"; }
  std::filesystem::path report() const { return root / "report.md"; }
};

struct PrepareResult {
  std::size_t train = 0, val = 0, test = 0;
  std::array<std::size_t, kNumClasses> train_counts{};
};

struct AugmentResult {
  std::size_t original = 0;
  std::size_t augmented = 0;
  std::array<std::size_t, kNumClasses> counts{};
};

struct TrainOutcome {
  std::filesystem::path checkpoint;
  std::size_t epochs = 0;  // 0 for classical models
  int best_epoch = 0;
};

PrepareResult cmd_prepare(const HarnessConfig& cfg);
AugmentResult cmd_augment(const HarnessConfig& cfg);
TrainOutcome cmd_train(const HarnessConfig& cfg, const std::string& model);
/// Evaluates on the test split. Without an explicit checkpoint the model's
/// default checkpoint under the output directory is used.
metrics::MetricsReport cmd_evaluate(const HarnessConfig& cfg, const std::string& model,
                                    const std::optional<std::filesystem::path>& checkpoint = std::nullopt);
/// prepare, augment, then train and evaluate all six models; writes the
/// classical and deep tables plus a combined CSV.
metrics::NamedReports cmd_benchmark(const HarnessConfig& cfg);
/// Collects every evaluated model and writes report.md next to the
/// published reference values.
std::filesystem::path cmd_report(const HarnessConfig& cfg);

/// Flattened normalized signals as classifier features.
classical::FeatureMatrix to_features(const LabeledDataset& normalized);

/// Reads back the headline numbers of a metrics.json.
metrics::MetricsReport read_metrics_json(const std::filesystem::path& path);

}  // namespace ecglens::harness
