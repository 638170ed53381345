#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ecglens/classical.hpp"
#include "ecglens/ingest.hpp"
#include "ecglens/nn/network.hpp"
#include "ecglens/preprocess.hpp"

namespace ecglens::models {

enum class Architecture { SimpleCnn, LstmNet, EcgLens };

std::string architecture_name(Architecture a);
std::optional<Architecture> parse_architecture(const std::string& name);

enum class LayerKind : std::uint8_t {
  Conv1d = 1,
  MaxPool1d = 2,
  BatchNorm1d = 3,
  ReLU = 4,
  Dense = 5,
  Dropout = 6,
  GlobalAvgPool = 7,
  Flatten = 8,
  Lstm = 9,
};

std::string layer_kind_name(LayerKind k);

/// `units` is the filter count (conv), output width (dense) or hidden size
/// (lstm); input widths are inferred from the preceding layer.
struct LayerSpec {
  LayerKind kind = LayerKind::ReLU;
  int units = 0;
  int kernel = 0;
  int window = 0;
  double rate = 0.0;
  bool return_sequences = false;
  bool floor_mode = false;

  bool operator==(const LayerSpec&) const = default;
};

struct ModelSpec {
  Architecture architecture = Architecture::EcgLens;
  double width_scale = 1.0;
  std::size_t input_length = kSamples;
  std::size_t input_channels = kLeads;
  int num_classes = static_cast<int>(kNumClasses);
  std::vector<LayerSpec> layers;

  bool operator==(const ModelSpec&) const = default;
};

/// conv(32,k7)+relu+pool2 -> conv(64,k5)+relu+pool2 -> flatten ->
/// dense(128)+relu -> dropout(0.5) -> dense(5)
ModelSpec build_simple_cnn();

/// lstm(64, sequences) -> batchnorm -> lstm(64, last step) -> dropout(0.3)
/// -> dense(64)+relu -> dense(5)
ModelSpec build_lstm_net();

/// Four [conv(F,k7) -> batchnorm -> relu -> pool2] blocks with
/// F = 128s, 256s, 512s, 1024s, then gap -> dense(512s)+relu -> dropout(0.4)
/// -> dense(128s)+relu -> dropout(0.4) -> dense(5). Pooling floors odd
/// lengths (1000 -> 500 -> 250 -> 125 -> 62).
ModelSpec build_ecg_lens(double width_scale = 1.0);

ModelSpec build_model(Architecture a, double width_scale = 1.0);

/// Instantiates the layers and initialises them from `seed`.
template <typename T>
nn::Network<T> instantiate(const ModelSpec& spec, std::uint64_t seed);

/// Per-layer output shapes for an input of (batch, input_length, input_channels).
std::vector<nn::Shape> shape_walk(const ModelSpec& spec, std::size_t batch = 1);

/// Closed-form trainable parameter count.
std::size_t parameter_count(const ModelSpec& spec);

struct TrainConfig {
  double lr = 0.001;
  int batch_size = 32;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

using NamedTensor = std::pair<std::string, nn::Tensor<float>>;

struct NeuralModel {
  ModelSpec spec;
  std::vector<NamedTensor> parameters;
  std::vector<NamedTensor> buffers;

  bool operator==(const NeuralModel&) const = default;
};

using ModelPayload = std::variant<NeuralModel, classical::DecisionTree, classical::ForestModel, classical::LogisticModel>;

/// Trained model state plus everything needed to reuse it.
struct Checkpoint {
  std::string architecture;  // one of the six harness model names
  ModelPayload model;
  std::vector<EpochRecord> history;
  std::optional<NormStats> normalization;
  std::map<std::string, std::string> metadata;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Fails with both names when the stored architecture differs.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_architecture);

/// Network inputs N x L x C in single precision with integer labels.
struct TensorDataset {
  nn::Tensor<float> x;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

TensorDataset to_tensor_dataset(const LabeledDataset& dataset);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

/// Mini-batch Adam with seeded shuffling. After every epoch the validation
/// loss is measured in inference mode; the best-validation parameters are
/// kept and training stops once `patience` epochs pass without improvement
/// (patience 0 runs exactly one epoch).
TrainResult train(const ModelSpec& spec, const TensorDataset& train_set, const TensorDataset& val_set,
                  const TrainConfig& cfg);

/// Rebuilds the network stored in a neural checkpoint.
nn::Network<float> restore_network(const NeuralModel& model);

/// Inference-mode softmax probabilities, N x 5.
nn::Tensor<float> predict(const Checkpoint& ckpt, const nn::Tensor<float>& x, std::size_t batch_size = 64);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace ecglens::models
