#include "ecglens/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "ecglens/nn/adam.hpp"
#include "ecglens/nn/loss.hpp"

namespace ecglens::models {

namespace {

LayerSpec conv(int filters, int kernel) { return {LayerKind::Conv1d, filters, kernel, 0, 0.0, false, false}; }
LayerSpec pool(bool floor_mode) { return {LayerKind::MaxPool1d, 0, 0, 2, 0.0, false, floor_mode}; }
LayerSpec dense(int units) { return {LayerKind::Dense, units, 0, 0, 0.0, false, false}; }
LayerSpec dropout(double rate) { return {LayerKind::Dropout, 0, 0, 0, rate, false, false}; }
LayerSpec lstm(int hidden, bool sequences) { return {LayerKind::Lstm, hidden, 0, 0, 0.0, sequences, false}; }
LayerSpec simple(LayerKind kind) { return {kind, 0, 0, 0, 0.0, false, false}; }

int scaled(int width, double scale) { return std::max(1, static_cast<int>(std::lround(width * scale))); }

template <typename T>
std::unique_ptr<nn::Layer<T>> make_layer(const LayerSpec& s, const nn::Shape& in, std::uint64_t dropout_seed) {
  auto positive = [&](int v, const char* what) {
    if (v <= 0) throw Error(ErrorCode::Config, std::string("model spec: ") + what + " must be positive");
    return static_cast<std::size_t>(v);
  };
  switch (s.kind) {
    case LayerKind::Conv1d:
      return std::make_unique<nn::Conv1d<T>>(in.at(2), positive(s.units, "conv filters"), positive(s.kernel, "kernel"));
    case LayerKind::MaxPool1d:
      return std::make_unique<nn::MaxPool1d<T>>(positive(s.window, "pool window"), s.floor_mode);
    case LayerKind::BatchNorm1d:
      return std::make_unique<nn::BatchNorm1d<T>>(in.back());
    case LayerKind::ReLU:
      return std::make_unique<nn::ReLU<T>>();
    case LayerKind::Dense:
      if (in.size() != 2) throw Error(ErrorCode::Config, "model spec: dense layer needs a rank-2 input");
      return std::make_unique<nn::Dense<T>>(in[1], positive(s.units, "dense units"));
    case LayerKind::Dropout:
      return std::make_unique<nn::Dropout<T>>(s.rate, dropout_seed);
    case LayerKind::GlobalAvgPool:
      return std::make_unique<nn::GlobalAvgPool1d<T>>();
    case LayerKind::Flatten:
      return std::make_unique<nn::Flatten<T>>();
    case LayerKind::Lstm:
      return std::make_unique<nn::Lstm<T>>(in.at(2), positive(s.units, "lstm hidden size"), s.return_sequences);
  }
  throw Error(ErrorCode::Config, "model spec: unknown layer kind");
}

TensorDataset gather(const TensorDataset& data, std::span<const std::size_t> rows, nn::Tensor<float>& targets) {
  const std::size_t stride = data.x.size() / std::max<std::size_t>(data.size(), 1);
  nn::Shape shape = data.x.shape;
  shape[0] = rows.size();
  TensorDataset batch{nn::Tensor<float>(shape), std::vector<int>(rows.size())};
  targets = nn::Tensor<float>({rows.size(), kNumClasses});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(data.x.data.data() + rows[i] * stride, stride, batch.x.data.data() + i * stride);
    batch.labels[i] = data.labels[rows[i]];
    targets.data[i * kNumClasses + static_cast<std::size_t>(batch.labels[i])] = 1.0f;
  }
  return batch;
}

std::size_t count_correct(const nn::Tensor<float>& logits, std::span<const int> labels) {
  std::size_t correct = 0;
  const std::size_t c = logits.dim(1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const float* row = logits.data.data() + i * c;
    const auto best = static_cast<int>(std::max_element(row, row + c) - row);
    correct += best == labels[i];
  }
  return correct;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate_loss(nn::Network<float>& net, const TensorDataset& data, std::size_t batch_size) {
  Evaluation out;
  std::vector<std::size_t> rows;
  nn::Tensor<float> targets;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    rows.resize(std::min(batch_size, data.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const auto batch = gather(data, rows, targets);
    const auto logits = net.forward(batch.x, nn::Mode::Infer);
    out.loss += nn::softmax_xent(logits, targets).loss * static_cast<double>(rows.size());
    correct += count_correct(logits, batch.labels);
  }
  out.loss /= static_cast<double>(data.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return out;
}

std::vector<NamedTensor> snapshot(const std::vector<std::pair<std::string, nn::Tensor<float>*>>& named) {
  std::vector<NamedTensor> out;
  out.reserve(named.size());
  for (const auto& [name, tensor] : named) out.emplace_back(name, *tensor);
  return out;
}

void restore(const std::vector<std::pair<std::string, nn::Tensor<float>*>>& named,
             const std::vector<NamedTensor>& saved, const char* what) {
  if (named.size() != saved.size())
    throw Error(ErrorCode::Format, std::string("checkpoint: ") + what + " count " + std::to_string(saved.size()) +
                                       " does not match the architecture (" + std::to_string(named.size()) + ")");
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].first != saved[i].first || named[i].second->shape != saved[i].second.shape)
      throw Error(ErrorCode::Format, std::string("checkpoint: ") + what + " '" + saved[i].first + "' " +
                                         nn::shape_string(saved[i].second.shape) + " does not match '" +
                                         named[i].first + "' " + nn::shape_string(named[i].second->shape));
    *named[i].second = saved[i].second;
  }
}

}  // namespace

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::SimpleCnn: return "simple_cnn";
    case Architecture::LstmNet: return "lstm_net";
    case Architecture::EcgLens: return "ecg_lens";
  }
  return "unknown";
}

std::optional<Architecture> parse_architecture(const std::string& name) {
  for (auto a : {Architecture::SimpleCnn, Architecture::LstmNet, Architecture::EcgLens}) {
    if (architecture_name(a) == name) return a;
  }
  return std::nullopt;
}

std::string layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::MaxPool1d: return "maxpool1d";
    case LayerKind::BatchNorm1d: return "batchnorm1d";
    case LayerKind::ReLU: return "relu";
    case LayerKind::Dense: return "dense";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Lstm: return "lstm";
  }
  return "unknown";
}

ModelSpec build_simple_cnn() {
  ModelSpec spec;
  spec.architecture = Architecture::SimpleCnn;
  spec.layers = {conv(32, 7), simple(LayerKind::ReLU),  pool(false), conv(64, 5), simple(LayerKind::ReLU),
                 pool(false), simple(LayerKind::Flatten), dense(128), simple(LayerKind::ReLU), dropout(0.5),
                 dense(5)};
  return spec;
}

ModelSpec build_lstm_net() {
  ModelSpec spec;
  spec.architecture = Architecture::LstmNet;
  spec.layers = {lstm(64, true), simple(LayerKind::BatchNorm1d), lstm(64, false), dropout(0.3),
                 dense(64),      simple(LayerKind::ReLU),        dense(5)};
  return spec;
}

ModelSpec build_ecg_lens(double width_scale) {
  if (!(width_scale > 0.0) || width_scale > 1.0)
    throw Error(ErrorCode::Config, "ecg_lens: width scale must lie in (0, 1]");
  ModelSpec spec;
  spec.architecture = Architecture::EcgLens;
  spec.width_scale = width_scale;
  for (int filters : {128, 256, 512, 1024}) {
    spec.layers.push_back(conv(scaled(filters, width_scale), 7));
    spec.layers.push_back(simple(LayerKind::BatchNorm1d));
    spec.layers.push_back(simple(LayerKind::ReLU));
    spec.layers.push_back(pool(true));
  }
  spec.layers.push_back(simple(LayerKind::GlobalAvgPool));
  spec.layers.push_back(dense(scaled(512, width_scale)));
  spec.layers.push_back(simple(LayerKind::ReLU));
  spec.layers.push_back(dropout(0.4));
  spec.layers.push_back(dense(scaled(128, width_scale)));
  spec.layers.push_back(simple(LayerKind::ReLU));
  spec.layers.push_back(dropout(0.4));
  spec.layers.push_back(dense(5));
  return spec;
}

ModelSpec build_model(Architecture a, double width_scale) {
  switch (a) {
    case Architecture::SimpleCnn: return build_simple_cnn();
    case Architecture::LstmNet: return build_lstm_net();
    case Architecture::EcgLens: return build_ecg_lens(width_scale);
  }
  throw Error(ErrorCode::Config, "unknown architecture");
}

template <typename T>
nn::Network<T> instantiate(const ModelSpec& spec, std::uint64_t seed) {
  nn::Network<T> net;
  nn::Shape shape = {1, spec.input_length, spec.input_channels};
  Rng init_rng(derive_seed(seed, {0x1417}));
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    auto layer = make_layer<T>(spec.layers[i], shape, derive_seed(seed, {0xd7, i}));
    shape = layer->output_shape(shape);
    layer->init(init_rng);
    net.add(std::move(layer));
  }
  if (shape != nn::Shape{1, static_cast<std::size_t>(spec.num_classes)})
    throw Error(ErrorCode::Config, architecture_name(spec.architecture) + ": network ends in " +
                                       nn::shape_string(shape) + " instead of one logit per class");
  return net;
}

template nn::Network<float> instantiate(const ModelSpec&, std::uint64_t);
template nn::Network<double> instantiate(const ModelSpec&, std::uint64_t);

std::vector<nn::Shape> shape_walk(const ModelSpec& spec, std::size_t batch) {
  auto net = instantiate<float>(spec, 0);
  std::vector<nn::Shape> shapes;
  nn::Shape shape = {batch, spec.input_length, spec.input_channels};
  for (std::size_t i = 0; i < net.size(); ++i) {
    shape = net.layer(i).output_shape(shape);
    shapes.push_back(shape);
  }
  return shapes;
}

std::size_t parameter_count(const ModelSpec& spec) {
  std::size_t total = 0;
  nn::Shape shape = {1, spec.input_length, spec.input_channels};
  for (const auto& s : spec.layers) {
    const auto units = static_cast<std::size_t>(std::max(s.units, 0));
    switch (s.kind) {
      case LayerKind::Conv1d:
        total += static_cast<std::size_t>(s.kernel) * shape[2] * units + units;
        shape = {1, shape[1], units};
        break;
      case LayerKind::MaxPool1d:
        shape[1] /= static_cast<std::size_t>(s.window);
        break;
      case LayerKind::BatchNorm1d:
        total += 2 * shape.back();
        break;
      case LayerKind::Dense:
        total += shape[1] * units + units;
        shape = {1, units};
        break;
      case LayerKind::GlobalAvgPool:
        shape = {1, shape[2]};
        break;
      case LayerKind::Flatten:
        shape = {1, nn::shape_size(shape)};
        break;
      case LayerKind::Lstm:
        total += 4 * units * (shape[2] + units + 1);
        shape = s.return_sequences ? nn::Shape{1, shape[1], units} : nn::Shape{1, units};
        break;
      case LayerKind::ReLU:
      case LayerKind::Dropout:
        break;
    }
  }
  return total;
}

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw Error(ErrorCode::Config, "train: batch_size must be >= 1");
  if (cfg.max_epochs < 1) throw Error(ErrorCode::Config, "train: max_epochs must be >= 1");
  if (cfg.patience < 0 || cfg.patience > cfg.max_epochs)
    throw Error(ErrorCode::Config, "train: patience must lie in [0, max_epochs]");
  if (!(cfg.lr > 0.0)) throw Error(ErrorCode::Config, "train: lr must be positive");
}

TensorDataset to_tensor_dataset(const LabeledDataset& dataset) {
  TensorDataset out{nn::Tensor<float>({dataset.size(), kSamples, kLeads}), {}};
  out.labels.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& r = dataset.records[i];
    std::transform(r.signal.samples.begin(), r.signal.samples.end(), out.x.data.begin() + static_cast<std::ptrdiff_t>(i * kSignalValues),
                   [](double v) { return static_cast<float>(v); });
    out.labels.push_back(class_index(r.label));
  }
  return out;
}

TrainResult train(const ModelSpec& spec, const TensorDataset& train_set, const TensorDataset& val_set,
                  const TrainConfig& cfg) {
  validate(cfg);
  if (train_set.size() == 0) throw Error(ErrorCode::Data, "train: empty training set");
  if (val_set.size() == 0) throw Error(ErrorCode::Data, "train: empty validation set");

  auto net = instantiate<float>(spec, derive_seed(cfg.seed, {1}));
  Rng shuffle_rng(derive_seed(cfg.seed, {2}));
  nn::AdamState<float> adam;
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  const auto params = net.params();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<NamedTensor> best_params = snapshot(net.named_params());
  std::vector<NamedTensor> best_buffers = snapshot(net.named_buffers());
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Tensor<float> targets;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch_size, order.size() - start));
      const auto batch = gather(train_set, rows, targets);
      net.zero_grad();
      const auto logits = net.forward(batch.x, nn::Mode::Train);
      const auto loss = nn::softmax_xent(logits, targets);
      if (!std::isfinite(loss.loss))
        throw Error(ErrorCode::Training, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                             std::to_string(batch_index));
      net.backward(loss.grad);
      nn::adam_step(params, adam, adam_cfg);
      loss_sum += loss.loss * static_cast<double>(rows.size());
      correct += count_correct(logits, batch.labels);
    }

    const auto val = evaluate_loss(net, val_set, 64);
    if (!std::isfinite(val.loss))
      throw Error(ErrorCode::Training, "non-finite validation loss at epoch " + std::to_string(epoch));
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    record.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    record.val_loss = val.loss;
    record.val_acc = val.accuracy;
    result.history.push_back(record);

    if (val.loss < best_val) {
      best_val = val.loss;
      result.best_epoch = epoch;
      best_params = snapshot(net.named_params());
      best_buffers = snapshot(net.named_buffers());
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) break;
  }

  NeuralModel model{spec, std::move(best_params), std::move(best_buffers)};
  result.checkpoint.architecture = architecture_name(spec.architecture);
  result.checkpoint.model = std::move(model);
  result.checkpoint.history = result.history;
  return result;
}

nn::Network<float> restore_network(const NeuralModel& model) {
  auto net = instantiate<float>(model.spec, 0);
  restore(net.named_params(), model.parameters, "parameter");
  restore(net.named_buffers(), model.buffers, "buffer");
  return net;
}

nn::Tensor<float> predict(const Checkpoint& ckpt, const nn::Tensor<float>& x, std::size_t batch_size) {
  const auto* model = std::get_if<NeuralModel>(&ckpt.model);
  if (!model) throw Error(ErrorCode::Data, "predict: checkpoint '" + ckpt.architecture + "' is not a neural model");
  if (x.rank() != 3) throw Error(ErrorCode::Data, "predict: expected N x L x C input");
  auto net = restore_network(*model);
  const std::size_t n = x.dim(0);
  const std::size_t stride = n ? x.size() / n : 0;
  nn::Tensor<float> probs({n, kNumClasses});
  for (std::size_t start = 0; start < n; start += std::max<std::size_t>(batch_size, 1)) {
    const std::size_t count = std::min(batch_size, n - start);
    nn::Shape shape = x.shape;
    shape[0] = count;
    nn::Tensor<float> batch(shape);
    std::copy_n(x.data.data() + start * stride, count * stride, batch.data.data());
    const auto p = nn::softmax(net.forward(batch, nn::Mode::Infer));
    std::copy(p.data.begin(), p.data.end(), probs.data.begin() + static_cast<std::ptrdiff_t>(start * kNumClasses));
  }
  return probs;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,train_acc,val_acc\n";
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", h.epoch, h.train_loss, h.val_loss, h.train_acc,
                  h.val_acc);
    out << buf;
  }
  return out.str();
}

}  // namespace ecglens::models
