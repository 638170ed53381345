#include "ecglens/harness.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ecglens/csv.hpp"
#include "ecglens/dataset_io.hpp"

namespace ecglens::harness {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::Config, "config: " + msg); }

// Reads the keys of one JSON object and remembers which were consumed, so
// leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(label() + " must be an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) config_error(child_path(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, int& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_integer()) config_error(child_path(key) + " must be an integer");
      const auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) config_error(child_path(key) + " is out of range");
      out = static_cast<int>(x);
    }
  }
  void read(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_unsigned()) config_error(child_path(key) + " must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) config_error(child_path(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) config_error(child_path(key) + " must be a string");
      out = v->get<std::string>();
    }
  }
  template <typename V>
  void read(const std::string& key, std::optional<V>& out) {
    if (j_.contains(key)) {
      V v{};
      read(key, v);
      out = v;
    } else {
      seen_.insert(key);
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) config_error("unknown key '" + child_path(key) + "'");
    }
  }

 private:
  std::string label() const { return path_.empty() ? "the top level" : "'" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void section(ObjectReader& parent, const std::string& key, F&& body) {
  if (const auto* v = parent.find(key)) {
    ObjectReader r(*v, parent.child_path(key));
    body(r);
    r.finish();
  }
}

void read_tree(ObjectReader& r, classical::TreeParams& p) {
  r.read("max_depth", p.max_depth);
  r.read("min_samples_leaf", p.min_samples_leaf);
  r.read("min_samples_split", p.min_samples_split);
}

void read_neural(ObjectReader& r, NeuralOverrides& o) {
  r.read("lr", o.lr);
  r.read("batch_size", o.batch_size);
  r.read("max_epochs", o.max_epochs);
  r.read("patience", o.patience);
}

json tree_json(const classical::TreeParams& p) {
  return {{"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf},
          {"min_samples_split", p.min_samples_split}};
}

json neural_json(const NeuralOverrides& o) {
  json j = json::object();
  if (o.lr) j["lr"] = *o.lr;
  if (o.batch_size) j["batch_size"] = *o.batch_size;
  if (o.max_epochs) j["max_epochs"] = *o.max_epochs;
  if (o.patience) j["patience"] = *o.patience;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

LabeledDataset load_required(const std::filesystem::path& path, const char* hint) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorCode::Io, path.string() + " not found; run '" + std::string(hint) + "' first");
  return load_dataset(path);
}

NormStats read_normalization(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, path.string() + " not found; run 'prepare' first");
  NormStats s;
  try {
    const auto j = json::parse(read_text(path));
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto std = j.at("std").get<std::vector<double>>();
    if (mean.size() != kLeads || std.size() != kLeads) throw Error(ErrorCode::Format, "expected 12 values");
    std::copy(mean.begin(), mean.end(), s.mean.begin());
    std::copy(std.begin(), std.end(), s.std.begin());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
  return s;
}

std::string counts_csv(const std::array<std::size_t, kNumClasses>& counts) {
  std::ostringstream out;
  out << "class,count\n";
  for (auto c : kAllSuperclasses) out << superclass_name(c) << ',' << counts[class_index(c)] << '\n';
  return out.str();
}

// Published single-label class counts of the PTB-XL superclass table.
constexpr std::array<std::size_t, kNumClasses> kReferenceClassCounts = {7293, 4103, 3869, 3790, 2782};

std::string census_csv(const ClassCensus& census) {
  std::ostringstream out;
  out << "class,multi_label,single_label,reference\n";
  for (auto c : kAllSuperclasses) {
    const auto i = class_index(c);
    out << superclass_name(c) << ',' << census.multi_label[i] << ',' << census.single_label[i] << ','
        << kReferenceClassCounts[i] << '\n';
  }
  out << "total_records," << census.total_records << ",,\n";
  out << "unlabeled," << census.unlabeled << ",,\n";
  out << "multi_label_records," << census.multi_label_records << ",,\n";
  return out.str();
}

std::string split_manifest(const DatasetSplit& split) {
  std::ostringstream out;
  out << "ecg_id,split,label,fold\n";
  const std::pair<const char*, const LabeledDataset*> parts[] = {
      {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
  for (const auto& [name, ds] : parts) {
    for (const auto& r : ds->records)
      out << r.ecg_id << ',' << name << ',' << superclass_name(r.label) << ',' << r.strat_fold << '\n';
  }
  return out.str();
}

bool is_classical(const std::string& model) {
  return model == "decision_tree" || model == "random_forest" || model == "logistic_regression";
}

models::TrainConfig neural_config(const HarnessConfig& cfg, const std::string& model) {
  const NeuralOverrides& o = model == "simple_cnn" ? cfg.models.simple_cnn
                             : model == "lstm_net" ? cfg.models.lstm_net
                                                   : cfg.models.ecg_lens;
  models::TrainConfig tc = cfg.train;
  if (o.lr) tc.lr = *o.lr;
  if (o.batch_size) tc.batch_size = *o.batch_size;
  if (o.max_epochs) tc.max_epochs = *o.max_epochs;
  if (o.patience) tc.patience = *o.patience;
  tc.seed = model_seed(cfg.seed, model);
  return tc;
}

LabeledDataset training_set(const HarnessConfig& cfg, const Paths& paths) {
  if (cfg.augment.enabled) return load_required(paths.augmented_train(), "augment");
  return load_required(paths.split_file("train"), "prepare");
}

std::vector<int> labels_of(const LabeledDataset& ds) {
  std::vector<int> y;
  y.reserve(ds.size());
  for (const auto& r : ds.records) y.push_back(class_index(r.label));
  return y;
}

json metrics_json(const std::string& model, const metrics::MetricsReport& r) {
  json per_class = json::array();
  for (auto c : kAllSuperclasses) {
    const auto i = static_cast<std::size_t>(class_index(c));
    const auto& s = r.per_class[i];
    per_class.push_back({{"class", std::string(superclass_name(c))},
                         {"precision", s.precision},
                         {"recall", s.recall},
                         {"f1", s.f1},
                         {"roc_auc", r.per_class_auc[i]},
                         {"precision_undefined", s.precision_undefined},
                         {"recall_undefined", s.recall_undefined},
                         {"f1_undefined", s.f1_undefined}});
  }
  json skipped = json::array();
  for (int c : r.auc_skipped_classes) skipped.push_back(std::string(superclass_name(superclass_from_index(c))));
  json cm = json::array();
  for (const auto& row : r.confusion.counts) cm.push_back(row);
  return {{"model", model},
          {"samples", r.samples},
          {"averaging", r.averaging},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"roc_auc", r.roc_auc},
          {"per_class", per_class},
          {"auc_skipped_classes", skipped},
          {"confusion", cm}};
}

metrics::NamedReports pick(const std::map<std::string, metrics::MetricsReport>& all,
                           const std::vector<const char*>& order) {
  metrics::NamedReports out;
  for (const char* name : order) {
    auto it = all.find(name);
    if (it != all.end()) out.emplace_back(display_name(name), it->second);
  }
  return out;
}

metrics::MetricsReport reference(double acc, double auc, double f1, double prec, double rec) {
  metrics::MetricsReport r;
  r.accuracy = acc / 100.0;
  r.roc_auc = auc / 100.0;
  r.f1 = f1 / 100.0;
  r.precision = prec / 100.0;
  r.recall = rec / 100.0;
  return r;
}

const std::vector<const char*> kClassicalOrder = {"random_forest", "decision_tree", "logistic_regression"};
const std::vector<const char*> kDeepOrder = {"ecg_lens", "lstm_net", "simple_cnn"};

}  // namespace

HarnessConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("invalid JSON: ") + e.what());
  }
  HarnessConfig cfg;
  ObjectReader top(root, "");
  std::string out_dir = cfg.output_dir.string();
  top.read("output_dir", out_dir);
  cfg.output_dir = out_dir;
  top.read("seed", cfg.seed);

  section(top, "dataset", [&](ObjectReader& r) {
    r.read("source", cfg.dataset.source);
    r.read("root", cfg.dataset.root);
    r.read("metadata_csv", cfg.dataset.metadata_csv);
    r.read("statements_csv", cfg.dataset.statements_csv);
    section(r, "synthetic", [&](ObjectReader& s) {
      s.read("train", cfg.dataset.synthetic.train);
      s.read("val", cfg.dataset.synthetic.val);
      s.read("test", cfg.dataset.synthetic.test);
      s.read("noise", cfg.dataset.synthetic.noise);
    });
  });

  section(top, "split", [&](ObjectReader& r) {
    if (const auto* v = r.find("train_folds")) {
      if (!v->is_array()) config_error("split.train_folds must be an array of integers");
      cfg.split.train_folds.clear();
      for (const auto& f : *v) {
        if (!f.is_number_integer()) config_error("split.train_folds must be an array of integers");
        if (!cfg.split.train_folds.insert(f.get<int>()).second)
          config_error("split.train_folds lists fold " + std::to_string(f.get<int>()) + " twice");
      }
    }
    r.read("val_fold", cfg.split.val_fold);
    r.read("test_fold", cfg.split.test_fold);
  });

  section(top, "augment", [&](ObjectReader& r) {
    r.read("enabled", cfg.augment.enabled);
    if (const auto* v = r.find("add_per_class")) {
      ObjectReader counts(*v, "augment.add_per_class");
      std::map<Superclass, std::size_t> add;
      for (const auto& [key, value] : v->items()) {
        const auto cls = parse_superclass(key);
        if (!cls) config_error("unknown class '" + key + "' in augment.add_per_class");
        std::uint64_t n = 0;
        counts.read(key, n);
        add[*cls] = static_cast<std::size_t>(n);
      }
      cfg.augment.add_per_class = add;
    }
    r.read("gain_low", cfg.augment.gain_low);
    r.read("gain_high", cfg.augment.gain_high);
    r.read("noise_scale", cfg.augment.noise_scale);
    r.read("levels", cfg.augment.levels);
    r.read("wavelet", cfg.augment.wavelet);
  });

  section(top, "train", [&](ObjectReader& r) {
    r.read("lr", cfg.train.lr);
    r.read("batch_size", cfg.train.batch_size);
    r.read("max_epochs", cfg.train.max_epochs);
    r.read("patience", cfg.train.patience);
  });

  section(top, "models", [&](ObjectReader& r) {
    section(r, "decision_tree", [&](ObjectReader& m) { read_tree(m, cfg.models.decision_tree); });
    section(r, "random_forest", [&](ObjectReader& m) {
      m.read("n_trees", cfg.models.forest_trees);
      read_tree(m, cfg.models.forest_tree);
      m.read("features_per_split", cfg.models.forest_features_per_split);
      m.read("bootstrap", cfg.models.forest_bootstrap);
    });
    section(r, "logistic_regression", [&](ObjectReader& m) {
      m.read("lr", cfg.models.logistic.lr);
      m.read("epochs", cfg.models.logistic.epochs);
      m.read("batch_size", cfg.models.logistic.batch);
      m.read("l2", cfg.models.logistic.l2);
    });
    section(r, "simple_cnn", [&](ObjectReader& m) { read_neural(m, cfg.models.simple_cnn); });
    section(r, "lstm_net", [&](ObjectReader& m) { read_neural(m, cfg.models.lstm_net); });
    section(r, "ecg_lens", [&](ObjectReader& m) {
      read_neural(m, cfg.models.ecg_lens);
      m.read("width_scale", cfg.models.ecg_lens_width_scale);
    });
  });
  top.finish();
  return cfg;
}

HarnessConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::Io, "config file " + path.string() + " not found");
  return parse_config(read_text(path));
}

std::string config_to_json(const HarnessConfig& cfg) {
  json add = json::object();
  for (const auto& [cls, n] : cfg.augment.add_per_class) add[std::string(superclass_name(cls))] = n;
  json forest = tree_json(cfg.models.forest_tree);
  forest["n_trees"] = cfg.models.forest_trees;
  forest["features_per_split"] = cfg.models.forest_features_per_split;
  forest["bootstrap"] = cfg.models.forest_bootstrap;
  json lens = neural_json(cfg.models.ecg_lens);
  lens["width_scale"] = cfg.models.ecg_lens_width_scale;
  json j = {
      {"output_dir", cfg.output_dir.string()},
      {"seed", cfg.seed},
      {"dataset",
       {{"source", cfg.dataset.source},
        {"root", cfg.dataset.root},
        {"metadata_csv", cfg.dataset.metadata_csv},
        {"statements_csv", cfg.dataset.statements_csv},
        {"synthetic",
         {{"train", cfg.dataset.synthetic.train},
          {"val", cfg.dataset.synthetic.val},
          {"test", cfg.dataset.synthetic.test},
          {"noise", cfg.dataset.synthetic.noise}}}}},
      {"split",
       {{"train_folds", cfg.split.train_folds}, {"val_fold", cfg.split.val_fold}, {"test_fold", cfg.split.test_fold}}},
      {"augment",
       {{"enabled", cfg.augment.enabled},
        {"add_per_class", add},
        {"gain_low", cfg.augment.gain_low},
        {"gain_high", cfg.augment.gain_high},
        {"noise_scale", cfg.augment.noise_scale},
        {"levels", cfg.augment.levels},
        {"wavelet", cfg.augment.wavelet}}},
      {"train",
       {{"lr", cfg.train.lr},
        {"batch_size", cfg.train.batch_size},
        {"max_epochs", cfg.train.max_epochs},
        {"patience", cfg.train.patience}}},
      {"models",
       {{"decision_tree", tree_json(cfg.models.decision_tree)},
        {"random_forest", forest},
        {"logistic_regression",
         {{"lr", cfg.models.logistic.lr},
          {"epochs", cfg.models.logistic.epochs},
          {"batch_size", cfg.models.logistic.batch},
          {"l2", cfg.models.logistic.l2}}},
        {"simple_cnn", neural_json(cfg.models.simple_cnn)},
        {"lstm_net", neural_json(cfg.models.lstm_net)},
        {"ecg_lens", lens}}}};
  return j.dump(2) + "\n";
}

void apply_environment(HarnessConfig& cfg) {
  if (const char* root = std::getenv(kDataRootEnv); root && *root) cfg.dataset.root = root;
}

void validate(const HarnessConfig& cfg) {
  if (cfg.output_dir.empty()) config_error("output_dir must not be empty");
  if (cfg.dataset.source == "synthetic") {
    validate(cfg.dataset.synthetic);
  } else if (cfg.dataset.source == "ptbxl") {
    if (cfg.dataset.root.empty())
      config_error("dataset.root is required for source 'ptbxl' (or set " + std::string(kDataRootEnv) + ")");
  } else {
    config_error("dataset.source must be 'synthetic' or 'ptbxl', got '" + cfg.dataset.source + "'");
  }
  validate_split(cfg.split);
  swt::AugmentParams ap;
  ap.gain_low = cfg.augment.gain_low;
  ap.gain_high = cfg.augment.gain_high;
  ap.noise_scale = cfg.augment.noise_scale;
  ap.levels = cfg.augment.levels;
  ap.wavelet = cfg.augment.wavelet;
  swt::validate(ap);
  models::validate(cfg.train);
  classical::validate(cfg.models.decision_tree);
  classical::validate(cfg.models.forest_tree);
  if (cfg.models.forest_trees < 1) config_error("models.random_forest.n_trees must be >= 1");
  if (cfg.models.forest_features_per_split < 0)
    config_error("models.random_forest.features_per_split must be >= 0");
  const auto& lp = cfg.models.logistic;
  if (!(lp.lr > 0.0) || lp.epochs < 1 || lp.batch < 1 || !(lp.l2 >= 0.0))
    config_error("models.logistic_regression needs lr > 0, epochs >= 1, batch_size >= 1, l2 >= 0");
  for (const char* m : {"simple_cnn", "lstm_net", "ecg_lens"}) models::validate(neural_config(cfg, m));
  models::build_ecg_lens(cfg.models.ecg_lens_width_scale);
}

const std::array<std::string, 6>& model_names() {
  static const std::array<std::string, 6> names = {"decision_tree", "random_forest", "logistic_regression",
                                                   "simple_cnn",    "lstm_net",      "ecg_lens"};
  return names;
}

bool is_model_name(const std::string& name) {
  for (const auto& n : model_names())
    if (n == name) return true;
  return false;
}

std::string display_name(const std::string& model) {
  static const std::map<std::string, std::string> names = {
      {"decision_tree", "DT"}, {"random_forest", "RF"}, {"logistic_regression", "LR"},
      {"simple_cnn", "CNN"},   {"lstm_net", "LSTM"},    {"ecg_lens", "ECG-Lens"}};
  auto it = names.find(model);
  return it == names.end() ? model : it->second;
}

std::uint64_t model_seed(std::uint64_t seed, const std::string& model) { return derive_seed(seed, {fnv1a64(model)}); }

classical::FeatureMatrix to_features(const LabeledDataset& normalized) {
  classical::FeatureMatrix x(normalized.size(), kSignalValues);
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto& s = normalized.records[i].signal.samples;
    auto row = x.row(i);
    for (std::size_t j = 0; j < kSignalValues; ++j) row[j] = static_cast<float>(s[j]);
  }
  return x;
}

PrepareResult cmd_prepare(const HarnessConfig& cfg) {
  validate(cfg);
  const Paths paths{cfg.output_dir};
  LabeledDataset all;
  std::optional<ClassCensus> census;
  if (cfg.dataset.source == "synthetic") {
    SyntheticSpec spec = cfg.dataset.synthetic;
    spec.seed = derive_seed(cfg.seed, {fnv1a64("synthetic")});
    all = generate_synthetic(spec);
  } else {
    const std::filesystem::path root = cfg.dataset.root;
    const auto metas = parse_metadata(root / cfg.dataset.metadata_csv);
    const auto statements = parse_statement_map(root / cfg.dataset.statements_csv);
    census = count_classes(metas, statements);
    all = build_dataset(metas, statements, root);
  }
  const auto split = split_by_fold(all, cfg.split);
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw Error(ErrorCode::Data, "prepare: a split is empty (train " + std::to_string(split.train.size()) + ", val " +
                                     std::to_string(split.val.size()) + ", test " + std::to_string(split.test.size()) +
                                     ")");
  const auto stats = fit_normalizer(split.train);

  save_dataset(split.train, paths.split_file("train"));
  save_dataset(split.val, paths.split_file("val"));
  save_dataset(split.test, paths.split_file("test"));
  write_text(paths.normalization(), json({{"mean", stats.mean}, {"std", stats.std}}).dump(2) + "\n");
  write_text(paths.prepared() / "split_manifest.csv", split_manifest(split));
  write_text(paths.prepared() / "class_counts.csv", counts_csv(all.class_counts()));
  if (census) write_text(paths.prepared() / "class_census.csv", census_csv(*census));
  write_text(paths.root / "config.json", config_to_json(cfg));

  PrepareResult r;
  r.train = split.train.size();
  r.val = split.val.size();
  r.test = split.test.size();
  r.train_counts = split.train.class_counts();
  return r;
}

AugmentResult cmd_augment(const HarnessConfig& cfg) {
  validate(cfg);
  const Paths paths{cfg.output_dir};
  const auto train = load_required(paths.split_file("train"), "prepare");
  swt::AugmentParams ap;
  ap.gain_low = cfg.augment.gain_low;
  ap.gain_high = cfg.augment.gain_high;
  ap.noise_scale = cfg.augment.noise_scale;
  ap.levels = cfg.augment.levels;
  ap.wavelet = cfg.augment.wavelet;
  ap.seed = derive_seed(cfg.seed, {fnv1a64("augment")});
  const auto balanced = swt::balance_classes(train, cfg.augment.add_per_class, ap);
  save_dataset(balanced, paths.augmented_train());

  const auto before = train.class_counts();
  const auto after = balanced.class_counts();
  std::ostringstream manifest;
  manifest << "class,original,added,total\n";
  for (auto c : kAllSuperclasses) {
    const auto i = class_index(c);
    manifest << superclass_name(c) << ',' << before[i] << ',' << after[i] - before[i] << ',' << after[i] << '\n';
  }
  manifest << "ALL," << train.size() << ',' << balanced.size() - train.size() << ',' << balanced.size() << '\n';
  write_text(paths.augmented_train().parent_path() / "augment_manifest.csv", manifest.str());
  return {train.size(), balanced.size(), after};
}

TrainOutcome cmd_train(const HarnessConfig& cfg, const std::string& model) {
  if (!is_model_name(model)) {
    std::string list;
    for (const auto& n : model_names()) list += (list.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::Usage, "unknown model '" + model + "'; expected one of: " + list);
  }
  validate(cfg);
  const Paths paths{cfg.output_dir};
  const auto stats = read_normalization(paths.normalization());
  const auto train = normalize(training_set(cfg, paths), stats);
  const auto seed = model_seed(cfg.seed, model);

  models::Checkpoint ckpt;
  TrainOutcome outcome;
  if (is_classical(model)) {
    const auto x = to_features(train);
    const auto y = labels_of(train);
    Rng rng(seed);
    ckpt.architecture = model;
    if (model == "decision_tree") {
      ckpt.model = classical::fit_tree(x, y, cfg.models.decision_tree, rng);
    } else if (model == "random_forest") {
      classical::ForestOptions opt;
      opt.bootstrap = cfg.models.forest_bootstrap;
      opt.features_per_split = cfg.models.forest_features_per_split;
      ckpt.model = classical::fit_forest(x, y, cfg.models.forest_trees, cfg.models.forest_tree, rng, opt);
    } else {
      ckpt.model = classical::fit_logistic(x, y, cfg.models.logistic, rng);
    }
  } else {
    const auto val = normalize(load_required(paths.split_file("val"), "prepare"), stats);
    const auto arch = *models::parse_architecture(model);
    const auto spec = models::build_model(arch, cfg.models.ecg_lens_width_scale);
    auto result = models::train(spec, models::to_tensor_dataset(train), models::to_tensor_dataset(val),
                                neural_config(cfg, model));
    ckpt = std::move(result.checkpoint);
    outcome.epochs = result.history.size();
    outcome.best_epoch = result.best_epoch;
    write_text(paths.model_dir(model) / "history.csv", models::history_csv(result.history));
  }
  ckpt.normalization = stats;
  ckpt.metadata["model"] = model;
  ckpt.metadata["seed"] = std::to_string(seed);
  ckpt.metadata["train_records"] = std::to_string(train.size());
  ckpt.metadata["augmented"] = cfg.augment.enabled ? "true" : "false";
  ckpt.metadata["inputs"] = "per-lead standardized";
  models::save_checkpoint(ckpt, paths.checkpoint(model));
  outcome.checkpoint = paths.checkpoint(model);
  return outcome;
}

metrics::MetricsReport cmd_evaluate(const HarnessConfig& cfg, const std::string& model,
                                    const std::optional<std::filesystem::path>& checkpoint) {
  if (!is_model_name(model)) throw Error(ErrorCode::Usage, "unknown model '" + model + "'");
  validate(cfg);
  const Paths paths{cfg.output_dir};
  const auto ckpt_path = checkpoint.value_or(paths.checkpoint(model));
  if (!std::filesystem::exists(ckpt_path))
    throw Error(ErrorCode::Io, ckpt_path.string() + " not found; run 'train --model " + model + "' first");
  const auto ckpt = models::load_checkpoint(ckpt_path, model);
  if (!ckpt.normalization) throw Error(ErrorCode::Format, ckpt_path.string() + ": checkpoint lacks normalization");
  const auto test = normalize(load_required(paths.split_file("test"), "prepare"), *ckpt.normalization);
  const auto y = labels_of(test);

  std::vector<double> scores(test.size() * kNumClasses);
  if (is_classical(model)) {
    const auto x = to_features(test);
    for (std::size_t i = 0; i < test.size(); ++i) {
      classical::Prediction p;
      if (const auto* tree = std::get_if<classical::DecisionTree>(&ckpt.model)) {
        p = classical::predict_tree(*tree, x.row(i));
      } else if (const auto* forest = std::get_if<classical::ForestModel>(&ckpt.model)) {
        p = classical::predict_forest(*forest, x.row(i));
      } else {
        p = classical::predict_logistic(std::get<classical::LogisticModel>(ckpt.model), x.row(i));
      }
      std::copy(p.probabilities.begin(), p.probabilities.end(), scores.begin() + static_cast<std::ptrdiff_t>(i * kNumClasses));
    }
  } else {
    const auto probs = models::predict(ckpt, models::to_tensor_dataset(test).x);
    std::transform(probs.data.begin(), probs.data.end(), scores.begin(), [](float v) { return static_cast<double>(v); });
  }
  const auto report = metrics::evaluate(y, scores);

  const auto dir = paths.model_dir(model);
  write_text(paths.metrics(model), metrics_json(model, report).dump(2) + "\n");
  write_text(dir / "confusion.txt", metrics::render_confusion(report.confusion, metrics::DocFormat::Text));
  write_text(dir / "confusion.md", metrics::render_confusion(report.confusion, metrics::DocFormat::Markdown));
  write_text(dir / "confusion.csv", metrics::render_confusion(report.confusion, metrics::DocFormat::Csv));
  write_text(dir / "confusion_counts.csv", metrics::confusion_counts_csv(report.confusion));
  return report;
}

metrics::NamedReports cmd_benchmark(const HarnessConfig& cfg) {
  validate(cfg);
  cmd_prepare(cfg);
  if (cfg.augment.enabled) cmd_augment(cfg);
  std::map<std::string, metrics::MetricsReport> all;
  metrics::NamedReports combined;
  for (const auto& model : model_names()) {
    cmd_train(cfg, model);
    all[model] = cmd_evaluate(cfg, model);
    combined.emplace_back(model, all[model]);
  }
  const Paths paths{cfg.output_dir};
  const auto classical = pick(all, kClassicalOrder);
  const auto deep = pick(all, kDeepOrder);
  for (const auto& [name, reports] : {std::pair{"classical", classical}, std::pair{"deep", deep}}) {
    write_text(paths.benchmark() / (std::string(name) + ".md"),
               metrics::render_benchmark(reports, metrics::DocFormat::Markdown));
    write_text(paths.benchmark() / (std::string(name) + ".txt"),
               metrics::render_benchmark(reports, metrics::DocFormat::Text));
  }
  write_text(paths.benchmark() / "benchmark.csv", metrics::render_benchmark_csv(combined));
  return combined;
}

metrics::MetricsReport read_metrics_json(const std::filesystem::path& path) {
  metrics::MetricsReport r;
  try {
    const auto j = json::parse(read_text(path));
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.roc_auc = j.at("roc_auc").get<double>();
    r.samples = j.at("samples").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
  return r;
}

std::filesystem::path cmd_report(const HarnessConfig& cfg) {
  validate(cfg);
  const Paths paths{cfg.output_dir};
  std::map<std::string, metrics::MetricsReport> all;
  for (const auto& model : model_names()) {
    if (std::filesystem::exists(paths.metrics(model))) all[model] = read_metrics_json(paths.metrics(model));
  }
  if (all.empty()) throw Error(ErrorCode::Io, "report: no evaluated models under " + cfg.output_dir.string());

  const metrics::NamedReports reference_classical = {{"RF", reference(54, 62, 23, 25, 24)},
                                                 {"DT", reference(52, 58, 22, 24, 24)},
                                                 {"LR", reference(40, 50, 21, 21, 22)}};
  const metrics::NamedReports reference_deep = {{"ECG-Lens", reference(80, 90, 78, 80, 76)},
                                            {"LSTM", reference(73, 87, 72, 78, 71)},
                                            {"CNN", reference(71, 85, 69, 73, 66)}};
  std::ostringstream md;
  md << "# Benchmark report\n\n";
  md << "Dataset source: " << cfg.dataset.source << ", seed " << cfg.seed << ".\n\n";
  const auto census = paths.prepared() / "class_census.csv";
  const auto counts = paths.prepared() / "class_counts.csv";
  if (std::filesystem::exists(census) || std::filesystem::exists(counts)) {
    const auto rows = csv::read_file(std::filesystem::exists(census) ? census : counts);
    md << "## Class distribution\n\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      md << '|';
      for (const auto& f : rows[i]) md << ' ' << f << " |";
      md << '\n';
      if (i == 0) {
        md << '|';
        for (std::size_t k = 0; k < rows[0].size(); ++k) md << " --- |";
        md << '\n';
      }
    }
    md << '\n';
  }
  md << "## Classical models (measured)\n\n"
     << metrics::render_benchmark(pick(all, kClassicalOrder), metrics::DocFormat::Markdown) << '\n';
  md << "## Classical models (published)\n\n"
     << metrics::render_benchmark(reference_classical, metrics::DocFormat::Markdown) << '\n';
  md << "## Deep models (measured)\n\n"
     << metrics::render_benchmark(pick(all, kDeepOrder), metrics::DocFormat::Markdown) << '\n';
  md << "## Deep models (published)\n\n"
     << metrics::render_benchmark(reference_deep, metrics::DocFormat::Markdown) << '\n';
  md << "## Full precision\n\n```\n";
  metrics::NamedReports combined;
  for (const auto& model : model_names()) {
    if (all.count(model)) combined.emplace_back(model, all[model]);
  }
  md << metrics::render_benchmark_csv(combined) << "```\n";
  write_text(paths.report(), md.str());
  return paths.report();
}

}  // namespace ecglens::harness
