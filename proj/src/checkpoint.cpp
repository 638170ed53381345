#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ecglens/models.hpp"

namespace ecglens::models {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'E', 'C', 'G', 'L'};

class Writer {
 public:
  template <typename V>
  void pod(V v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(V));
  }
  void u8(std::uint8_t v) { pod(v); }
  void u32(std::uint32_t v) { pod(v); }
  void u64(std::uint64_t v) { pod(v); }
  void i32(std::int32_t v) { pod(v); }
  void f32(float v) { pod(v); }
  void f64(double v) { pod(v); }
  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void bytes(const std::vector<std::uint8_t>& b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, std::string where)
      : data_(data), size_(size), where_(std::move(where)) {}

  template <typename V>
  V pod() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, data_ + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  std::uint8_t u8() { return pod<std::uint8_t>(); }
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  std::int32_t i32() { return pod<std::int32_t>(); }
  float f32() { return pod<float>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const auto n = count(1);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  /// Element count that must fit in the remaining bytes.
  std::size_t count(std::size_t element_size) {
    const auto n = u64();
    if (element_size && n > (size_ - pos_) / element_size) truncated();
    return static_cast<std::size_t>(n);
  }
  const std::uint8_t* take(std::size_t n) {
    need(n);
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == size_; }
  void expect_done() const {
    if (!done()) throw Error(ErrorCode::Format, "checkpoint: trailing bytes in " + where_);
  }

 private:
  void need(std::size_t n) const {
    if (n > size_ - pos_) truncated();
  }
  [[noreturn]] void truncated() const { throw Error(ErrorCode::Format, "checkpoint truncated in " + where_); }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string where_;
};

void write_tensors(Writer& w, const std::vector<NamedTensor>& tensors) {
  w.u64(tensors.size());
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) w.u64(d);
    for (float v : t.data) w.f32(v);
  }
}

std::vector<NamedTensor> read_tensors(Reader& r) {
  std::vector<NamedTensor> out(r.count(8));
  for (auto& [name, t] : out) {
    name = r.str();
    const auto rank = r.u32();
    if (rank > 8) throw Error(ErrorCode::Format, "checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
    nn::Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& d : shape) {
      d = r.u64();
      total *= d;
      if (total > (std::uint64_t{1} << 34)) throw Error(ErrorCode::Format, "checkpoint: tensor '" + name + "' too large");
    }
    const auto* p = r.take(total * sizeof(float));
    t = nn::Tensor<float>(shape);
    std::memcpy(t.data.data(), p, total * sizeof(float));
  }
  return out;
}

void write_spec(Writer& w, const ModelSpec& s) {
  w.u8(static_cast<std::uint8_t>(s.architecture));
  w.f64(s.width_scale);
  w.u64(s.input_length);
  w.u64(s.input_channels);
  w.i32(s.num_classes);
  w.u64(s.layers.size());
  for (const auto& l : s.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.i32(l.units);
    w.i32(l.kernel);
    w.i32(l.window);
    w.f64(l.rate);
    w.u8(l.return_sequences);
    w.u8(l.floor_mode);
  }
}

ModelSpec read_spec(Reader& r) {
  ModelSpec s;
  const auto arch = r.u8();
  if (arch > static_cast<std::uint8_t>(Architecture::EcgLens))
    throw Error(ErrorCode::Format, "checkpoint: unknown architecture code " + std::to_string(arch));
  s.architecture = static_cast<Architecture>(arch);
  s.width_scale = r.f64();
  s.input_length = r.u64();
  s.input_channels = r.u64();
  s.num_classes = r.i32();
  s.layers.resize(r.count(23));
  for (auto& l : s.layers) {
    const auto kind = r.u8();
    if (kind < 1 || kind > 9) throw Error(ErrorCode::Format, "checkpoint: unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.units = r.i32();
    l.kernel = r.i32();
    l.window = r.i32();
    l.rate = r.f64();
    l.return_sequences = r.u8() != 0;
    l.floor_mode = r.u8() != 0;
  }
  return s;
}

void write_tree(Writer& w, const classical::DecisionTree& t) {
  w.u64(t.n_features);
  w.u64(t.nodes.size());
  for (const auto& n : t.nodes) {
    w.i32(n.feature);
    w.f64(n.threshold);
    w.i32(n.left);
    w.i32(n.right);
    for (auto c : n.class_counts) w.u32(c);
  }
}

classical::DecisionTree read_tree(Reader& r) {
  classical::DecisionTree t;
  t.n_features = r.u64();
  t.nodes.resize(r.count(40));
  for (auto& n : t.nodes) {
    n.feature = r.i32();
    n.threshold = r.f64();
    n.left = r.i32();
    n.right = r.i32();
    for (auto& c : n.class_counts) c = r.u32();
  }
  const auto size = static_cast<int>(t.nodes.size());
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) continue;
    if (n.feature >= static_cast<int>(t.n_features) || n.left <= 0 || n.left >= size || n.right <= 0 ||
        n.right >= size)
      throw Error(ErrorCode::Format, "checkpoint: malformed tree node");
  }
  return t;
}

void write_forest(Writer& w, const classical::ForestModel& f) {
  w.i32(f.n_features_per_split);
  w.u64(f.seed);
  w.u8(f.bootstrap);
  w.u64(f.trees.size());
  for (const auto& t : f.trees) write_tree(w, t);
}

classical::ForestModel read_forest(Reader& r) {
  classical::ForestModel f;
  f.n_features_per_split = r.i32();
  f.seed = r.u64();
  f.bootstrap = r.u8() != 0;
  f.trees.resize(r.count(16));
  for (auto& t : f.trees) t = read_tree(r);
  return f;
}

void write_logistic(Writer& w, const classical::LogisticModel& m) {
  w.u64(m.n_features);
  w.u64(m.weights.size());
  for (double v : m.weights) w.f64(v);
  for (double b : m.biases) w.f64(b);
}

classical::LogisticModel read_logistic(Reader& r) {
  classical::LogisticModel m;
  m.n_features = r.u64();
  m.weights.resize(r.count(8));
  for (auto& v : m.weights) v = r.f64();
  for (auto& b : m.biases) b = r.f64();
  if (m.weights.size() != m.n_features * kNumClasses)
    throw Error(ErrorCode::Format, "checkpoint: logistic weight count does not match feature count");
  return m;
}

void section(Writer& out, std::uint32_t& count, const char (&tag)[5], Writer&& body) {
  out.buffer().insert(out.buffer().end(), tag, tag + 4);
  out.u64(body.buffer().size());
  out.bytes(body.buffer());
  ++count;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer sections;
  std::uint32_t count = 0;
  {
    Writer w;
    w.str(ckpt.architecture);
    section(sections, count, "ARCH", std::move(w));
  }
  if (const auto* nm = std::get_if<NeuralModel>(&ckpt.model)) {
    Writer spec, parm, bufs;
    write_spec(spec, nm->spec);
    write_tensors(parm, nm->parameters);
    write_tensors(bufs, nm->buffers);
    section(sections, count, "SPEC", std::move(spec));
    section(sections, count, "PARM", std::move(parm));
    section(sections, count, "BUFS", std::move(bufs));
  } else if (const auto* tree = std::get_if<classical::DecisionTree>(&ckpt.model)) {
    Writer w;
    write_tree(w, *tree);
    section(sections, count, "TREE", std::move(w));
  } else if (const auto* forest = std::get_if<classical::ForestModel>(&ckpt.model)) {
    Writer w;
    write_forest(w, *forest);
    section(sections, count, "FRST", std::move(w));
  } else {
    Writer w;
    write_logistic(w, std::get<classical::LogisticModel>(ckpt.model));
    section(sections, count, "LOGR", std::move(w));
  }
  if (ckpt.normalization) {
    Writer w;
    for (double v : ckpt.normalization->mean) w.f64(v);
    for (double v : ckpt.normalization->std) w.f64(v);
    section(sections, count, "NORM", std::move(w));
  }
  {
    Writer w;
    w.u64(ckpt.history.size());
    for (const auto& h : ckpt.history) {
      w.i32(h.epoch);
      w.f64(h.train_loss);
      w.f64(h.val_loss);
      w.f64(h.train_acc);
      w.f64(h.val_acc);
    }
    section(sections, count, "HIST", std::move(w));
  }
  {
    Writer w;
    w.u64(ckpt.metadata.size());
    for (const auto& [k, v] : ckpt.metadata) {
      w.str(k);
      w.str(v);
    }
    section(sections, count, "META", std::move(w));
  }

  Writer out;
  out.buffer().insert(out.buffer().end(), kMagic, kMagic + 4);
  out.u32(kCheckpointVersion);
  out.u32(count);
  out.bytes(sections.buffer());
  return std::move(out.buffer());
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader header(bytes.data(), bytes.size(), "header");
  const auto* magic = header.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::Format, "checkpoint: bad magic (not a model file)");
  const auto version = header.u32();
  if (version != kCheckpointVersion)
    throw Error(ErrorCode::Format, "checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                                       std::to_string(kCheckpointVersion) + ")");
  const auto n_sections = header.u32();

  Checkpoint ckpt;
  bool have_arch = false, have_model = false;
  std::optional<ModelSpec> spec;
  std::optional<std::vector<NamedTensor>> params, buffers;
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    const std::string tag(reinterpret_cast<const char*>(header.take(4)), 4);
    const auto length = header.u64();
    const auto* body = header.take(static_cast<std::size_t>(length));
    Reader r(body, static_cast<std::size_t>(length), "section " + tag);
    if (tag == "ARCH") {
      ckpt.architecture = r.str();
      have_arch = true;
    } else if (tag == "SPEC") {
      spec = read_spec(r);
    } else if (tag == "PARM") {
      params = read_tensors(r);
    } else if (tag == "BUFS") {
      buffers = read_tensors(r);
    } else if (tag == "TREE") {
      ckpt.model = read_tree(r);
      have_model = true;
    } else if (tag == "FRST") {
      ckpt.model = read_forest(r);
      have_model = true;
    } else if (tag == "LOGR") {
      ckpt.model = read_logistic(r);
      have_model = true;
    } else if (tag == "NORM") {
      NormStats s;
      for (auto& v : s.mean) v = r.f64();
      for (auto& v : s.std) v = r.f64();
      ckpt.normalization = s;
    } else if (tag == "HIST") {
      ckpt.history.resize(r.count(36));
      for (auto& h : ckpt.history) {
        h.epoch = r.i32();
        h.train_loss = r.f64();
        h.val_loss = r.f64();
        h.train_acc = r.f64();
        h.val_acc = r.f64();
      }
    } else if (tag == "META") {
      const auto n = r.count(16);
      for (std::size_t k = 0; k < n; ++k) {
        auto key = r.str();
        ckpt.metadata[key] = r.str();
      }
    } else {
      continue;  // unknown sections are skipped
    }
    r.expect_done();
  }
  header.expect_done();

  if (!have_arch) throw Error(ErrorCode::Format, "checkpoint: missing ARCH section");
  if (spec) {
    if (!params || !buffers) throw Error(ErrorCode::Format, "checkpoint: neural model without PARM/BUFS");
    ckpt.model = NeuralModel{*spec, std::move(*params), std::move(*buffers)};
    have_model = true;
  }
  if (!have_model) throw Error(ErrorCode::Format, "checkpoint: no model section");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_architecture) {
  auto ckpt = load_checkpoint(path);
  if (ckpt.architecture != expected_architecture)
    throw Error(ErrorCode::Format, path.string() + ": checkpoint holds '" + ckpt.architecture +
                                       "' but '" + expected_architecture + "' was requested");
  return ckpt;
}

}  // namespace ecglens::models
