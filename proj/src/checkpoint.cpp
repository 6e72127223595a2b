#include "earcount/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "earcount/hash.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace earcount::nn {

namespace {

using json = nlohmann::json;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw CheckpointError("cannot write " + path.string());
  }
  template <typename T>
  void put(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), n); }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void finish() {
    out_.flush();
    if (!out_) throw CheckpointError("write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw CheckpointError("cannot open " + path.string());
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CheckpointError("truncated checkpoint");
  }
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 26)) throw CheckpointError("implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
};

NamedArray to_array(const std::string& name, const Shape& shape, const Vector<float>& v) {
  return {name, shape, std::vector<float>(v.data(), v.data() + v.size())};
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["input_shape"] = cfg.input_shape;
  j["block_channels"] = cfg.block_channels;
  j["dense_width"] = cfg.dense_width;
  j["leaky_slope"] = cfg.leaky_slope;
  j["dropout_p"] = cfg.dropout_p;
  j["num_outputs"] = cfg.num_outputs;
  j["seed"] = cfg.seed;
  j["zero_head"] = cfg.zero_head;
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ModelConfig cfg;
    cfg.input_shape = j.at("input_shape").get<std::array<int, 3>>();
    cfg.block_channels = j.at("block_channels").get<std::vector<int>>();
    cfg.dense_width = j.at("dense_width").get<int>();
    cfg.leaky_slope = j.at("leaky_slope").get<double>();
    cfg.dropout_p = j.at("dropout_p").get<double>();
    cfg.num_outputs = j.at("num_outputs").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.zero_head = j.value("zero_head", false);
    return cfg;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad model config: ") + e.what());
  }
}

Checkpoint make_checkpoint(const Model<float>& model, double best_val_r2, int epoch,
                           const AdamState<float>* optimizer) {
  Checkpoint c;
  c.config = model.config();
  for (const auto& p : model.parameters()) {
    c.arrays.push_back(to_array(p.name, p.tensor.shape(), p.tensor.value()));
  }
  for (const auto& b : model.buffers()) {
    c.arrays.push_back(to_array(b.name, {b.values->size()}, *b.values));
  }
  if (optimizer) c.optimizer = *optimizer;
  c.best_val_r2 = best_val_r2;
  c.epoch = epoch;
  return c;
}

void load_into(Model<float>& model, const Checkpoint& ckpt) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : ckpt.arrays) {
    if (!by_name.emplace(a.name, &a).second) {
      throw CheckpointError("duplicate array " + a.name);
    }
  }
  auto find = [&](const std::string& name, const Shape& shape) -> const NamedArray& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks " + name);
    if (it->second->shape != shape) {
      throw CheckpointError("shape mismatch for " + name + ": checkpoint " +
                            to_string(it->second->shape) + ", model " + to_string(shape));
    }
    return *it->second;
  };
  for (auto& p : model.parameters()) {
    const NamedArray& a = find(p.name, p.tensor.shape());
    p.tensor.value() = Eigen::Map<const Vector<float>>(a.data.data(), a.data.size());
  }
  for (auto& b : model.buffers()) {
    const NamedArray& a = find(b.name, {b.values->size()});
    *b.values = Eigen::Map<const Vector<float>>(a.data.data(), a.data.size());
  }
  if (by_name.size() != model.parameters().size() + model.buffers().size()) {
    throw CheckpointError("checkpoint has arrays the model does not know");
  }
}

Model<float> model_from(const Checkpoint& ckpt) {
  Model<float> m(ckpt.config);
  load_into(m, ckpt);
  return m;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.str(model_config_to_json(ckpt.config));
  w.put<double>(ckpt.best_val_r2);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.epoch));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    w.str(a.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(a.shape.size()));
    for (Index d : a.shape) w.put<std::uint64_t>(static_cast<std::uint64_t>(d));
    w.bytes(a.data.data(), a.data.size() * sizeof(float));
  }
  w.put<std::uint8_t>(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(ckpt.optimizer->step));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.optimizer->m.size()));
    for (const auto* moments : {&ckpt.optimizer->m, &ckpt.optimizer->v}) {
      for (const auto& v : *moments) {
        w.put<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
        w.bytes(v.data(), v.size() * sizeof(float));
      }
    }
  }
  w.finish();
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, 6) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic)");
  }
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::string(magic + 6, 2));
  }
  Checkpoint c;
  c.config = model_config_from_json(r.str());
  c.best_val_r2 = r.get<double>();
  c.epoch = static_cast<int>(r.get<std::uint32_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray a;
    a.name = r.str();
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CheckpointError("implausible array rank");
    std::uint64_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.get<std::uint64_t>();
      a.shape.push_back(static_cast<Index>(dim));
      total *= dim;
    }
    if (total > (1ULL << 32)) throw CheckpointError("implausible array size");
    a.data.resize(total);
    r.bytes(a.data.data(), total * sizeof(float));
    c.arrays.push_back(std::move(a));
  }
  if (r.get<std::uint8_t>() == 1) {
    AdamState<float> opt;
    opt.step = static_cast<long>(r.get<std::uint64_t>());
    const auto n = r.get<std::uint32_t>();
    for (auto* moments : {&opt.m, &opt.v}) {
      for (std::uint32_t i = 0; i < n; ++i) {
        const auto len = r.get<std::uint64_t>();
        if (len > (1ULL << 32)) throw CheckpointError("implausible optimizer state");
        Vector<float> v(static_cast<Index>(len));
        r.bytes(v.data(), len * sizeof(float));
        moments->push_back(std::move(v));
      }
    }
    c.optimizer = std::move(opt);
  }
  if (!r.at_end()) throw CheckpointError(path.string() + ": trailing bytes");
  return c;
}

std::uint64_t probe_hash(Model<float>& model, int batch) {
  const auto& shape = model.config().input_shape;
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Vector<float> v(static_cast<Index>(batch) * shape[0] * shape[1] * shape[2]);
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  const auto x = Tensor<float>::from({batch, shape[0], shape[1], shape[2]}, std::move(v));
  const auto y = model.forward(x, Mode::Eval);
  Fnv1a h;
  h.bytes(y.value().data(), static_cast<std::size_t>(y.size()) * sizeof(float));
  return h.value();
}

}  // namespace earcount::nn
