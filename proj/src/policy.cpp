#include "fdrl/policy.hpp"

#include <algorithm>
#include <cstring>

#include "fdrl/io.hpp"

namespace fdrl {

namespace {

constexpr char kMagic[8] = {'F', 'D', 'R', 'L', 'C', 'K', 'P', 'T'};

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u32(bits);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CorruptionError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

void PolicyConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("policy.vocab_size must be at least 2");
  if (embed_dim <= 0 || num_layers <= 0 || num_heads <= 0 || mlp_ratio <= 0 || max_horizon <= 0) {
    throw ConfigError("policy dimensions must all be positive");
  }
  if (embed_dim % num_heads != 0) {
    throw ConfigError("policy.embed_dim (" + std::to_string(embed_dim) + ") is not divisible by num_heads (" +
                      std::to_string(num_heads) + ")");
  }
  (void)partition();
}

bool ParamInfo::is_weight() const {
  return dims.size() == 2;
}

bool ParamInfo::is_gain() const {
  return ends_with(name, ".gain");
}

ParamLayout::ParamLayout(const PolicyConfig& cfg) : layers_(static_cast<std::size_t>(cfg.num_layers)) {
  const int D = cfg.embed_dim, F = cfg.embed_dim * cfg.mlp_ratio, V = cfg.vocab_size;
  auto add = [&](std::string name, std::vector<int> dims) {
    ParamInfo p{std::move(name), std::move(dims), total_};
    total_ += p.size();
    params_.push_back(std::move(p));
  };
  add("tok_emb", {V + 1, D});
  add("user_emb", {2, D});
  add("pos_emb", {cfg.max_horizon, D});
  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1.gain", {D});
    add(p + "ln1.bias", {D});
    add(p + "attn.qkv.weight", {3 * D, D});
    add(p + "attn.qkv.bias", {3 * D});
    add(p + "attn.out.weight", {D, D});
    add(p + "attn.out.bias", {D});
    add(p + "ln2.gain", {D});
    add(p + "ln2.bias", {D});
    add(p + "mlp.fc.weight", {F, D});
    add(p + "mlp.fc.bias", {F});
    add(p + "mlp.proj.weight", {D, F});
    add(p + "mlp.proj.bias", {D});
  }
  add("ln_f.gain", {D});
  add("ln_f.bias", {D});
  add("head.weight", {V, D});
  add("head.bias", {V});
}

std::size_t ParamLayout::owner(Eigen::Index i) const {
  auto it = std::upper_bound(params_.begin(), params_.end(), i,
                             [](Eigen::Index v, const ParamInfo& p) { return v < p.offset; });
  return static_cast<std::size_t>(std::distance(params_.begin(), it) - 1);
}

PolicyCheckpoint init_policy(const PolicyConfig& cfg) {
  cfg.validate();
  const ParamLayout layout(cfg);
  PolicyCheckpoint ckpt{cfg, std::vector<float>(static_cast<std::size_t>(layout.total_size()), 0.0f)};
  std::mt19937_64 engine(cfg.seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  for (const auto& p : layout.params()) {
    auto* dst = ckpt.parameters.data() + p.offset;
    if (p.is_weight()) {
      for (Eigen::Index k = 0; k < p.size(); ++k) dst[k] = static_cast<float>(normal(engine));
    } else if (p.is_gain()) {
      std::fill(dst, dst + p.size(), 1.0f);
    }
  }
  return ckpt;
}

std::string serialize_checkpoint(const PolicyCheckpoint& ckpt) {
  const ParamLayout layout(ckpt.config);
  if (static_cast<Eigen::Index>(ckpt.parameters.size()) != layout.total_size()) {
    throw ShapeError("checkpoint parameter count does not match its config");
  }
  ByteWriter w;
  const auto& c = ckpt.config;
  w.raw(kMagic, sizeof kMagic);
  w.u32(PolicyCheckpoint::kVersion);
  w.i32(c.vocab_size);
  w.i32(c.embed_dim);
  w.i32(c.num_layers);
  w.i32(c.num_heads);
  w.i32(c.mlp_ratio);
  w.i32(c.max_horizon);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.pad_ids.size()));
  for (TokenId id : c.pad_ids) w.i32(id);
  w.u32(static_cast<std::uint32_t>(layout.count()));
  for (const auto& p : layout.params()) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.raw(p.name.data(), p.name.size());
    w.u32(static_cast<std::uint32_t>(p.dims.size()));
    for (int d : p.dims) w.u32(static_cast<std::uint32_t>(d));
    for (Eigen::Index k = 0; k < p.size(); ++k) w.f32(ckpt.parameters[static_cast<std::size_t>(p.offset + k)]);
  }
  return w.take();
}

PolicyCheckpoint deserialize_checkpoint(const std::string& bytes) {
  ByteReader r(bytes);
  char magic[sizeof kMagic];
  try {
    r.raw(magic, sizeof magic);
  } catch (const CorruptionError&) {
    throw FormatError("not a policy checkpoint (file too short for magic)");
  }
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw FormatError("not a policy checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != PolicyCheckpoint::kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  PolicyConfig c;
  c.vocab_size = r.i32();
  c.embed_dim = r.i32();
  c.num_layers = r.i32();
  c.num_heads = r.i32();
  c.mlp_ratio = r.i32();
  c.max_horizon = r.i32();
  c.seed = r.u64();
  const std::uint32_t npad = r.u32();
  if (npad > static_cast<std::uint32_t>(std::max(c.vocab_size, 0))) throw CorruptionError("pad id count out of range");
  c.pad_ids.resize(npad);
  for (auto& id : c.pad_ids) id = r.i32();
  try {
    c.validate();
  } catch (const Error& e) {
    throw CorruptionError(std::string("checkpoint config invalid: ") + e.what());
  }
  const ParamLayout layout(c);
  if (r.u32() != layout.count()) throw CorruptionError("checkpoint parameter record count mismatch");
  PolicyCheckpoint ckpt{c, std::vector<float>(static_cast<std::size_t>(layout.total_size()))};
  for (const auto& p : layout.params()) {
    const std::uint32_t name_len = r.u32();
    if (name_len != p.name.size()) throw CorruptionError("unexpected record, expected '" + p.name + "'");
    std::string name(name_len, '\0');
    r.raw(name.data(), name_len);
    if (name != p.name) throw CorruptionError("unexpected record '" + name + "', expected '" + p.name + "'");
    const std::uint32_t ndims = r.u32();
    if (ndims != p.dims.size()) throw CorruptionError("rank mismatch for '" + p.name + "'");
    for (int d : p.dims) {
      if (r.u32() != static_cast<std::uint32_t>(d)) throw CorruptionError("shape mismatch for '" + p.name + "'");
    }
    for (Eigen::Index k = 0; k < p.size(); ++k) ckpt.parameters[static_cast<std::size_t>(p.offset + k)] = r.f32();
  }
  if (!r.done()) throw CorruptionError("trailing bytes after checkpoint records");
  return ckpt;
}

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

PolicyCheckpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(read_file(path));
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fdrl
