#include "marco/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace marco {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'R', 'C', 'O', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void put(T value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void bytes(const char* data, std::size_t count) { out_.write(data, static_cast<std::streamsize>(count)); }
  void matrix(const ad::Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) put(static_cast<float>(m(r, c)));
    }
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  explicit Reader(std::ifstream& in) : in_(in) {}
  template <typename T>
  T get() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) throw CheckpointError("checkpoint truncated");
    return value;
  }
  std::string string(std::size_t count) {
    std::string s(count, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(count));
    if (!in_) throw CheckpointError("checkpoint truncated");
    return s;
  }
  void matrix(ad::Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(get<float>());
    }
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream& in_;
};

template <typename E>
E checked_enum(std::uint8_t raw, std::uint8_t max, const char* what) {
  if (raw > max) throw CheckpointError(std::string("checkpoint has invalid ") + what);
  return static_cast<E>(raw);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  Writer w(out);
  const Policy& p = ckpt.policy;
  const EncoderConfig& cfg = p.config();
  w.bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.problem()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.kind()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(p.layout()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.encoder_attention));
  w.put<std::int32_t>(cfg.embed_dim);
  w.put<std::int32_t>(cfg.layers);
  w.put<std::int32_t>(cfg.heads);
  w.put<std::int32_t>(cfg.ffn_hidden);
  w.put<double>(cfg.tanh_clip);
  w.put<std::uint64_t>(ckpt.episode);
  w.put<std::int32_t>(ckpt.phase);
  const auto& params = p.params().all();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& param : params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(param.name.size()));
    w.bytes(param.name.data(), param.name.size());
    w.put<std::int32_t>(static_cast<std::int32_t>(param.value.rows()));
    w.put<std::int32_t>(static_cast<std::int32_t>(param.value.cols()));
    w.put<std::uint8_t>(param.trainable ? 1 : 0);
    w.matrix(param.value);
  }
  const OptimizerState& opt = ckpt.optimizer;
  const bool has_moments = opt.first_moment.size() == params.size() && opt.second_moment.size() == params.size();
  w.put<std::uint64_t>(opt.step);
  w.put<std::uint8_t>(has_moments ? 1 : 0);
  if (has_moments) {
    for (const auto& m : opt.first_moment) w.matrix(m);
    for (const auto& v : opt.second_moment) w.matrix(v);
  }
  if (!out) throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  Reader r(in);
  if (r.string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw CheckpointError("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto problem = checked_enum<Problem>(r.get<std::uint8_t>(), 2, "problem");
  const auto kind = checked_enum<PolicyKind>(r.get<std::uint8_t>(), 1, "policy kind");
  const auto layout = checked_enum<FeatureLayout>(r.get<std::uint8_t>(), 2, "feature layout");
  EncoderConfig cfg;
  cfg.encoder_attention = checked_enum<AttentionVariant>(r.get<std::uint8_t>(), 1, "attention variant");
  cfg.embed_dim = r.get<std::int32_t>();
  cfg.layers = r.get<std::int32_t>();
  cfg.heads = r.get<std::int32_t>();
  cfg.ffn_hidden = r.get<std::int32_t>();
  cfg.tanh_clip = r.get<double>();

  Checkpoint ckpt{make_policy_shell(problem, kind, layout, cfg), 0, 0, {}};
  ckpt.episode = r.get<std::uint64_t>();
  ckpt.phase = r.get<std::int32_t>();
  auto& params = ckpt.policy.params().all();
  const auto count = r.get<std::uint32_t>();
  if (count != params.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(count) + " parameters, expected " +
                          std::to_string(params.size()));
  }
  for (auto& param : params) {
    const std::string name = r.string(r.get<std::uint32_t>());
    const auto rows = r.get<std::int32_t>();
    const auto cols = r.get<std::int32_t>();
    if (name != param.name || rows != param.value.rows() || cols != param.value.cols()) {
      throw CheckpointError("checkpoint parameter '" + name + "' does not match expected '" + param.name + "' (" +
                            std::to_string(param.value.rows()) + "x" + std::to_string(param.value.cols()) + ")");
    }
    param.trainable = r.get<std::uint8_t>() != 0;
    r.matrix(param.value);
    if (!param.value.allFinite()) throw CheckpointError("checkpoint parameter '" + name + "' is not finite");
  }
  ckpt.optimizer.step = r.get<std::uint64_t>();
  if (r.get<std::uint8_t>() != 0) {
    for (auto* moments : {&ckpt.optimizer.first_moment, &ckpt.optimizer.second_moment}) {
      for (const auto& param : params) {
        ad::Matrix m(param.value.rows(), param.value.cols());
        r.matrix(m);
        moments->push_back(std::move(m));
      }
    }
  }
  if (!r.at_end()) throw CheckpointError("trailing bytes in checkpoint");
  return ckpt;
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
  save_checkpoint(Checkpoint{policy, 0, 0, {}}, path);
}

Policy load_policy(const std::filesystem::path& path) { return load_checkpoint(path).policy; }

}  // namespace marco
