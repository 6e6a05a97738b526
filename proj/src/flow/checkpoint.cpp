#include "refocus/flow/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <json.hpp>

namespace refocus::flow {
namespace {

constexpr char kMagic[8] = {'R', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string architecture_to_json(const NetArchitecture& arch) {
  nlohmann::json j;
  j["latent_channels"] = arch.latent_channels;
  j["hidden_channels"] = arch.hidden_channels;
  j["hidden_layers"] = arch.hidden_layers;
  j["kernel"] = arch.kernel;
  j["embed_dim"] = arch.embed_dim;
  j["time_dim"] = arch.time_dim;
  j["linear_skip"] = arch.linear_skip;
  return j.dump();
}

NetArchitecture architecture_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NetArchitecture arch;
    arch.latent_channels = j.at("latent_channels").get<int>();
    arch.hidden_channels = j.at("hidden_channels").get<int>();
    arch.hidden_layers = j.at("hidden_layers").get<int>();
    arch.kernel = j.at("kernel").get<int>();
    arch.embed_dim = j.at("embed_dim").get<int>();
    arch.time_dim = j.at("time_dim").get<int>();
    arch.linear_skip = j.at("linear_skip").get<bool>();
    arch.validate();
    return arch;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad architecture descriptor: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

std::string serialize_checkpoint(const ConvVelocityNet& model) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  const std::string desc = architecture_to_json(model.architecture());
  put_u32(out, static_cast<std::uint32_t>(desc.size()));
  out += desc;
  put_u32(out, static_cast<std::uint32_t>(model.architecture().embed_dim));
  const auto& items = model.parameters().items();
  put_u32(out, static_cast<std::uint32_t>(items.size()));
  for (const auto& p : items) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : p.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

ConvVelocityNet deserialize_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.str(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw CheckpointError("checkpoint: bad magic");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t desc_len = in.u32();
  const NetArchitecture arch = architecture_from_json(in.str(desc_len));
  if (in.u32() != static_cast<std::uint32_t>(arch.embed_dim)) {
    throw CheckpointError("checkpoint: d_emb disagrees with the descriptor");
  }
  ConvVelocityNet model(arch);
  auto& params = model.parameters();
  const std::uint32_t count = in.u32();
  if (count != params.items().size()) {
    throw CheckpointError("checkpoint: parameter count does not match the architecture");
  }
  std::set<std::string> seen;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = in.str(in.u32());
    if (!params.contains(name)) throw CheckpointError("checkpoint: unexpected parameter " + name);
    if (!seen.insert(name).second) throw CheckpointError("checkpoint: duplicate parameter " + name);
    Parameter& p = params.get(name);
    const std::uint32_t rank = in.u32();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(in.u32());
    if (shape != p.shape) throw CheckpointError("checkpoint: shape mismatch for " + name);
    for (double& v : p.values) v = std::bit_cast<float>(in.u32());
  }
  if (!in.done()) throw CheckpointError("checkpoint: trailing bytes");
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const ConvVelocityNet& model) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(path.string() + ": write failed");
}

ConvVelocityNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path.string() + ": cannot open checkpoint");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace refocus::flow
