#include "cleanup/net/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "cleanup/common/errors.hpp"

namespace cleanup::net {
namespace {

constexpr char kMagic[8] = {'C', 'L', 'N', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) throw CorruptionError("checkpoint: truncated " + what);
  return v;
}

nlohmann::json net_to_json(const NetConfig& n) {
  return {{"obs_channels", n.obs_channels}, {"obs_size", n.obs_size}, {"conv_channels", n.conv_channels},
          {"kernel", n.kernel},             {"mlp", n.mlp},           {"lstm", n.lstm},
          {"scalars", n.scalars},           {"actions", n.actions}};
}

NetConfig net_from_json(const nlohmann::json& j) {
  NetConfig n;
  n.obs_channels = j.at("obs_channels");
  n.obs_size = j.at("obs_size");
  n.conv_channels = j.at("conv_channels");
  n.kernel = j.at("kernel");
  n.mlp = j.at("mlp").get<std::vector<int>>();
  n.lstm = j.at("lstm");
  n.scalars = j.at("scalars");
  n.actions = j.at("actions");
  return n;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const ParamLayout layout(ckpt.net);
  if (ckpt.params.size() != layout.total()) throw ConfigError("checkpoint: parameter count mismatch");
  const bool has_acc = !ckpt.accumulators.empty();
  if (has_acc && ckpt.accumulators.size() != layout.total()) {
    throw ConfigError("checkpoint: accumulator count mismatch");
  }
  const nlohmann::json meta = {{"agent_id", ckpt.agent_id},
                               {"condition", ckpt.condition},
                               {"alpha", ckpt.reputation.alpha},
                               {"beta", ckpt.reputation.beta},
                               {"net", net_to_json(ckpt.net)},
                               {"steps_consumed", ckpt.steps_consumed},
                               {"updates", ckpt.updates}};
  const std::string meta_text = meta.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp);
    out.write(kMagic, sizeof(kMagic));
    put_u32(out, Checkpoint::kVersion);
    put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
    const auto count = layout.tensors().size() * (has_acc ? 2 : 1);
    put_u32(out, static_cast<std::uint32_t>(count));
    auto write_tensors = [&](const std::vector<float>& data, const std::string& prefix) {
      for (const auto& t : layout.tensors()) {
        const std::string name = prefix + t.name;
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(out, static_cast<std::uint32_t>(t.rows));
        put_u32(out, static_cast<std::uint32_t>(t.cols));
        out.write(reinterpret_cast<const char*>(data.data() + t.offset),
                  static_cast<std::streamsize>(t.size() * sizeof(float)));
      }
    };
    write_tensors(ckpt.params, "");
    if (has_acc) write_tensors(ckpt.accumulators, "rmsprop/");
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CorruptionError("checkpoint: bad magic in " + path.string());
  }
  const auto version = get_u32(in, "version");
  if (version > Checkpoint::kVersion) {
    throw CorruptionError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string meta_text(get_u32(in, "metadata length"), '\0');
  if (!in.read(meta_text.data(), static_cast<std::streamsize>(meta_text.size()))) {
    throw CorruptionError("checkpoint: truncated metadata");
  }
  Checkpoint ckpt;
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    ckpt.agent_id = meta.at("agent_id");
    ckpt.condition = meta.value("condition", "");
    ckpt.reputation = {meta.at("alpha"), meta.at("beta")};
    ckpt.net = net_from_json(meta.at("net"));
    ckpt.steps_consumed = meta.at("steps_consumed");
    ckpt.updates = meta.at("updates");
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const ParamLayout layout(ckpt.net);
  ckpt.params.assign(layout.total(), 0.0f);
  const auto count = get_u32(in, "tensor count");
  std::vector<char> seen_params(layout.tensors().size(), 0);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name(get_u32(in, "tensor name length"), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw CorruptionError("checkpoint: truncated tensor name");
    }
    const auto rows = get_u32(in, "tensor rows");
    const auto cols = get_u32(in, "tensor cols");
    const bool acc = name.starts_with("rmsprop/");
    const std::string base = acc ? name.substr(8) : name;
    const TensorSpec& spec = layout.find(base);
    if (static_cast<int>(rows) != spec.rows || static_cast<int>(cols) != spec.cols) {
      throw CorruptionError("checkpoint: tensor " + name + " has unexpected shape");
    }
    std::vector<float>& dest = acc ? ckpt.accumulators : ckpt.params;
    if (acc && dest.empty()) dest.assign(layout.total(), 0.0f);
    if (!in.read(reinterpret_cast<char*>(dest.data() + spec.offset),
                 static_cast<std::streamsize>(spec.size() * sizeof(float)))) {
      throw CorruptionError("checkpoint: truncated tensor " + name);
    }
    if (!acc) {
      const auto idx = static_cast<std::size_t>(&spec - layout.tensors().data());
      seen_params[idx] = 1;
    }
  }
  if (std::find(seen_params.begin(), seen_params.end(), 0) != seen_params.end()) {
    throw CorruptionError("checkpoint: missing network tensors in " + path.string());
  }
  return ckpt;
}

std::vector<Checkpoint> load_checkpoint_dir(const std::filesystem::path& dir) {
  std::vector<Checkpoint> out;
  if (!std::filesystem::is_directory(dir)) throw ConfigError("checkpoint: not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("agent_") && name.ends_with(".ckpt")) out.push_back(load_checkpoint(entry.path()));
  }
  std::sort(out.begin(), out.end(), [](const Checkpoint& a, const Checkpoint& b) { return a.agent_id < b.agent_id; });
  if (out.empty()) throw ConfigError("checkpoint: no agent_*.ckpt files in " + dir.string());
  return out;
}

}  // namespace cleanup::net
