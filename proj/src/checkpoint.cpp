#include "dmmvh/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "dmmvh/error.hpp"
#include "json.hpp"

namespace dmmvh {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'M', 'M', 'V', 'H', 'C', 'K', '1'};

const char* fusion_name(FusionMode m) { return m == FusionMode::kGated ? "gated" : "concat"; }

FusionMode parse_fusion(const std::string& s) {
  if (s == "gated") return FusionMode::kGated;
  if (s == "concat") return FusionMode::kConcat;
  throw IoError("checkpoint: unknown fusion mode '" + s + "'");
}

void append_table(json& table, std::vector<std::span<const double>>& payload,
                  const ModelParams& p, const std::string& prefix, std::uint64_t& offset) {
  const auto names = p.tensor_names();
  const auto shapes = p.tensor_shapes();
  const auto tensors = p.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    table.push_back({{"name", prefix + names[i]},
                     {"rows", shapes[i].first},
                     {"cols", shapes[i].second},
                     {"offset", offset}});
    payload.push_back(tensors[i]);
    offset += tensors[i].size() * sizeof(double);
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  validate(ckpt.params, ckpt.model);
  json header;
  header["format"] = "dmmvh-checkpoint";
  header["version"] = 1;
  // Empty means every view is active; stored as given so a round trip is exact.
  const std::vector<bool>& active = ckpt.model.active_views;
  header["model"] = {{"view_dims", ckpt.model.view_dims},
                     {"proj_dim", ckpt.model.proj_dim},
                     {"bits", ckpt.model.bits},
                     {"fusion", fusion_name(ckpt.model.fusion)},
                     {"active_views", active}};
  header["seed"] = ckpt.seed;
  header["epoch"] = ckpt.epoch;
  json cfg = json::array();
  for (const auto& [k, v] : ckpt.config) cfg.push_back({k, v});
  header["config"] = cfg;

  json table = json::array();
  std::vector<std::span<const double>> payload;
  std::uint64_t offset = 0;
  append_table(table, payload, ckpt.params, "", offset);
  if (ckpt.optim) {
    const OptimState& s = *ckpt.optim;
    header["optimizer"] = {{"step", s.step},
                           {"lr", s.hyper.lr},
                           {"beta1", s.hyper.beta1},
                           {"beta2", s.hyper.beta2},
                           {"eps", s.hyper.eps},
                           {"weight_decay", s.hyper.weight_decay}};
    append_table(table, payload, s.m, "m.", offset);
    append_table(table, payload, s.v, "v.", offset);
  } else {
    header["optimizer"] = nullptr;
  }
  header["tensors"] = table;

  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto t : payload) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + ": not a checkpoint file");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(path.string() + ": truncated header");
  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Checkpoint ckpt;
  try {
    const json header = json::parse(text);
    if (header.at("format") != "dmmvh-checkpoint" || header.at("version") != 1) {
      throw IoError(path.string() + ": unsupported checkpoint format");
    }
    const json& m = header.at("model");
    ckpt.model.view_dims = m.at("view_dims").get<std::vector<std::size_t>>();
    ckpt.model.proj_dim = m.at("proj_dim").get<std::size_t>();
    ckpt.model.bits = m.at("bits").get<std::size_t>();
    ckpt.model.fusion = parse_fusion(m.at("fusion").get<std::string>());
    ckpt.model.active_views = m.at("active_views").get<std::vector<bool>>();
    validate(ckpt.model);
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.epoch = header.at("epoch").get<std::uint64_t>();
    for (const json& kv : header.at("config")) {
      ckpt.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    }

    ckpt.params = zero_params(ckpt.model);
    std::vector<ModelParams*> targets = {&ckpt.params};
    std::vector<std::string> prefixes = {""};
    const json& opt = header.at("optimizer");
    if (!opt.is_null()) {
      OptimState s;
      s.step = opt.at("step").get<std::uint64_t>();
      s.hyper.lr = opt.at("lr").get<double>();
      s.hyper.beta1 = opt.at("beta1").get<double>();
      s.hyper.beta2 = opt.at("beta2").get<double>();
      s.hyper.eps = opt.at("eps").get<double>();
      s.hyper.weight_decay = opt.at("weight_decay").get<double>();
      s.m = zero_params(ckpt.model);
      s.v = zero_params(ckpt.model);
      ckpt.optim = std::move(s);
      targets.push_back(&ckpt.optim->m);
      targets.push_back(&ckpt.optim->v);
      prefixes.insert(prefixes.end(), {"m.", "v."});
    }

    const json& table = header.at("tensors");
    std::size_t entry = 0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const auto names = targets[t]->tensor_names();
      const auto shapes = targets[t]->tensor_shapes();
      auto tensors = targets[t]->tensors();
      for (std::size_t i = 0; i < tensors.size(); ++i, ++entry) {
        if (entry >= table.size()) throw IoError(path.string() + ": tensor table too short");
        const json& e = table[entry];
        const std::string name = prefixes[t] + names[i];
        if (e.at("name") != name || e.at("rows").get<std::size_t>() != shapes[i].first ||
            e.at("cols").get<std::size_t>() != shapes[i].second) {
          throw IoError(path.string() + ": tensor " + name + " does not match the model config");
        }
        const auto off = e.at("offset").get<std::uint64_t>();
        const std::size_t bytes = tensors[i].size() * sizeof(double);
        if (off + bytes > payload.size()) throw IoError(path.string() + ": truncated payload");
        std::memcpy(tensors[i].data(), payload.data() + off, bytes);
      }
    }
    if (entry != table.size()) throw IoError(path.string() + ": unexpected extra tensors");
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  validate(ckpt.params, ckpt.model);
  return ckpt;
}

}  // namespace dmmvh
