#include "nodefdm/nn/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include "json.hpp"

namespace nodefdm::nn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "nodefdm-checkpoint";

json tensor_json(const Tensor2& t) { return json{{"rows", t.rows}, {"cols", t.cols}, {"values", t.values}}; }

Tensor2 tensor_from(const json& j) {
  return Tensor2(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                 j.at("values").get<std::vector<double>>());
}

json stats_json(const data::FeatureStats& s) { return json{{"mean", s.mean}, {"std", s.std}}; }

data::FeatureStats stats_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

const char* kind_name(HeadKind k) { return k == HeadKind::binary ? "binary" : "continuous"; }

HeadKind kind_from(const std::string& s) {
  if (s == "continuous") return HeadKind::continuous;
  if (s == "binary") return HeadKind::binary;
  throw CheckpointError("unknown head kind '" + s + "'");
}

json layer_json(const StructuredLayerSpec& s) {
  json inputs = json::array();
  for (std::size_t i = 0; i < s.inputs.size(); ++i) {
    inputs.push_back({{"name", s.inputs[i]}, {"mean", s.input_stats[i].mean}, {"std", s.input_stats[i].std}});
  }
  json heads = json::array();
  for (const auto& h : s.heads) {
    json st = json::array();
    for (const auto& x : h.stats) st.push_back(stats_json(x));
    heads.push_back({{"name", h.name}, {"kind", kind_name(h.kind)}, {"stats", st}});
  }
  return json{{"name", s.name}, {"hidden", s.hidden}, {"depth", s.depth}, {"inputs", inputs}, {"heads", heads}};
}

StructuredLayerSpec layer_from(const json& j) {
  StructuredLayerSpec s;
  s.name = j.at("name").get<std::string>();
  s.hidden = j.at("hidden").get<std::size_t>();
  s.depth = j.at("depth").get<std::size_t>();
  for (const auto& in : j.at("inputs")) {
    s.inputs.push_back(in.at("name").get<std::string>());
    s.input_stats.push_back(stats_from(in));
  }
  for (const auto& h : j.at("heads")) {
    HeadSpec hs;
    hs.name = h.at("name").get<std::string>();
    hs.kind = kind_from(h.at("kind").get<std::string>());
    for (const auto& st : h.at("stats")) hs.stats.push_back(stats_from(st));
    s.heads.push_back(std::move(hs));
  }
  return s;
}

json tensors_json(const std::vector<Tensor2>& ts) {
  json a = json::array();
  for (const auto& t : ts) a.push_back(tensor_json(t));
  return a;
}

std::vector<Tensor2> tensors_from(const json& j) {
  std::vector<Tensor2> out;
  for (const auto& t : j) out.push_back(tensor_from(t));
  return out;
}

}  // namespace

std::string spec_hash(std::span<const StructuredLayerSpec> layers) {
  std::ostringstream os;
  for (const auto& l : layers) {
    os << l.name << '|' << l.hidden << '|' << l.depth << '|';
    for (const auto& in : l.inputs) os << in << ',';
    os << '|';
    for (const auto& h : l.heads) os << h.name << ':' << kind_name(h.kind) << ':' << h.dim() << ',';
    os << ';';
  }
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", hash);
}

std::string to_json_text(const Checkpoint& c) {
  json stats = json::object();
  for (std::size_t i = 0; i < data::kFeatureCount; ++i) {
    const auto f = static_cast<data::Feature>(i);
    stats[std::string(data::feature_name(f))] = stats_json(c.stats[f]);
  }
  json layers = json::array();
  for (const auto& l : c.layers) layers.push_back(layer_json(l));
  json params = json::array();
  for (const auto& p : c.params) {
    json t = tensor_json(p.value);
    t["name"] = p.name;
    params.push_back(std::move(t));
  }
  json weights = json::array();
  for (const auto& [name, w] : c.loss_weights) weights.push_back({{"feature", name}, {"weight", w}});
  json j = {{"format", kFormat},
            {"version", Checkpoint::kVersion},
            {"spec_hash", spec_hash(c.layers)},
            {"dt", c.dt},
            {"softplus_beta", c.softplus_beta},
            {"norm_stats", stats},
            {"layers", layers},
            {"parameters", params},
            {"loss_weights", weights},
            {"metadata", c.metadata}};
  if (c.optimizer) {
    j["optimizer"] = {{"step", c.optimizer->step}, {"m", tensors_json(c.optimizer->m)}, {"v", tensors_json(c.optimizer->v)}};
  }
  return j.dump(1) + "\n";
}

Checkpoint from_json_text(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw CheckpointError("not a model checkpoint");
    const int version = j.at("version").get<int>();
    if (version != Checkpoint::kVersion) throw CheckpointError(fmt::format("unsupported checkpoint version {}", version));
    Checkpoint c;
    c.dt = j.at("dt").get<double>();
    c.softplus_beta = j.at("softplus_beta").get<double>();
    for (const auto& [name, s] : j.at("norm_stats").items()) {
      const auto f = data::feature_from_name(name);
      if (!f) throw CheckpointError("unknown feature '" + name + "' in normalization table");
      c.stats[*f] = stats_from(s);
    }
    for (const auto& l : j.at("layers")) c.layers.push_back(layer_from(l));
    if (spec_hash(c.layers) != j.at("spec_hash").get<std::string>()) {
      throw CheckpointError("layer definitions do not match the recorded spec hash");
    }
    for (const auto& p : j.at("parameters")) c.params.push_back({p.at("name").get<std::string>(), tensor_from(p)});
    std::size_t offset = 0;
    for (const auto& l : c.layers) {
      l.validate();
      check_params(l, c.params, offset);
      offset += l.tensor_count();
    }
    if (offset != c.params.size()) throw CheckpointError("parameter count does not match layer definitions");
    for (const auto& w : j.at("loss_weights")) {
      c.loss_weights.emplace_back(w.at("feature").get<std::string>(), w.at("weight").get<double>());
    }
    c.metadata = j.at("metadata").get<std::map<std::string, double>>();
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      AdamWState s;
      s.step = o.at("step").get<std::size_t>();
      s.m = tensors_from(o.at("m"));
      s.v = tensors_from(o.at("v"));
      if (s.m.size() != c.params.size() || s.v.size() != c.params.size()) {
        throw CheckpointError("optimizer state does not match parameters");
      }
      c.optimizer = std::move(s);
    }
    return c;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string text = to_json_text(checkpoint);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out << text;
    if (!out) throw CheckpointError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

}  // namespace nodefdm::nn
