#include "ebench/qa_config.hpp"

#include "ebench/backends.hpp"
#include "ebench/error.hpp"

namespace ebench::qa {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(const json& doc, const char* key, E fallback,
             const std::array<std::pair<std::string_view, E>, N>& names) {
  if (!doc.contains(key)) return fallback;
  const auto s = doc.at(key).get<std::string>();
  std::string valid;
  for (const auto& [name, value] : names) {
    if (name == s) return value;
    valid += (valid.empty() ? "" : ", ") + std::string(name);
  }
  throw ValidationError(std::string("model config: unknown ") + key + " '" + s +
                        "' (valid: " + valid + ")");
}

constexpr std::array<std::pair<std::string_view, TextEncoder>, 2> kText{
    {{"clip", TextEncoder::clip}, {"blip", TextEncoder::blip}}};
constexpr std::array<std::pair<std::string_view, Temporal>, 4> kTemporal{
    {{"none", Temporal::none},
     {"vswin", Temporal::vswin},
     {"mvd", Temporal::mvd},
     {"uniformer", Temporal::uniformer}}};
constexpr std::array<std::pair<std::string_view, Fusion>, 3> kFusion{
    {{"none", Fusion::none}, {"mca", Fusion::mca}, {"concat", Fusion::concat}}};
constexpr std::array<std::pair<std::string_view, Scale>, 2> kScale{
    {{"toy", Scale::toy}, {"reference", Scale::reference}}};

template <typename T>
void read(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

std::string_view to_string(TextEncoder v) { return v == TextEncoder::clip ? "clip" : "blip"; }

std::string_view to_string(Temporal v) {
  switch (v) {
    case Temporal::none: return "none";
    case Temporal::vswin: return "vswin";
    case Temporal::mvd: return "mvd";
    case Temporal::uniformer: return "uniformer";
  }
  return "?";
}

std::string_view to_string(Fusion v) {
  switch (v) {
    case Fusion::none: return "none";
    case Fusion::mca: return "mca";
    case Fusion::concat: return "concat";
  }
  return "?";
}

std::string_view to_string(Scale v) { return v == Scale::toy ? "toy" : "reference"; }

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::alignment: return "alignment";
    case Branch::relevance: return "relevance";
    case Branch::aesthetic: return "aesthetic";
    case Branch::technical: return "technical";
  }
  return "?";
}

bool ModelConfig::branch_active(Branch b) const {
  if (!enabled[static_cast<int>(b)]) return false;
  if (b == Branch::relevance) return temporal != Temporal::none && fusion != Fusion::none;
  return true;
}

double ModelConfig::effective_weight(Branch b) const {
  return branch_active(b) ? weights[static_cast<int>(b)] : 0.0;
}

json ModelConfig::to_json() const {
  json doc = {
      {"scale", to_string(scale)},
      {"seed", seed},
      {"width", width},
      {"heads", heads},
      {"conv_channels", conv_channels},
      {"patch", patch},
      {"vocab", vocab},
      {"max_tokens", max_tokens},
      {"aesthetic_size", aesthetic_size},
      {"text", to_string(text)},
      {"temporal", to_string(temporal)},
      {"fusion", to_string(fusion)},
      {"share_relevance_encoders", share_relevance_encoders},
      {"adapter",
       {{"layers", adapter.layers},
        {"heads", adapter.heads},
        {"max_frames", adapter.max_frames},
        {"zero_init_output", adapter.zero_init_output}}},
      {"fragments", {{"grid", fragments.grid}, {"size", fragments.size}}},
  };
  json w = json::object(), en = json::object();
  for (Branch b : kBranches) {
    w[std::string(to_string(b))] = weights[static_cast<int>(b)];
    en[std::string(to_string(b))] = enabled[static_cast<int>(b)];
  }
  doc["weights"] = w;
  doc["enabled"] = en;
  if (weights_id) doc["weights_id"] = *weights_id;
  if (weights_sha256) doc["weights_sha256"] = *weights_sha256;
  return doc;
}

ModelConfig ModelConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("model config must be a JSON object");
  static const std::array<std::string_view, 19> known{
      "scale",   "seed",     "width",  "heads",    "conv_channels", "patch",
      "vocab",   "max_tokens", "aesthetic_size", "text", "temporal", "fusion",
      "share_relevance_encoders", "adapter", "fragments", "weights", "enabled",
      "weights_id", "weights_sha256"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError("model config: unknown key '" + key + "'");
    }
  }
  ModelConfig c;
  try {
    c.scale = parse_enum(doc, "scale", c.scale, kScale);
    c.text = parse_enum(doc, "text", c.text, kText);
    c.temporal = parse_enum(doc, "temporal", c.temporal, kTemporal);
    c.fusion = parse_enum(doc, "fusion", c.fusion, kFusion);
    read(doc, "seed", c.seed);
    read(doc, "width", c.width);
    read(doc, "heads", c.heads);
    read(doc, "conv_channels", c.conv_channels);
    read(doc, "patch", c.patch);
    read(doc, "vocab", c.vocab);
    read(doc, "max_tokens", c.max_tokens);
    read(doc, "aesthetic_size", c.aesthetic_size);
    read(doc, "share_relevance_encoders", c.share_relevance_encoders);
    if (doc.contains("adapter")) {
      const auto& a = doc.at("adapter");
      read(a, "layers", c.adapter.layers);
      read(a, "heads", c.adapter.heads);
      read(a, "max_frames", c.adapter.max_frames);
      read(a, "zero_init_output", c.adapter.zero_init_output);
    }
    if (doc.contains("fragments")) {
      read(doc.at("fragments"), "grid", c.fragments.grid);
      read(doc.at("fragments"), "size", c.fragments.size);
    }
    for (Branch b : kBranches) {
      const std::string key(to_string(b));
      if (doc.contains("weights") && doc.at("weights").contains(key)) {
        c.weights[static_cast<int>(b)] = doc.at("weights").at(key).get<double>();
      }
      if (doc.contains("enabled") && doc.at("enabled").contains(key)) {
        c.enabled[static_cast<int>(b)] = doc.at("enabled").at(key).get<bool>();
      }
    }
    if (doc.contains("weights_id")) c.weights_id = doc.at("weights_id").get<std::string>();
    if (doc.contains("weights_sha256")) {
      c.weights_sha256 = doc.at("weights_sha256").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t ModelConfig::hash() const { return fnv1a(to_json().dump()); }

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ValidationError(std::string("model config: ") + name + " must be positive");
  };
  positive(width, "width");
  positive(heads, "heads");
  positive(conv_channels, "conv_channels");
  positive(patch, "patch");
  positive(vocab, "vocab");
  positive(aesthetic_size, "aesthetic_size");
  positive(adapter.layers, "adapter.layers");
  positive(adapter.heads, "adapter.heads");
  positive(adapter.max_frames, "adapter.max_frames");
  positive(fragments.grid, "fragments.grid");
  positive(fragments.size, "fragments.size");
  if (max_tokens < 2) throw ValidationError("model config: max_tokens must be at least 2");
  if (width % heads != 0 || width % adapter.heads != 0) {
    throw ValidationError("model config: width must be divisible by the head counts");
  }
  if (width > 128 && scale == Scale::toy) {
    throw ValidationError("model config: toy backbones are limited to width 128");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw ValidationError("model config: fusion weights must be finite");
  }
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.width = 32;
  c.heads = 2;
  c.conv_channels = 8;
  c.patch = 4;
  c.aesthetic_size = 16;
  c.fragments = {2, 8};
  return c;
}

}  // namespace ebench::qa
