#include "ebench/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "ebench/error.hpp"

namespace ebench::ckpt {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'E', 'B', 'E', 'N', 'C', 'H', 'C', 'K'};

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& in, std::size_t n, const std::string& what) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw CheckpointError("checkpoint truncated while reading " + what);
  return v;
}

json read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint file");
  }
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in) throw CheckpointError(path.string() + ": truncated header");
  if (version != kVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError(path.string() + ": truncated header");
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": corrupt header: " + e.what());
  }
}

CheckpointInfo info_of(const json& h) {
  CheckpointInfo info;
  info.stage = h.at("stage").get<int>();
  info.epoch = h.at("epoch").get<int>();
  info.config_hash = std::stoull(h.at("config_hash").get<std::string>());
  info.config = h.at("config");
  return info;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return in;
}

}  // namespace

void save(const std::filesystem::path& path, const qa::QaModel& model,
          const optim::Adam* optimizer, int stage, int epoch) {
  json header;
  header["config"] = model.config().to_json();
  header["config_hash"] = std::to_string(model.config().hash());
  header["stage"] = stage;
  header["epoch"] = epoch;
  json params = json::array();
  for (const auto& p : model.params().all()) {
    params.push_back({{"name", p.name}, {"group", p.group}, {"size", p.tensor.numel()}});
  }
  header["parameters"] = params;
  json slots = json::array();
  if (optimizer) {
    for (const auto& [name, slot] : optimizer->slots()) {
      slots.push_back({{"name", name}, {"size", slot.m.size()}, {"step", slot.step}});
    }
  }
  header["optimizer"] = {{"kind", "adam"}, {"slots", slots}};

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    const std::string text = header.dump();
    const std::uint32_t version = kVersion;
    const std::uint64_t len = text.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&version), sizeof version);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.params().all()) {
      write_doubles(out, p.tensor.node()->value);
    }
    if (optimizer) {
      for (const auto& [name, slot] : optimizer->slots()) {
        write_doubles(out, slot.m);
        write_doubles(out, slot.v);
      }
    }
    if (!out) throw Error("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo peek(const std::filesystem::path& path) {
  auto in = open(path);
  return info_of(read_header(in, path));
}

CheckpointInfo load(const std::filesystem::path& path, qa::QaModel& model,
                    optim::Adam* optimizer) {
  auto in = open(path);
  const json header = read_header(in, path);
  CheckpointInfo info;
  try {
    info = info_of(header);
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": bad header: " + e.what());
  }
  if (info.config_hash != model.config().hash()) {
    throw CheckpointError(path.string() + ": config hash " + std::to_string(info.config_hash) +
                          " does not match the current model config (" +
                          std::to_string(model.config().hash()) + ")");
  }
  auto& params = model.params().all();
  const auto& listed = header.at("parameters");
  if (listed.size() != params.size()) {
    throw CheckpointError(path.string() + ": parameter count mismatch");
  }
  std::vector<std::vector<double>> values;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = listed[i].at("name").get<std::string>();
    const auto size = listed[i].at("size").get<std::size_t>();
    if (name != params[i].name || size != params[i].tensor.numel()) {
      throw CheckpointError(path.string() + ": parameter layout mismatch at " + name);
    }
    values.push_back(read_doubles(in, size, name));
  }
  std::map<std::string, optim::Adam::Slot> slots;
  for (const auto& s : header.at("optimizer").at("slots")) {
    optim::Adam::Slot slot;
    const auto name = s.at("name").get<std::string>();
    const auto size = s.at("size").get<std::size_t>();
    slot.step = s.at("step").get<long long>();
    slot.m = read_doubles(in, size, name + " (adam m)");
    slot.v = read_doubles(in, size, name + " (adam v)");
    slots.emplace(name, std::move(slot));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
  if (optimizer) optimizer->slots() = std::move(slots);
  return info;
}

}  // namespace ebench::ckpt
