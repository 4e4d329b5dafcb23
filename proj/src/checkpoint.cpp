#include "dimtp/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace dimtp {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");

using nlohmann::json;

const te::Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::invalid_argument("checkpoint has no tensor named " + name);
}

bool Checkpoint::has(const std::string& name) const {
  return std::any_of(tensors.begin(), tensors.end(),
                     [&](const auto& nt) { return nt.first == name; });
}

void Checkpoint::save(const std::string& prefix) const {
  std::vector<std::pair<std::string, te::Tensor>> sorted = tensors;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  json manifest;
  manifest["format"] = "dimtp-checkpoint-v1";
  manifest["config"] = config;
  json list = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : sorted) {
    json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["offset"] = offset;
    entry["count"] = t.size();
    list.push_back(std::move(entry));
    offset += static_cast<std::uint64_t>(t.size()) * sizeof(float);
  }
  manifest["tensors"] = std::move(list);

  {
    std::ofstream out(prefix + ".json");
    if (!out) throw std::runtime_error("cannot write " + prefix + ".json");
    out << manifest.dump(2) << "\n";
  }
  {
    std::ofstream out(prefix + ".bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + prefix + ".bin");
    for (const auto& [name, t] : sorted) {
      out.write(reinterpret_cast<const char*>(t.values().data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
  }
}

Checkpoint Checkpoint::load(const std::string& prefix) {
  std::ifstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("cannot open " + prefix + ".json");
  json manifest = json::parse(mf);
  if (manifest.value("format", "") != "dimtp-checkpoint-v1") {
    throw std::runtime_error(prefix + ".json is not a dimtp checkpoint manifest");
  }

  std::ifstream blob(prefix + ".bin", std::ios::binary);
  if (!blob) throw std::runtime_error("cannot open " + prefix + ".bin");

  Checkpoint ck;
  ck.config = manifest["config"];
  for (const json& entry : manifest["tensors"]) {
    const std::string name = entry["name"];
    const te::Shape shape = entry["shape"].get<te::Shape>();
    const std::uint64_t offset = entry["offset"];
    const std::int64_t count = entry["count"];
    if (te::numel(shape) != count) {
      throw std::runtime_error("manifest entry " + name + " has inconsistent shape/count");
    }
    std::vector<float> data(static_cast<std::size_t>(count));
    blob.seekg(static_cast<std::streamoff>(offset));
    blob.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!blob) throw std::runtime_error("blob truncated while reading " + name);
    ck.tensors.emplace_back(name, te::Tensor::param(shape, std::move(data)));
  }
  return ck;
}

}  // namespace dimtp
