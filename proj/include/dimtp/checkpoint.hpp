#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dimtp/tensor.hpp"

namespace dimtp {

// Named parameter arrays plus a free-form config document. On disk this is a
// JSON manifest (`<prefix>.json`, tensors sorted by name with byte offsets)
// and a raw little-endian float32 blob (`<prefix>.bin`). Round-trips are
// bit-exact.
struct Checkpoint {
  nlohmann::json config;
  std::vector<std::pair<std::string, te::Tensor>> tensors;

  void add(const std::string& name, const te::Tensor& t) { tensors.emplace_back(name, t); }
  const te::Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  void save(const std::string& prefix) const;
  static Checkpoint load(const std::string& prefix);
};

}  // namespace dimtp
