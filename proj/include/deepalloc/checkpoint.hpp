#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "deepalloc/tensor.hpp"

namespace deepalloc {

/// Named tensors plus string metadata, serialized as versioned text.
/// Layout is documented in docs/checkpoint_format.md.
struct TensorContainer {
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, tensor::Tensor>> tensors;  // insertion order preserved

  const tensor::Tensor& get(const std::string& name) const;
};

inline constexpr int kContainerVersion = 1;

std::string serialize(const TensorContainer& c);
TensorContainer deserialize(const std::string& text);

void save_container(const TensorContainer& c, const std::filesystem::path& path);
TensorContainer load_container(const std::filesystem::path& path);

}  // namespace deepalloc
