#pragma once
// Named-tensor checkpoint file: text with shape headers and hexfloat values,
// so round-trips are bit-exact.

#include <string>
#include <utility>
#include <vector>

#include "dqe/tensor.hpp"

namespace dqe {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_tensors(const NamedTensors& tensors, const std::string& path);
NamedTensors load_tensors(const std::string& path);

}  // namespace dqe
