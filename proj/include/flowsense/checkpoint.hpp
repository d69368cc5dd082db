#pragma once

#include <string>
#include <vector>

#include "flowsense/tensor.hpp"

namespace flowsense::neural {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Versioned binary archive of named tensors. Fixed little-endian layout:
//   "FSTA" | u32 version | u32 count |
//   per tensor: u32 name_len | name bytes | u32 ndim | u32 dims[] | f64 data[]
void save_tensors(const std::string& path,
                  const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::string& path);

}  // namespace flowsense::neural
