#pragma once

#include <string>

#include "flowsense/flowgraph.hpp"

namespace flowsense::flowgraph {

// Versioned JSON document with sections meta / topology / sensors /
// split_fractions / frames. Writing is deterministic: the same dataset
// always produces the same bytes.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Frames as CSV for inspection: t, one column per sensor in declaration
// order, target last. Unread sensors are left empty.
void write_frames_csv(const Dataset& d, const std::string& path);

}  // namespace flowsense::flowgraph
