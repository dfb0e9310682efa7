#pragma once

#include <string>

#include "edl/model.hpp"

namespace edl {

// Fixed binary format: 8-byte magic, format version, then little-endian
// length-prefixed metadata and (name, shape, raw float64 payload) records.
// save -> load -> forward is bit-identical.
void save_checkpoint(const EvidenceModel& model, const std::string& path);
EvidenceModel load_checkpoint(const std::string& path);

}  // namespace edl
