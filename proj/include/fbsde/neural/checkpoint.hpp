#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbsde/neural/network.hpp"

namespace fbsde {

/// Byte layout, all integers and doubles little-endian:
///
///   offset  size  field
///   0       4     magic "FBNN"
///   4       4     u32 format version (1)
///   8       4     u32 input dim d
///   12      4     u32 output rows
///   16      4     u32 output cols
///   20      4     u32 hidden layers L
///   24      4·L   u32 widths S_1 … S_L
///   24+4L   4     u32 flags (bit 0 layer norm, bit 1 norm before activation)
///   28+4L   8     u64 parameter count P
///   36+4L   8·P   f64 parameters in Network::flatten() order
std::vector<std::uint8_t> encode_checkpoint(const Network& net);
Network decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace fbsde
