#pragma once

#include <string>

#include "retina/nn.hpp"

namespace retina::cli {

/// Versioned binary model container.
///
/// Layout, all integers little-endian:
///   bytes 0-7   magic "RETGRADM"
///   byte  8     format version (currently 1)
///   u32         class count
///   u64 x3      input channels, height, width
///   u64         layer count
///   per layer   u8 kind tag + kind-specific u64/f64 fields
///   u64         parameter tensor count
///   per tensor  u64 rank, u64 dims..., f64 values (row-major, IEEE-754 bits)
///   u32         CRC-32 (IEEE) of every preceding byte
///
/// Saving the same network twice produces byte-identical files.
void save_model(const std::string& path, const nn::Network& net);

/// Throws IntegrityError on bad magic, version mismatch, or checksum
/// failure.
nn::Network load_model(const std::string& path);

}  // namespace retina::cli
