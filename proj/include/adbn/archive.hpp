#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adbn/dbn.hpp"

namespace adbn {

inline constexpr std::uint32_t kArchiveVersion = 1;

using ArchiveMetadata = std::map<std::string, std::string>;

struct ModelArchive {
  Dbn model;
  ArchiveMetadata metadata;
};

// Container layout, all integers and doubles little-endian:
//
//   "ADBN"                      magic
//   u32 format_version
//   u32 n_layers, u32 n_classes
//   per layer: u32 n_visible, u32 n_hidden,
//              f64 W[n_visible * n_hidden] (column-major), f64 b[n_visible], f64 c[n_hidden]
//   head:      f64 U[top_hidden * n_classes] (column-major), f64 d[n_classes]
//   u32 n_events
//   per event: u64 epoch, u32 kind, u32 layer, u8 has_neuron, u64 neuron, u32 len, detail bytes
//   u32 n_metadata
//   per entry: u32 len, key bytes, u32 len, value bytes (keys in ascending order)
//   u32 crc32 of every preceding byte
std::vector<unsigned char> encode_archive(const Dbn& model, const ArchiveMetadata& metadata = {});
ModelArchive decode_archive(std::span<const unsigned char> bytes);

void save_archive(const std::string& path, const Dbn& model, const ArchiveMetadata& metadata = {});
ModelArchive load_archive(const std::string& path);

}  // namespace adbn
