#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "snarf/nn.hpp"

namespace snarf {

enum class ModelKind : std::uint32_t { forward_skinning = 0, backward_lbs = 1 };

// On-disk model container:
//   "SNRF" | u32 version | u32 model kind |
//   2 x (net spec | u64 value count | f64 values in layer order) |
//   u64 length + JSON metadata text
// All integers and floats little-endian. Net spec: u32 input_dim, u32 output_dim,
// u32 hidden count, u32 widths..., u32 hidden activation, u32 output activation,
// f64 softplus beta.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelKind kind = ModelKind::forward_skinning;
  MlpParams occupancy;
  MlpParams skinning;
  std::string metadata;

  bool operator==(const Checkpoint&) const = default;
};

void write_mlp(std::ostream& out, const MlpParams& params);
MlpParams read_mlp(std::istream& in);

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

/// Writes a temporary file, then renames it over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace snarf
