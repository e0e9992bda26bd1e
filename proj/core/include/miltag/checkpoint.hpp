#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "miltag/model.hpp"

namespace miltag {

// Binary checkpoint layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       8     magic "MILTAGCK"
//   8       4     uint32 format version (1)
//   12      4     uint32 pooling (0 = mean, 1 = max)
//   16      32    uint64 D, H, d, S
//   48      ...   float64 W1 (H x D, row-major), b1 (H),
//                 W2 (d x H, row-major), b2 (d)
//
// The frozen semantic matrix is not stored; it is rebuilt from embeddings
// and tag lists when the checkpoint is loaded.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  HeadTensors head;
  Pooling pooling = Pooling::Mean;
  std::size_t seen_count = 0;  // S at training time

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Installs `semantic` as the frozen layer. Its first S tags must be the
// training seen set; that is checked by count only.
ModelParams restore_params(const Checkpoint& ckpt, SemanticMatrix semantic);

}  // namespace miltag
