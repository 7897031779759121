#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmmvh/net.hpp"
#include "dmmvh/optim.hpp"

namespace dmmvh {

// Everything needed to rebuild an encoder and, optionally, resume training.
//
// File layout (all integers and floats little-endian):
//   bytes [0, 8)   magic "DMMVHCK1"
//   bytes [8, 16)  uint64 header length L
//   next L bytes   UTF-8 JSON header: model config, seed, epoch, config echo and a
//                  tensor table {name, rows, cols, offset} with byte offsets into the payload
//   payload        IEEE-754 float64 tensors in table order: parameters, then optimizer
//                  first moments ("m." prefix), then second moments ("v." prefix)
struct Checkpoint {
  ModelConfig model;
  ModelParams params;
  std::optional<OptimState> optim;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dmmvh
