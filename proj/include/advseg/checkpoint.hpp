#pragma once

#include <filesystem>
#include <optional>

#include "advseg/config.hpp"
#include "advseg/losses.hpp"
#include "advseg/models.hpp"

namespace advseg {

// On disk a checkpoint is a directory:
//   config.cfg   exact config echo, loadable by the config parser
//   manifest.txt format version, epoch, optimizer step counters, parameter
//                inventory (name, shape, byte offset, byte length)
//   params.bin   parameter payload, little-endian f64 in inventory order
//   optim.bin    Adam first/second moments, m then v per inventory entry
struct Checkpoint {
  int format_version = 1;
  int epoch = 0;
  TrainConfig config;
  Generator generator;
  std::optional<Discriminator> discriminator;
  AdamState g_optim;
  std::optional<AdamState> d_optim;
};

// Deterministic builds from a config; the trainer and the checkpoint loader
// must derive identical architectures and init seeds.
Generator generator_from_config(const TrainConfig& cfg);
std::optional<Discriminator> discriminator_from_config(const TrainConfig& cfg);

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

// Rebuilds both networks from the config echo and overwrites their
// parameters from the payload; reloaded models reproduce bit-identical
// forward outputs.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace advseg
