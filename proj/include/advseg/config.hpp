#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "advseg/data.hpp"
#include "advseg/losses.hpp"

namespace advseg {

enum class DiscInput { mask, mask_rgb };
enum class DataSource { directory, synth };

// Full experiment description. Parsed from flat key = value text with
// [generator], [discriminator] and [data] sections; unknown keys are
// rejected. Defaults describe the desk-scale 64-pixel regime; larger patch
// sizes for full rasters are a config-file concern. Adversarial runs need
// the patch divisible by 16 for the stride-2 discriminator stack.
struct TrainConfig {
  std::uint64_t seed = 0;
  int epochs = 90;
  int batch_size = 3;
  int patch = 64;
  bool adversarial = true;
  AdvMode adv_mode = AdvMode::saturating;
  double adv_weight = 1.0;

  double g_lr = 1e-4;
  double g_beta1 = 0.9, g_beta2 = 0.99;
  int depth = 3;
  int base_width = 16;
  bool skip_connections = false;

  double d_lr = 1e-5;
  double d_beta1 = 0.5, d_beta2 = 0.9;
  int d_to_g_ratio = 1;
  DiscInput disc_input = DiscInput::mask;

  DataSource data_source = DataSource::directory;
  std::string data_dir;  // expects images/ and masks/ inside
  std::string val_dir;
  SynthConfig synth;

  void validate() const;
  std::string to_text() const;  // round-trips through parse_config

  static TrainConfig from_file(const std::filesystem::path& path);
  static TrainConfig from_string(const std::string& text);
};

}  // namespace advseg
