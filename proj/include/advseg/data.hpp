#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "advseg/rng.hpp"
#include "advseg/tensor.hpp"

namespace advseg {

// 8-bit raster, row-major, channel-interleaved. Stored as PGM (P5) when
// single-channel and PPM (P6) when RGB, maxval 255.
struct RasterImage {
  int width = 0, height = 0, channels = 1;
  std::vector<std::uint8_t> samples;
};

// strictly binary per-pixel labels: 0 background, 1 building
struct Mask {
  int width = 0, height = 0;
  std::vector<std::uint8_t> labels;
};

enum class Split { train, val, test };

struct Sample {
  RasterImage image;
  Mask mask;
};

struct Dataset {
  std::vector<Sample> samples;
  Split split = Split::train;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
};

// ---- tiling & augmentation ------------------------------------------------

// Non-overlapping patch grid anchored at (0,0), row-major; remainder rows and
// columns narrower than the patch are dropped.
std::vector<Sample> tile(const RasterImage& image, const Mask& mask,
                         int patch = 300);

// {identity, flip-LR, flip-TD, rot90, rot180, rot270}, image and mask
// transformed identically. Square patches only.
std::array<Sample, 6> augment(const RasterImage& image, const Mask& mask);

// ---- synthetic scenes ------------------------------------------------------

struct SynthConfig {
  int size = 64;   // square canvas edge
  int count = 8;   // samples in the dataset
  int min_buildings = 1, max_buildings = 5;
  int min_building_size = 6, max_building_size = 24;  // rectangle edges, pixels
  int noise = 20;            // uniform amplitude around the base intensities
  int background_level = 70;
  int building_level = 190;
  std::uint64_t seed = 0;
};

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
};

struct SynthSample {
  RasterImage image;
  Mask mask;
  std::vector<Rect> rects;  // the drawn rectangles; mask is exactly their union
};

SynthSample synth_sample(const SynthConfig& config, Rng& rng);
Dataset synth_dataset(const SynthConfig& config);

// ---- raster I/O ------------------------------------------------------------

RasterImage read_raster(const std::filesystem::path& path);
void write_raster(const std::filesystem::path& path, const RasterImage& image);

// masks are stored as PGM with values {0, 255} and thresholded at 128 on read
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

// Pairs files by identical stem across the two directories, sorted by
// filename; every file must have a partner and paired dimensions must agree.
Dataset ingest_directory(const std::filesystem::path& image_dir,
                         const std::filesystem::path& mask_dir, Split split);

// ---- tensor bridging -------------------------------------------------------

// gathers pool[indices] into [N, C, H, W], samples scaled to [0,1] by /255
Tensor image_batch(const std::vector<RasterImage>& pool,
                   std::span<const int> indices);
Tensor mask_batch(const std::vector<Mask>& pool, std::span<const int> indices);

Tensor image_to_tensor(const RasterImage& image);  // [1, C, H, W]

}  // namespace advseg
