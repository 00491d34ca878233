#include "advseg/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "advseg/errors.hpp"

namespace advseg {

namespace fs = std::filesystem;

namespace {

std::uint8_t clamp_byte(int v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

void require_aligned(const RasterImage& image, const Mask& mask, const char* op) {
  if (image.width != mask.width || image.height != mask.height)
    throw std::invalid_argument(
        std::string(op) + ": image " + std::to_string(image.width) + "x" +
        std::to_string(image.height) + " vs mask " +
        std::to_string(mask.width) + "x" + std::to_string(mask.height));
}

// transform index maps for square flips/rotations; (x, y) are destination
// coordinates, result is the source pixel
enum class Xform { identity, flip_lr, flip_td, rot90, rot180, rot270 };

std::pair<int, int> source_of(Xform t, int x, int y, int n) {
  switch (t) {
    case Xform::identity:
      return {x, y};
    case Xform::flip_lr:
      return {n - 1 - x, y};
    case Xform::flip_td:
      return {x, n - 1 - y};
    case Xform::rot90:  // quarter turn clockwise
      return {y, n - 1 - x};
    case Xform::rot180:
      return {n - 1 - x, n - 1 - y};
    case Xform::rot270:
      return {n - 1 - y, x};
  }
  return {x, y};
}

RasterImage transform_image(const RasterImage& in, Xform t) {
  RasterImage out;
  out.width = in.width;
  out.height = in.height;
  out.channels = in.channels;
  out.samples.resize(in.samples.size());
  const int n = in.width;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const auto [sx, sy] = source_of(t, x, y, n);
      for (int c = 0; c < in.channels; ++c)
        out.samples[(y * n + x) * in.channels + c] =
            in.samples[(sy * n + sx) * in.channels + c];
    }
  return out;
}

Mask transform_mask(const Mask& in, Xform t) {
  Mask out;
  out.width = in.width;
  out.height = in.height;
  out.labels.resize(in.labels.size());
  const int n = in.width;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const auto [sx, sy] = source_of(t, x, y, n);
      out.labels[y * n + x] = in.labels[sy * n + sx];
    }
  return out;
}

}  // namespace

std::vector<Sample> tile(const RasterImage& image, const Mask& mask, int patch) {
  require_aligned(image, mask, "tile");
  if (patch < 1) throw std::invalid_argument("tile: patch must be >= 1");
  if (patch > image.width || patch > image.height)
    throw std::invalid_argument(
        "tile: patch " + std::to_string(patch) + " larger than image " +
        std::to_string(image.width) + "x" + std::to_string(image.height));
  std::vector<Sample> out;
  for (int y0 = 0; y0 + patch <= image.height; y0 += patch) {
    for (int x0 = 0; x0 + patch <= image.width; x0 += patch) {
      Sample s;
      s.image.width = s.image.height = patch;
      s.image.channels = image.channels;
      s.image.samples.resize(static_cast<std::size_t>(patch) * patch *
                             image.channels);
      s.mask.width = s.mask.height = patch;
      s.mask.labels.resize(static_cast<std::size_t>(patch) * patch);
      for (int y = 0; y < patch; ++y) {
        const int sy = y0 + y;
        std::copy_n(
            image.samples.data() + (static_cast<std::size_t>(sy) * image.width + x0) *
                                       image.channels,
            static_cast<std::size_t>(patch) * image.channels,
            s.image.samples.data() +
                static_cast<std::size_t>(y) * patch * image.channels);
        std::copy_n(mask.labels.data() + static_cast<std::size_t>(sy) * mask.width +
                        x0,
                    patch, s.mask.labels.data() + static_cast<std::size_t>(y) * patch);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::array<Sample, 6> augment(const RasterImage& image, const Mask& mask) {
  require_aligned(image, mask, "augment");
  if (image.width != image.height)
    throw std::invalid_argument("augment: rotations need square patches, got " +
                                std::to_string(image.width) + "x" +
                                std::to_string(image.height));
  constexpr Xform kOrder[6] = {Xform::identity, Xform::flip_lr, Xform::flip_td,
                               Xform::rot90, Xform::rot180, Xform::rot270};
  std::array<Sample, 6> out;
  for (int i = 0; i < 6; ++i)
    out[i] = {transform_image(image, kOrder[i]), transform_mask(mask, kOrder[i])};
  return out;
}

SynthSample synth_sample(const SynthConfig& config, Rng& rng) {
  if (config.size < 1) throw std::invalid_argument("synth: size must be >= 1");
  if (config.min_buildings < 0 || config.max_buildings < config.min_buildings)
    throw std::invalid_argument("synth: bad building count range");
  if (config.min_building_size < 1 ||
      config.max_building_size < config.min_building_size)
    throw std::invalid_argument("synth: bad building size range");
  if (config.max_building_size > config.size)
    throw std::invalid_argument(
        "synth: building size " + std::to_string(config.max_building_size) +
        " exceeds canvas " + std::to_string(config.size));

  const int n = config.size;
  SynthSample s;
  s.image.width = s.image.height = n;
  s.image.channels = 3;
  s.image.samples.resize(static_cast<std::size_t>(n) * n * 3);
  s.mask.width = s.mask.height = n;
  s.mask.labels.assign(static_cast<std::size_t>(n) * n, 0);

  for (std::size_t i = 0; i < s.image.samples.size(); ++i)
    s.image.samples[i] = clamp_byte(config.background_level +
                                    rng.uniform_int(-config.noise, config.noise));

  const int count = rng.uniform_int(config.min_buildings, config.max_buildings);
  for (int b = 0; b < count; ++b) {
    Rect r;
    r.w = rng.uniform_int(config.min_building_size, config.max_building_size);
    r.h = rng.uniform_int(config.min_building_size, config.max_building_size);
    r.x = rng.uniform_int(0, n - r.w);
    r.y = rng.uniform_int(0, n - r.h);
    const int level =
        config.building_level + rng.uniform_int(-config.noise, config.noise);
    const int half = config.noise / 2;
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) {
        s.mask.labels[static_cast<std::size_t>(y) * n + x] = 1;
        for (int c = 0; c < 3; ++c)
          s.image.samples[(static_cast<std::size_t>(y) * n + x) * 3 + c] =
              clamp_byte(level + rng.uniform_int(-half, half));
      }
    s.rects.push_back(r);
  }
  return s;
}

Dataset synth_dataset(const SynthConfig& config) {
  Rng rng = Rng::stream(config.seed, 3);
  Dataset ds;
  for (int i = 0; i < config.count; ++i) {
    SynthSample s = synth_sample(config, rng);
    ds.samples.push_back({std::move(s.image), std::move(s.mask)});
  }
  return ds;
}

namespace {

// header fields are separated by arbitrary whitespace; exactly one whitespace
// byte separates the maxval from the payload
int read_pnm_int(std::istream& in, const fs::path& path) {
  int v = 0;
  if (!(in >> v) || v <= 0)
    throw IoError("pnm: malformed header in " + path.string());
  return v;
}

}  // namespace

RasterImage read_raster(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pnm: cannot open " + path.string());
  std::string magic;
  in >> magic;
  int channels = 0;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw IoError("pnm: malformed header in " + path.string() +
                  " (magic '" + magic + "')");
  RasterImage img;
  img.channels = channels;
  img.width = read_pnm_int(in, path);
  img.height = read_pnm_int(in, path);
  const int maxval = read_pnm_int(in, path);
  if (maxval != 255)
    throw IoError("pnm: unsupported maxval " + std::to_string(maxval) + " in " +
                  path.string());
  in.get();  // single whitespace byte before the payload
  const std::size_t need =
      static_cast<std::size_t>(img.width) * img.height * channels;
  img.samples.resize(need);
  in.read(reinterpret_cast<char*>(img.samples.data()),
          static_cast<std::streamsize>(need));
  if (static_cast<std::size_t>(in.gcount()) != need)
    throw IoError("pnm: truncated payload in " + path.string() + " (" +
                  std::to_string(in.gcount()) + " of " + std::to_string(need) +
                  " bytes)");
  return img;
}

void write_raster(const fs::path& path, const RasterImage& image) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("pnm: only 1- or 3-channel rasters supported");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pnm: cannot write " + path.string());
  out << (image.channels == 1 ? "P5" : "P6") << "\n"
      << image.width << " " << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.samples.data()),
            static_cast<std::streamsize>(image.samples.size()));
  if (!out) throw IoError("pnm: write failed for " + path.string());
}

Mask read_mask(const fs::path& path) {
  RasterImage img = read_raster(path);
  if (img.channels != 1)
    throw IoError("mask: expected single-channel PGM at " + path.string());
  Mask m;
  m.width = img.width;
  m.height = img.height;
  m.labels.resize(img.samples.size());
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    m.labels[i] = img.samples[i] >= 128 ? 1 : 0;
  return m;
}

void write_mask(const fs::path& path, const Mask& mask) {
  RasterImage img;
  img.width = mask.width;
  img.height = mask.height;
  img.channels = 1;
  img.samples.resize(mask.labels.size());
  for (std::size_t i = 0; i < mask.labels.size(); ++i)
    img.samples[i] = mask.labels[i] ? 255 : 0;
  write_raster(path, img);
}

Dataset ingest_directory(const fs::path& image_dir, const fs::path& mask_dir,
                         Split split) {
  auto stems = [](const fs::path& dir) {
    if (!fs::is_directory(dir))
      throw IoError("ingest: not a directory: " + dir.string());
    std::map<std::string, fs::path> out;  // sorted by stem
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file())
        out[entry.path().stem().string()] = entry.path();
    return out;
  };
  const auto images = stems(image_dir);
  const auto masks = stems(mask_dir);
  for (const auto& [stem, path] : images)
    if (!masks.count(stem))
      throw IoError("ingest: no mask for image " + path.string());
  for (const auto& [stem, path] : masks)
    if (!images.count(stem))
      throw IoError("ingest: no image for mask " + path.string());

  Dataset ds;
  ds.split = split;
  for (const auto& [stem, path] : images) {
    Sample s;
    s.image = read_raster(path);
    s.mask = read_mask(masks.at(stem));
    if (s.image.width != s.mask.width || s.image.height != s.mask.height)
      throw IoError("ingest: " + path.string() + " is " +
                    std::to_string(s.image.width) + "x" +
                    std::to_string(s.image.height) + " but its mask is " +
                    std::to_string(s.mask.width) + "x" +
                    std::to_string(s.mask.height));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Tensor image_batch(const std::vector<RasterImage>& pool,
                   std::span<const int> indices) {
  if (indices.empty()) throw std::invalid_argument("image_batch: empty batch");
  const RasterImage& first = pool.at(static_cast<std::size_t>(indices[0]));
  const int c = first.channels, h = first.height, w = first.width;
  Tensor out({static_cast<int>(indices.size()), c, h, w});
  out.mark_constant();
  double* dst = out.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const RasterImage& img = pool.at(static_cast<std::size_t>(indices[i]));
    if (img.channels != c || img.height != h || img.width != w)
      throw std::invalid_argument("image_batch: mixed raster sizes in batch");
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          dst[((i * c + ch) * h + y) * w + x] =
              img.samples[(static_cast<std::size_t>(y) * w + x) * c + ch] / 255.0;
  }
  return out;
}

Tensor mask_batch(const std::vector<Mask>& pool, std::span<const int> indices) {
  if (indices.empty()) throw std::invalid_argument("mask_batch: empty batch");
  const Mask& first = pool.at(static_cast<std::size_t>(indices[0]));
  const int h = first.height, w = first.width;
  Tensor out({static_cast<int>(indices.size()), 1, h, w});
  out.mark_constant();
  double* dst = out.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Mask& m = pool.at(static_cast<std::size_t>(indices[i]));
    if (m.height != h || m.width != w)
      throw std::invalid_argument("mask_batch: mixed mask sizes in batch");
    for (int j = 0; j < h * w; ++j)
      dst[i * static_cast<std::size_t>(h) * w + j] = m.labels[j] ? 1.0 : 0.0;
  }
  return out;
}

Tensor image_to_tensor(const RasterImage& image) {
  std::vector<RasterImage> pool{image};
  const int idx[1] = {0};
  return image_batch(pool, idx);
}

}  // namespace advseg
