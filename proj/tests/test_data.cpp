#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "advseg/data.hpp"
#include "advseg/errors.hpp"
#include "advseg/rng.hpp"

using namespace advseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("advseg_data_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RasterImage gradient_image(int w, int h, int channels) {
  RasterImage img;
  img.width = w;
  img.height = h;
  img.channels = channels;
  img.samples.resize(static_cast<std::size_t>(w) * h * channels);
  for (std::size_t i = 0; i < img.samples.size(); ++i)
    img.samples[i] = static_cast<std::uint8_t>(i % 251);
  return img;
}

Mask stripe_mask(int w, int h) {
  Mask m;
  m.width = w;
  m.height = h;
  m.labels.resize(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.labels[y * w + x] = (x + y) % 3 == 0 ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("tile produces the non-overlapping grid") {
  // the full-scale layout: 1500x1500 at 300-pixel patches gives 25 tiles
  RasterImage big = gradient_image(1500, 1500, 3);
  Mask big_mask = stripe_mask(1500, 1500);
  CHECK(tile(big, big_mask, 300).size() == 25);

  RasterImage exact = gradient_image(300, 300, 3);
  Mask exact_mask = stripe_mask(300, 300);
  auto one = tile(exact, exact_mask, 300);
  REQUIRE(one.size() == 1);
  CHECK(one[0].image.samples == exact.samples);
  CHECK(one[0].mask.labels == exact_mask.labels);

  // remainder rows/columns are dropped
  RasterImage odd = gradient_image(301, 301, 3);
  Mask odd_mask = stripe_mask(301, 301);
  CHECK(tile(odd, odd_mask, 300).size() == 1);

  CHECK_THROWS_WITH_AS(tile(exact, exact_mask, 400), doctest::Contains("larger"),
                       std::invalid_argument);
}

TEST_CASE("tile patches are disjoint and cover their source blocks") {
  RasterImage img = gradient_image(12, 8, 1);
  Mask mask = stripe_mask(12, 8);
  auto patches = tile(img, mask, 4);
  REQUIRE(patches.size() == 6);  // 3 across, 2 down, row-major
  for (std::size_t t = 0; t < patches.size(); ++t) {
    const int x0 = static_cast<int>(t % 3) * 4;
    const int y0 = static_cast<int>(t / 3) * 4;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        CHECK(patches[t].image.samples[y * 4 + x] ==
              img.samples[(y0 + y) * 12 + (x0 + x)]);
        CHECK(patches[t].mask.labels[y * 4 + x] ==
              mask.labels[(y0 + y) * 12 + (x0 + x)]);
      }
  }
}

TEST_CASE("augment produces the six dihedral variants") {
  RasterImage img = gradient_image(6, 6, 3);
  Mask mask = stripe_mask(6, 6);
  auto variants = augment(img, mask);

  // identity first
  CHECK(variants[0].image.samples == img.samples);

  // rot90 applied four times returns to the original
  Sample cur = variants[3];
  for (int i = 0; i < 3; ++i) cur = augment(cur.image, cur.mask)[3];
  CHECK(cur.image.samples == img.samples);
  CHECK(cur.mask.labels == mask.labels);

  // flips are involutions
  CHECK(augment(variants[1].image, variants[1].mask)[1].image.samples ==
        img.samples);
  CHECK(augment(variants[2].image, variants[2].mask)[2].image.samples ==
        img.samples);

  // rot180 equals flip-LR composed with flip-TD
  auto flipped = augment(variants[2].image, variants[2].mask)[1];
  CHECK(flipped.image.samples == variants[4].image.samples);
  CHECK(flipped.mask.labels == variants[4].mask.labels);

  // constant patch is a fixed point of the whole family
  RasterImage flat;
  flat.width = flat.height = 4;
  flat.channels = 1;
  flat.samples.assign(16, 77);
  Mask zeros;
  zeros.width = zeros.height = 4;
  zeros.labels.assign(16, 0);
  for (const Sample& v : augment(flat, zeros))
    CHECK(v.image.samples == flat.samples);

  RasterImage rect = gradient_image(6, 4, 1);
  Mask rect_mask = stripe_mask(6, 4);
  CHECK_THROWS_WITH_AS(augment(rect, rect_mask), doctest::Contains("square"),
                       std::invalid_argument);
}

TEST_CASE("augment keeps image and mask aligned") {
  RasterImage img;
  img.width = img.height = 5;
  img.channels = 1;
  img.samples.assign(25, 0);
  Mask mask;
  mask.width = mask.height = 5;
  mask.labels.assign(25, 0);
  img.samples[1 * 5 + 3] = 255;  // marked pixel at (x=3, y=1)
  mask.labels[1 * 5 + 3] = 1;
  for (const Sample& v : augment(img, mask)) {
    int img_at = -1, mask_at = -1;
    for (int i = 0; i < 25; ++i) {
      if (v.image.samples[i] == 255) img_at = i;
      if (v.mask.labels[i] == 1) mask_at = i;
    }
    CHECK(img_at == mask_at);
    CHECK(img_at >= 0);
  }
}

TEST_CASE("synthetic scenes: determinism, mask union oracle, edge cases") {
  SynthConfig cfg;
  cfg.size = 32;
  cfg.count = 4;
  cfg.max_building_size = 10;
  cfg.seed = 99;

  Dataset a = synth_dataset(cfg);
  Dataset b = synth_dataset(cfg);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].image.samples == b.samples[i].image.samples);
    CHECK(a.samples[i].mask.labels == b.samples[i].mask.labels);
  }

  cfg.seed = 100;
  Dataset c = synth_dataset(cfg);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    differs = differs || a.samples[i].mask.labels != c.samples[i].mask.labels;
  CHECK(differs);

  // mask equals an independent rasterization of the rectangle union
  Rng rng = Rng::stream(cfg.seed, 3);
  for (int s = 0; s < 4; ++s) {
    SynthSample sample = synth_sample(cfg, rng);
    std::vector<std::uint8_t> expect(static_cast<std::size_t>(32) * 32, 0);
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        for (const Rect& r : sample.rects)
          if (x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h)
            expect[y * 32 + x] = 1;
    CHECK(sample.mask.labels == expect);
  }

  SynthConfig empty = cfg;
  empty.min_buildings = empty.max_buildings = 0;
  for (const Sample& s : synth_dataset(empty).samples)
    for (std::uint8_t v : s.mask.labels) CHECK(v == 0);

  SynthConfig oversized = cfg;
  oversized.max_building_size = 64;
  CHECK_THROWS_WITH_AS(synth_dataset(oversized), doctest::Contains("exceeds"),
                       std::invalid_argument);
}

TEST_CASE("pnm round-trip and hand-encoded fixtures") {
  TempDir tmp;
  RasterImage rgb = gradient_image(7, 5, 3);
  write_raster(tmp.path / "a.ppm", rgb);
  RasterImage back = read_raster(tmp.path / "a.ppm");
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.channels == 3);
  CHECK(back.samples == rgb.samples);

  Mask m = stripe_mask(6, 4);
  write_mask(tmp.path / "m.pgm", m);
  Mask m2 = read_mask(tmp.path / "m.pgm");
  CHECK(m2.labels == m.labels);

  // 2x2 P5 with payload (0,255,0,255) thresholds to (0,1,0,1)
  {
    std::ofstream f(tmp.path / "fix.pgm", std::ios::binary);
    f << "P5\n2 2\n255\n";
    const unsigned char payload[4] = {0, 255, 0, 255};
    f.write(reinterpret_cast<const char*>(payload), 4);
  }
  Mask fix = read_mask(tmp.path / "fix.pgm");
  CHECK(fix.labels == std::vector<std::uint8_t>{0, 1, 0, 1});

  // single-whitespace header variant
  {
    std::ofstream f(tmp.path / "p6.ppm", std::ios::binary);
    f << "P6 2 2 255\n";
    const std::vector<unsigned char> payload(12, 9);
    f.write(reinterpret_cast<const char*>(payload.data()), 12);
  }
  RasterImage p6 = read_raster(tmp.path / "p6.ppm");
  CHECK(p6.width == 2);
  CHECK(p6.height == 2);
}

TEST_CASE("pnm failures carry distinct diagnostics") {
  TempDir tmp;
  {
    std::ofstream f(tmp.path / "bad_magic.pgm", std::ios::binary);
    f << "P7\n2 2\n255\nxxxx";
  }
  CHECK_THROWS_WITH_AS(read_raster(tmp.path / "bad_magic.pgm"),
                       doctest::Contains("malformed header"), IoError);
  {
    std::ofstream f(tmp.path / "short.pgm", std::ios::binary);
    f << "P5\n4 4\n255\nab";
  }
  CHECK_THROWS_WITH_AS(read_raster(tmp.path / "short.pgm"),
                       doctest::Contains("truncated payload"), IoError);
  {
    std::ofstream f(tmp.path / "deep.pgm", std::ios::binary);
    f << "P5\n2 2\n65535\n";
    const std::vector<unsigned char> payload(8, 1);
    f.write(reinterpret_cast<const char*>(payload.data()), 8);
  }
  CHECK_THROWS_WITH_AS(read_raster(tmp.path / "deep.pgm"),
                       doctest::Contains("unsupported maxval"), IoError);
  CHECK_THROWS_AS(read_raster(tmp.path / "absent.pgm"), IoError);
}

TEST_CASE("directory ingestion pairs by stem and validates dimensions") {
  TempDir tmp;
  fs::create_directories(tmp.path / "images");
  fs::create_directories(tmp.path / "masks");

  Dataset empty = ingest_directory(tmp.path / "images", tmp.path / "masks",
                                   Split::train);
  CHECK(empty.empty());

  RasterImage img = gradient_image(8, 8, 3);
  Mask m = stripe_mask(8, 8);
  write_raster(tmp.path / "images" / "s1.ppm", img);
  write_mask(tmp.path / "masks" / "s1.pgm", m);
  Dataset one = ingest_directory(tmp.path / "images", tmp.path / "masks",
                                 Split::val);
  REQUIRE(one.size() == 1);
  CHECK(one.split == Split::val);
  CHECK(one.samples[0].image.samples == img.samples);
  CHECK(one.samples[0].mask.labels == m.labels);

  // unmatched image
  write_raster(tmp.path / "images" / "s2.ppm", img);
  CHECK_THROWS_WITH_AS(
      ingest_directory(tmp.path / "images", tmp.path / "masks", Split::train),
      doctest::Contains("s2"), IoError);
  fs::remove(tmp.path / "images" / "s2.ppm");

  // dimension mismatch names both sizes
  write_raster(tmp.path / "images" / "s3.ppm", gradient_image(64, 64, 3));
  write_mask(tmp.path / "masks" / "s3.pgm", stripe_mask(32, 32));
  CHECK_THROWS_WITH_AS(
      ingest_directory(tmp.path / "images", tmp.path / "masks", Split::train),
      doctest::Contains("64x64"), IoError);
  CHECK_THROWS_WITH_AS(
      ingest_directory(tmp.path / "images", tmp.path / "masks", Split::train),
      doctest::Contains("32x32"), IoError);
}

TEST_CASE("tensor bridging scales to [0,1] and splits channels") {
  RasterImage img;
  img.width = 2;
  img.height = 1;
  img.channels = 3;
  img.samples = {255, 0, 128, 0, 255, 64};  // two RGB pixels
  Tensor t = image_to_tensor(img);
  REQUIRE(t.shape() == Shape{1, 3, 1, 2});
  CHECK(t.data()[0] == doctest::Approx(1.0));        // R plane: pixel 0
  CHECK(t.data()[1] == doctest::Approx(0.0));        // R plane: pixel 1
  CHECK(t.data()[2] == doctest::Approx(0.0));        // G plane: pixel 0
  CHECK(t.data()[3] == doctest::Approx(1.0));        // G plane: pixel 1
  CHECK(t.data()[4] == doctest::Approx(128.0 / 255));
  CHECK(t.data()[5] == doctest::Approx(64.0 / 255));

  Mask m;
  m.width = 2;
  m.height = 2;
  m.labels = {1, 0, 0, 1};
  const int idx[2] = {0, 0};
  Tensor mt = mask_batch({m}, idx);
  REQUIRE(mt.shape() == Shape{2, 1, 2, 2});
  CHECK(mt.data()[0] == 1.0);
  CHECK(mt.data()[1] == 0.0);
  CHECK(mt.data()[4] == 1.0);
}
