#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "advseg/tensor.hpp"

namespace advseg {

struct ConvLayer {
  Tensor weights;  // [F, C, kh, kw]
  Tensor bias;     // [F]
  int stride = 1;
  int padding = 1;
};

struct DenseLayer {
  Tensor weights;  // [K, M]
  Tensor bias;     // [M]
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Mask critic: 4 stride-2 3x3 conv layers with 32/64/128/256 filters, ELU
// after each, then flatten -> dense(512) -> ELU -> dense(1) -> sigmoid.
// No normalization layers. Input height/width are fixed at build time by the
// flatten width.
struct Discriminator {
  int input_h = 0, input_w = 0, in_channels = 1;
  std::vector<ConvLayer> convs;
  DenseLayer fc1, fc2;

  NamedParams named_parameters() const;
  std::vector<Tensor> parameters() const;
  long parameter_count() const;
};

struct GeneratorConfig {
  int in_channels = 3;
  int depth = 3;
  int base_width = 16;
  bool skip_connections = false;
};

// Encoder-decoder probability-map network: `depth` stride-2 conv+ELU blocks
// with widths doubling from base_width, a mirrored decoder of nearest
// neighbor upsample + conv + ELU, and a final 1-filter conv + sigmoid.
// depth 0 degenerates to the final conv+sigmoid at full resolution.
struct Generator {
  GeneratorConfig config;
  std::vector<ConvLayer> encoder;
  std::vector<ConvLayer> decoder;
  ConvLayer head;

  NamedParams named_parameters() const;
  std::vector<Tensor> parameters() const;
  long parameter_count() const;
};

Discriminator build_discriminator(int input_h, int input_w, int in_channels,
                                  std::uint64_t rng_seed);

Generator build_generator(int input_h, int input_w, const GeneratorConfig& config,
                          std::uint64_t rng_seed);

// input [N, Cd, H, W] with values in [0, 1] -> probabilities [N, 1]
Tensor discriminator_forward(const Discriminator& d, const Tensor& input,
                             Tape* tape = nullptr);

// input [N, C, H, W] scaled to [0, 1] -> probabilities [N, 1, H, W]
Tensor generator_forward(const Generator& g, const Tensor& input,
                         Tape* tape = nullptr);

}  // namespace advseg
