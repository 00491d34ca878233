#include "advseg/models.hpp"

#include <cmath>
#include <stdexcept>

#include "advseg/rng.hpp"

namespace advseg {

namespace {

constexpr int kDiscFilters[4] = {32, 64, 128, 256};
constexpr int kDiscFc1Width = 512;

void fill_normal(Tensor& t, Rng& rng, double stddev) {
  for (double& v : t.values()) v = rng.normal(0.0, stddev);
}

// He scaling for layers feeding ELU/ReLU, Glorot for the sigmoid output layer
ConvLayer make_conv(int in_c, int out_c, int k, int stride, int pad, Rng& rng,
                    bool sigmoid_out = false) {
  ConvLayer layer;
  layer.weights = Tensor({out_c, in_c, k, k});
  layer.bias = Tensor({out_c});
  layer.stride = stride;
  layer.padding = pad;
  const double fan_in = static_cast<double>(in_c) * k * k;
  const double fan_out = static_cast<double>(out_c) * k * k;
  const double stddev = sigmoid_out ? std::sqrt(2.0 / (fan_in + fan_out))
                                    : std::sqrt(2.0 / fan_in);
  fill_normal(layer.weights, rng, stddev);
  return layer;
}

DenseLayer make_dense(int in_w, int out_w, Rng& rng, bool sigmoid_out = false) {
  DenseLayer layer;
  layer.weights = Tensor({in_w, out_w});
  layer.bias = Tensor({out_w});
  const double stddev = sigmoid_out
                            ? std::sqrt(2.0 / (in_w + static_cast<double>(out_w)))
                            : std::sqrt(2.0 / in_w);
  fill_normal(layer.weights, rng, stddev);
  return layer;
}

void push_layer(NamedParams& out, const std::string& name, const Tensor& w,
                const Tensor& b) {
  out.emplace_back(name + ".w", w);
  out.emplace_back(name + ".b", b);
}

long count_params(const NamedParams& params) {
  long total = 0;
  for (const auto& [name, t] : params) total += t.numel();
  return total;
}

}  // namespace

NamedParams Discriminator::named_parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < convs.size(); ++i)
    push_layer(out, "conv" + std::to_string(i), convs[i].weights, convs[i].bias);
  push_layer(out, "fc1", fc1.weights, fc1.bias);
  push_layer(out, "fc2", fc2.weights, fc2.bias);
  return out;
}

std::vector<Tensor> Discriminator::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

long Discriminator::parameter_count() const {
  return count_params(named_parameters());
}

NamedParams Generator::named_parameters() const {
  NamedParams out;
  for (std::size_t i = 0; i < encoder.size(); ++i)
    push_layer(out, "enc" + std::to_string(i), encoder[i].weights,
               encoder[i].bias);
  for (std::size_t i = 0; i < decoder.size(); ++i)
    push_layer(out, "dec" + std::to_string(i), decoder[i].weights,
               decoder[i].bias);
  push_layer(out, "head", head.weights, head.bias);
  return out;
}

std::vector<Tensor> Generator::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

long Generator::parameter_count() const { return count_params(named_parameters()); }

Discriminator build_discriminator(int input_h, int input_w, int in_channels,
                                  std::uint64_t rng_seed) {
  if (input_h % 16 != 0 || input_w % 16 != 0)
    throw std::invalid_argument(
        "build_discriminator: input " + std::to_string(input_h) + "x" +
        std::to_string(input_w) +
        " must be divisible by 16 (four stride-2 halvings)");
  if (in_channels < 1)
    throw std::invalid_argument("build_discriminator: in_channels must be >= 1");
  Rng rng(mix_seed(rng_seed));
  Discriminator d;
  d.input_h = input_h;
  d.input_w = input_w;
  d.in_channels = in_channels;
  int c = in_channels;
  for (int f : kDiscFilters) {
    d.convs.push_back(make_conv(c, f, 3, 2, 1, rng));
    c = f;
  }
  const int flat = (input_h / 16) * (input_w / 16) * kDiscFilters[3];
  d.fc1 = make_dense(flat, kDiscFc1Width, rng);
  d.fc2 = make_dense(kDiscFc1Width, 1, rng, /*sigmoid_out=*/true);
  return d;
}

Generator build_generator(int input_h, int input_w, const GeneratorConfig& config,
                          std::uint64_t rng_seed) {
  if (config.depth < 0)
    throw std::invalid_argument("build_generator: depth must be >= 0");
  if (config.base_width < 1)
    throw std::invalid_argument("build_generator: base_width must be >= 1");
  const int factor = 1 << config.depth;
  if (input_h % factor != 0 || input_w % factor != 0)
    throw std::invalid_argument(
        "build_generator: input " + std::to_string(input_h) + "x" +
        std::to_string(input_w) + " must be divisible by 2^depth = " +
        std::to_string(factor));
  Rng rng(mix_seed(rng_seed));
  Generator g;
  g.config = config;
  int c = config.in_channels;
  for (int i = 0; i < config.depth; ++i) {
    const int width = config.base_width << i;
    g.encoder.push_back(make_conv(c, width, 3, 2, 1, rng));
    c = width;
  }
  for (int i = config.depth - 1; i >= 0; --i) {
    // level i upsamples to H / 2^i; skip concatenation pairs it with the
    // encoder activation at that resolution (none exists at full resolution)
    int in_c = config.base_width << i;
    if (config.skip_connections && i >= 1) in_c += config.base_width << (i - 1);
    const int out_c = i >= 1 ? (config.base_width << (i - 1)) : config.base_width;
    g.decoder.push_back(make_conv(in_c, out_c, 3, 1, 1, rng));
  }
  const int head_in = config.depth > 0 ? config.base_width : config.in_channels;
  g.head = make_conv(head_in, 1, 3, 1, 1, rng, /*sigmoid_out=*/true);
  return g;
}

Tensor discriminator_forward(const Discriminator& d, const Tensor& input,
                             Tape* tape) {
  if (input.shape().size() != 4 || input.dim(1) != d.in_channels ||
      input.dim(2) != d.input_h || input.dim(3) != d.input_w)
    throw std::invalid_argument(
        "discriminator_forward: input " + shape_str(input.shape()) +
        " does not match build [N x " + std::to_string(d.in_channels) + " x " +
        std::to_string(d.input_h) + " x " + std::to_string(d.input_w) + "]");
  Tensor x = input;
  for (const ConvLayer& layer : d.convs)
    x = elu(conv2d(x, layer.weights, layer.bias, layer.stride, layer.padding, tape),
            1.0, tape);
  x = flatten(x, tape);
  x = elu(dense(x, d.fc1.weights, d.fc1.bias, tape), 1.0, tape);
  return sigmoid(dense(x, d.fc2.weights, d.fc2.bias, tape), tape);
}

Tensor generator_forward(const Generator& g, const Tensor& input, Tape* tape) {
  const int factor = 1 << g.config.depth;
  if (input.shape().size() != 4 || input.dim(1) != g.config.in_channels)
    throw std::invalid_argument("generator_forward: input " +
                                shape_str(input.shape()) + " must have " +
                                std::to_string(g.config.in_channels) +
                                " channels");
  if (input.dim(2) % factor != 0 || input.dim(3) % factor != 0)
    throw std::invalid_argument(
        "generator_forward: spatial size of " + shape_str(input.shape()) +
        " must be divisible by 2^depth = " + std::to_string(factor));
  Tensor x = input;
  std::vector<Tensor> skips;
  for (const ConvLayer& layer : g.encoder) {
    x = elu(conv2d(x, layer.weights, layer.bias, layer.stride, layer.padding, tape),
            1.0, tape);
    skips.push_back(x);
  }
  for (std::size_t j = 0; j < g.decoder.size(); ++j) {
    const int level = g.config.depth - 1 - static_cast<int>(j);
    x = upsample_nn(x, 2, tape);
    if (g.config.skip_connections && level >= 1)
      x = concat_channels(x, skips[static_cast<std::size_t>(level) - 1], tape);
    const ConvLayer& layer = g.decoder[j];
    x = elu(conv2d(x, layer.weights, layer.bias, layer.stride, layer.padding, tape),
            1.0, tape);
  }
  return sigmoid(conv2d(x, g.head.weights, g.head.bias, g.head.stride,
                        g.head.padding, tape),
                 tape);
}

}  // namespace advseg
