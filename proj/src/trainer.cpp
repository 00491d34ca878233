#include "advseg/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "advseg/rng.hpp"

namespace advseg {

namespace {

constexpr std::uint64_t kShuffleStream = 2;

struct PatchPool {
  std::vector<RasterImage> images;
  std::vector<Mask> masks;
};

PatchPool build_pool(const Dataset& data, int patch, bool with_augment) {
  PatchPool pool;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    if (s.image.width < patch || s.image.height < patch)
      throw std::invalid_argument(
          "train: sample " + std::to_string(i) + " is " +
          std::to_string(s.image.width) + "x" + std::to_string(s.image.height) +
          ", smaller than patch " + std::to_string(patch));
    for (const Sample& t : tile(s.image, s.mask, patch)) {
      if (with_augment) {
        for (Sample& v : augment(t.image, t.mask)) {
          pool.images.push_back(std::move(v.image));
          pool.masks.push_back(std::move(v.mask));
        }
      } else {
        pool.images.push_back(t.image);
        pool.masks.push_back(t.mask);
      }
    }
  }
  return pool;
}

void fisher_yates(std::vector<int>& order, Rng& rng) {
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
}

double batch_mean(const Tensor& t) {
  double acc = 0.0;
  for (int i = 0; i < t.numel(); ++i) acc += t.data()[i];
  return acc / t.numel();
}

// [1 x 1 x H x W] probability slice of sample b
Tensor slice_prob(const Tensor& batch, int b) {
  const int h = batch.dim(2), w = batch.dim(3);
  std::vector<double> values(static_cast<std::size_t>(h) * w);
  std::copy_n(batch.data() + static_cast<std::size_t>(b) * h * w, values.size(),
              values.begin());
  return Tensor({1, 1, h, w}, std::move(values));
}

MetricReport evaluate_generator(const Generator& g, const Dataset& data,
                                int patch, int batch_size,
                                const RelaxedParams& params, double threshold) {
  if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
  PatchPool pool;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const Sample& s = data.samples[i];
    if (s.image.channels != 3)
      throw std::invalid_argument("evaluate: sample " + std::to_string(i) +
                                  " has " + std::to_string(s.image.channels) +
                                  " channels, expected 3");
    if (s.image.width < patch || s.image.height < patch)
      throw std::invalid_argument(
          "evaluate: sample " + std::to_string(i) + " is " +
          std::to_string(s.image.width) + "x" + std::to_string(s.image.height) +
          ", smaller than patch " + std::to_string(patch));
    for (Sample& t : tile(s.image, s.mask, patch)) {
      pool.images.push_back(std::move(t.image));
      pool.masks.push_back(std::move(t.mask));
    }
  }

  std::vector<MetricReport> reports;
  const int total = static_cast<int>(pool.images.size());
  for (int start = 0; start < total; start += batch_size) {
    const int n = std::min(batch_size, total - start);
    std::vector<int> chunk(static_cast<std::size_t>(n));
    std::iota(chunk.begin(), chunk.end(), start);
    const Tensor x = image_batch(pool.images, chunk);
    const Tensor y_hat = generator_forward(g, x);
    for (int b = 0; b < n; ++b) {
      const Mask pred = binarize(slice_prob(y_hat, b), threshold);
      reports.push_back(
          evaluate_pair(pred, pool.masks[static_cast<std::size_t>(start + b)],
                        params));
    }
  }
  return aggregate(reports);
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& train_data,
                  const Dataset* val_data, std::ostream* progress) {
  config.validate();
  if (train_data.empty()) throw std::invalid_argument("train: empty dataset");

  const PatchPool pool = build_pool(train_data, config.patch, true);

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.config = config;
  ckpt.generator = generator_from_config(config);
  ckpt.discriminator = discriminator_from_config(config);
  const std::vector<Tensor> g_params = ckpt.generator.parameters();
  std::vector<Tensor> d_params;
  if (ckpt.discriminator) d_params = ckpt.discriminator->parameters();
  ckpt.g_optim =
      AdamState::init(g_params, config.g_lr, config.g_beta1, config.g_beta2);
  if (ckpt.discriminator)
    ckpt.d_optim =
        AdamState::init(d_params, config.d_lr, config.d_beta1, config.d_beta2);

  Rng shuffle_rng = Rng::stream(config.seed, kShuffleStream);
  std::vector<int> order(pool.images.size());
  std::iota(order.begin(), order.end(), 0);

  bool first_batch = true;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    fisher_yates(order, shuffle_rng);
    double sum_ce = 0, sum_adv_g = 0, sum_adv_d = 0, sum_d_real = 0,
           sum_d_fake = 0;
    int batches = 0, d_passes = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t n = std::min<std::size_t>(config.batch_size,
                                                  order.size() - start);
      const std::span<const int> chunk(order.data() + start, n);
      const Tensor x = image_batch(pool.images, chunk);
      const Tensor y = mask_batch(pool.masks, chunk);

      // generator update on the combined loss
      Tape tg;
      const Tensor y_hat = generator_forward(ckpt.generator, x, &tg);
      const LossValue ce = bce_loss(y_hat, y, &tg);
      LossValue total = ce;
      if (ckpt.discriminator) {
        const Tensor d_in = config.disc_input == DiscInput::mask
                                ? y_hat
                                : concat_channels(y_hat, x, &tg);
        const Tensor p_fake =
            discriminator_forward(*ckpt.discriminator, d_in, &tg);
        const LossValue adv = adv_loss_g(p_fake, config.adv_mode, &tg);
        total = combined_g_loss(ce, adv, config.adv_weight, &tg);
        sum_adv_g += adv.value();
      }
      if (first_batch) {
        result.first_batch_ce = ce.value();
        first_batch = false;
      }
      if (!std::isfinite(total.value()))
        throw std::runtime_error("train: non-finite generator loss at epoch " +
                                 std::to_string(epoch) + " batch " +
                                 std::to_string(batches));
      zero_grads(g_params);
      if (!d_params.empty()) zero_grads(d_params);
      tg.backward(total.node);
      adam_step(ckpt.g_optim, g_params);
      sum_ce += ce.value();

      // discriminator updates on real masks vs detached generator output
      if (ckpt.discriminator) {
        const Tensor y_hat_frozen = detach(y_hat);
        for (int r = 0; r < config.d_to_g_ratio; ++r) {
          Tape td;
          const Tensor real_in = config.disc_input == DiscInput::mask
                                     ? y
                                     : concat_channels(y, x, &td);
          const Tensor fake_in = config.disc_input == DiscInput::mask
                                     ? y_hat_frozen
                                     : concat_channels(y_hat_frozen, x, &td);
          const Tensor p_real =
              discriminator_forward(*ckpt.discriminator, real_in, &td);
          const Tensor p_fake =
              discriminator_forward(*ckpt.discriminator, fake_in, &td);
          const LossValue d_loss = adv_loss_d(p_real, p_fake, &td);
          if (!std::isfinite(d_loss.value()))
            throw std::runtime_error(
                "train: non-finite discriminator loss at epoch " +
                std::to_string(epoch) + " batch " + std::to_string(batches));
          zero_grads(d_params);
          td.backward(d_loss.node);
          adam_step(*ckpt.d_optim, d_params);
          sum_adv_d += d_loss.value();
          sum_d_real += batch_mean(p_real);
          sum_d_fake += batch_mean(p_fake);
          ++d_passes;
        }
      }
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_ce = sum_ce / batches;
    if (ckpt.discriminator) {
      log.mean_adv_g = sum_adv_g / batches;
      log.mean_adv_d = sum_adv_d / d_passes;
      log.mean_d_real = sum_d_real / d_passes;
      log.mean_d_fake = sum_d_fake / d_passes;
    }
    if (val_data && !val_data->empty())
      log.validation = evaluate_generator(ckpt.generator, *val_data,
                                          config.patch, config.batch_size,
                                          RelaxedParams{}, 0.5);
    if (progress) *progress << epoch_log_line(log) << "\n";
    result.logs.push_back(std::move(log));
  }
  ckpt.epoch = config.epochs;
  return result;
}

MetricReport evaluate(const Checkpoint& ckpt, const Dataset& data,
                      const RelaxedParams& params, double threshold) {
  return evaluate_generator(ckpt.generator, data, ckpt.config.patch,
                            ckpt.config.batch_size, params, threshold);
}

Prediction predict(const Checkpoint& ckpt, const RasterImage& image,
                   const Mask* gt, double threshold) {
  const int patch = ckpt.config.patch;
  if (image.channels != 3)
    throw std::invalid_argument("predict: expected RGB image, got " +
                                std::to_string(image.channels) + " channels");
  if (image.width % patch != 0 || image.height % patch != 0)
    throw std::invalid_argument(
        "predict: image " + std::to_string(image.width) + "x" +
        std::to_string(image.height) + " is not a multiple of patch " +
        std::to_string(patch));
  if (gt && (gt->width != image.width || gt->height != image.height))
    throw std::invalid_argument("predict: mask " + std::to_string(gt->width) +
                                "x" + std::to_string(gt->height) +
                                " does not match image " +
                                std::to_string(image.width) + "x" +
                                std::to_string(image.height));

  Mask zero;
  zero.width = image.width;
  zero.height = image.height;
  zero.labels.assign(static_cast<std::size_t>(image.width) * image.height, 0);
  std::vector<Sample> tiles = tile(image, zero, patch);
  const int tiles_per_row = image.width / patch;

  std::vector<RasterImage> tile_images;
  tile_images.reserve(tiles.size());
  for (Sample& t : tiles) tile_images.push_back(std::move(t.image));

  Prediction out;
  out.mask.width = image.width;
  out.mask.height = image.height;
  out.mask.labels.assign(zero.labels.size(), 0);

  const int total = static_cast<int>(tile_images.size());
  for (int start = 0; start < total; start += ckpt.config.batch_size) {
    const int n = std::min(ckpt.config.batch_size, total - start);
    std::vector<int> chunk(static_cast<std::size_t>(n));
    std::iota(chunk.begin(), chunk.end(), start);
    const Tensor x = image_batch(tile_images, chunk);
    const Tensor y_hat = generator_forward(ckpt.generator, x);
    for (int b = 0; b < n; ++b) {
      const Mask pred = binarize(slice_prob(y_hat, b), threshold);
      const int t = start + b;
      const int x0 = (t % tiles_per_row) * patch;
      const int y0 = (t / tiles_per_row) * patch;
      for (int yy = 0; yy < patch; ++yy)
        std::copy_n(pred.labels.data() + static_cast<std::size_t>(yy) * patch,
                    patch,
                    out.mask.labels.data() +
                        static_cast<std::size_t>(y0 + yy) * image.width + x0);
    }
  }

  if (gt) {
    RasterImage diff;
    diff.width = image.width;
    diff.height = image.height;
    diff.channels = 3;
    diff.samples.resize(static_cast<std::size_t>(image.width) * image.height * 3);
    for (std::size_t i = 0; i < out.mask.labels.size(); ++i) {
      const bool p = out.mask.labels[i] != 0, g = gt->labels[i] != 0;
      std::uint8_t r = 0, gch = 0, b = 0;
      if (p && g) {
        r = gch = b = 255;  // true positive: white
      } else if (p && !g) {
        b = 255;  // false positive: blue
      } else if (!p && g) {
        r = 255;  // false negative: red
      }             // true negative stays black
      diff.samples[i * 3 + 0] = r;
      diff.samples[i * 3 + 1] = gch;
      diff.samples[i * 3 + 2] = b;
    }
    out.diff = std::move(diff);
  }
  return out;
}

std::string epoch_log_line(const EpochLog& log) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "epoch " << log.epoch << "  ce " << log.mean_ce;
  if (log.mean_adv_g) os << "  adv_g " << *log.mean_adv_g;
  if (log.mean_adv_d) os << "  adv_d " << *log.mean_adv_d;
  if (log.mean_d_real) os << "  d_real " << *log.mean_d_real;
  if (log.mean_d_fake) os << "  d_fake " << *log.mean_d_fake;
  if (log.validation)
    os << "  val_iou " << log.validation->iou << "  val_relaxed_f1 "
       << log.validation->relaxed_f1;
  return os.str();
}

}  // namespace advseg
