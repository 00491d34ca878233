#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "advseg/checkpoint.hpp"
#include "advseg/metrics.hpp"

namespace advseg {

struct EpochLog {
  int epoch = 0;
  double mean_ce = 0.0;
  // present only for adversarial runs
  std::optional<double> mean_adv_g;
  std::optional<double> mean_adv_d;
  std::optional<double> mean_d_real;
  std::optional<double> mean_d_fake;
  std::optional<MetricReport> validation;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> logs;
  double first_batch_ce = 0.0;  // cross entropy of batch 1 before any update
};

// Per batch: forward G, combined cross-entropy + adversarial loss, G Adam
// step; then d_to_g_ratio discriminator passes on D(y) and D(detached yhat).
// One epoch walks the 6x-augmented patch pool in seeded-shuffled order.
// Deterministic given config.seed. Non-finite losses abort with the
// offending batch.
TrainResult train(const TrainConfig& config, const Dataset& train_data,
                  const Dataset* val_data = nullptr,
                  std::ostream* progress = nullptr);

// Tiles every sample, forwards the generator, binarizes at the threshold and
// aggregates counts globally across all tiles.
MetricReport evaluate(const Checkpoint& ckpt, const Dataset& data,
                      const RelaxedParams& params = {}, double threshold = 0.5);

struct Prediction {
  Mask mask;
  // diff colors: white TP, black TN, blue FP, red FN
  std::optional<RasterImage> diff;
};

// Image dimensions must be exact multiples of the checkpoint patch size.
Prediction predict(const Checkpoint& ckpt, const RasterImage& image,
                   const Mask* gt = nullptr, double threshold = 0.5);

std::string epoch_log_line(const EpochLog& log);

}  // namespace advseg
