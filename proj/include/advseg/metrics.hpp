#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "advseg/data.hpp"
#include "advseg/tensor.hpp"

namespace advseg {

struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
};

enum class Distance { euclidean, chebyshev };

struct RelaxedParams {
  int rho = 3;
  Distance distance = Distance::euclidean;
};

// Raw numerators/denominators of the relaxed ratios, kept so that tile
// reports aggregate by summing counts rather than averaging ratios.
struct RelaxedCounts {
  std::uint64_t pred_matched = 0, pred_total = 0;
  std::uint64_t gt_matched = 0, gt_total = 0;
};

struct MetricReport {
  ConfusionCounts counts;
  RelaxedCounts relaxed;
  RelaxedParams params;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0, iou = 0;
  double relaxed_precision = 0, relaxed_recall = 0, relaxed_f1 = 0,
         relaxed_iou = 0;
};

// pixel >= threshold maps to 1; threshold must lie in [0, 1]
Mask binarize(const Tensor& prob, double threshold = 0.5);

ConfusionCounts confusion(const Mask& pred, const Mask& gt);

struct StrictMetrics {
  double accuracy, precision, recall, f1, iou;
};

// Ratios with empty denominator and empty numerator report 1 (vacuously
// perfect); this keeps building-free tiles from poisoning aggregates.
StrictMetrics strict_metrics(const ConfusionCounts& counts);

// pixel set iff any positive source pixel lies within distance rho
Mask dilate(const Mask& mask, const RelaxedParams& params);

RelaxedCounts relaxed_counts(const Mask& pred, const Mask& gt,
                             const RelaxedParams& params);

// (relaxed precision, relaxed recall): fraction of predicted positives within
// rho of a ground-truth positive, and the converse
std::pair<double, double> relaxed_pr(const Mask& pred, const Mask& gt,
                                     const RelaxedParams& params);

// relaxed f1 = harmonic mean of relaxed precision/recall; relaxed iou =
// rTP/(rTP+rFP+rFN) with rTP = |pred & dilate(gt)|, rFP = |pred| - rTP,
// rFN = |gt| - |gt & dilate(pred)|
std::pair<double, double> relaxed_f1_iou(const Mask& pred, const Mask& gt,
                                         const RelaxedParams& params);

MetricReport evaluate_pair(const Mask& pred, const Mask& gt,
                           const RelaxedParams& params);

// sums raw counts across tiles, then computes the ratios
MetricReport aggregate(std::span<const MetricReport> reports);

// flat aligned key-value record; the header states the relaxed-metric
// composition in force
std::string report_text(const MetricReport& report);

}  // namespace advseg
