#pragma once

#include <cstdint>
#include <vector>

#include "advseg/kernels.hpp"

// Deliberately naive serial implementations. Tests use these as independent
// oracles for the parallel kernels; the benchmark measures both. The main
// library must not depend on this translation unit.
namespace advseg::ref {

// direct quadruple-loop cross-correlation
void conv2d_forward(const double* in, const double* weights, const double* bias,
                    const kernels::Conv2dDims& d, double* out);

void conv2d_backward(const double* in, const double* weights, const double* g_out,
                     const kernels::Conv2dDims& d, double* g_in,
                     double* g_weights, double* g_bias);

// triple-loop matrix multiply with bias
void dense_forward(const double* in, const double* weights, const double* bias,
                   int n, int k, int m, double* out);

// scans the whole mask for every output pixel
void dilate(const std::uint8_t* in, int w, int h, int radius, bool euclidean,
            std::uint8_t* out);

// Relaxed confusion numerators by per-pixel nearest-positive-distance search:
// pred_matched counts predicted positives within the radius of some ground
// truth positive, gt_matched the converse.
struct RelaxedHits {
  std::uint64_t pred_matched = 0, pred_total = 0;
  std::uint64_t gt_matched = 0, gt_total = 0;
};
RelaxedHits relaxed_hits(const std::uint8_t* pred, const std::uint8_t* gt, int w,
                         int h, int radius, bool euclidean);

// one Adam step on a scalar parameter; returns the updated value
struct ScalarAdam {
  double m = 0.0, v = 0.0;
  long t = 0;
  double lr, beta1, beta2, eps;
  double step(double theta, double grad);
};

// mean binary cross entropy with the [1e-7, 1-1e-7] probability clamp
double bce(const std::vector<double>& prob, const std::vector<double>& label);

}  // namespace advseg::ref
