#pragma once

#include <cstdint>

// Raw array kernels behind the tensor ops. All loops are written so that each
// output element is owned by exactly one OpenMP thread and accumulated in a
// fixed serial order; results are therefore identical for any thread count.
// Backward kernels accumulate (+=) into the gradient buffers.
namespace advseg::kernels {

struct Conv2dDims {
  int n, c, h, w;      // input
  int f, kh, kw;       // kernels
  int stride, pad;
  int ho, wo;          // output spatial size
};

void conv2d_forward(const double* in, const double* weights, const double* bias,
                    const Conv2dDims& d, double* out);

// any of g_in / g_weights / g_bias may be null to skip that gradient
void conv2d_backward(const double* in, const double* weights, const double* g_out,
                     const Conv2dDims& d, double* g_in, double* g_weights,
                     double* g_bias);

void dense_forward(const double* in, const double* weights, const double* bias,
                   int n, int k, int m, double* out);

void dense_backward(const double* in, const double* weights, const double* g_out,
                    int n, int k, int m, double* g_in, double* g_weights,
                    double* g_bias);

void upsample_nn_forward(const double* in, int n, int c, int h, int w, int factor,
                         double* out);

void upsample_nn_backward(const double* g_out, int n, int c, int h, int w,
                          int factor, double* g_in);

// binary dilation: out pixel is 1 iff some positive input pixel lies within
// the given radius; euclidean=false selects the Chebyshev metric
void dilate(const std::uint8_t* in, int w, int h, int radius, bool euclidean,
            std::uint8_t* out);

}  // namespace advseg::kernels
