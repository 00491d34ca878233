#include "advseg/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace advseg::ref {

using kernels::Conv2dDims;

namespace {

inline int at4(int a, int b, int c, int d, int B, int C, int D) {
  return ((a * B + b) * C + c) * D + d;
}

}  // namespace

void conv2d_forward(const double* in, const double* weights, const double* bias,
                    const Conv2dDims& d, double* out) {
  for (int n = 0; n < d.n; ++n)
    for (int f = 0; f < d.f; ++f)
      for (int oh = 0; oh < d.ho; ++oh)
        for (int ow = 0; ow < d.wo; ++ow) {
          double acc = bias[f];
          for (int c = 0; c < d.c; ++c)
            for (int kh = 0; kh < d.kh; ++kh)
              for (int kw = 0; kw < d.kw; ++kw) {
                const int ih = oh * d.stride - d.pad + kh;
                const int iw = ow * d.stride - d.pad + kw;
                if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                acc += in[at4(n, c, ih, iw, d.c, d.h, d.w)] *
                       weights[at4(f, c, kh, kw, d.c, d.kh, d.kw)];
              }
          out[at4(n, f, oh, ow, d.f, d.ho, d.wo)] = acc;
        }
}

void conv2d_backward(const double* in, const double* weights, const double* g_out,
                     const Conv2dDims& d, double* g_in, double* g_weights,
                     double* g_bias) {
  for (int n = 0; n < d.n; ++n)
    for (int f = 0; f < d.f; ++f)
      for (int oh = 0; oh < d.ho; ++oh)
        for (int ow = 0; ow < d.wo; ++ow) {
          const double g = g_out[at4(n, f, oh, ow, d.f, d.ho, d.wo)];
          if (g_bias) g_bias[f] += g;
          for (int c = 0; c < d.c; ++c)
            for (int kh = 0; kh < d.kh; ++kh)
              for (int kw = 0; kw < d.kw; ++kw) {
                const int ih = oh * d.stride - d.pad + kh;
                const int iw = ow * d.stride - d.pad + kw;
                if (ih < 0 || ih >= d.h || iw < 0 || iw >= d.w) continue;
                const int ii = at4(n, c, ih, iw, d.c, d.h, d.w);
                const int wi = at4(f, c, kh, kw, d.c, d.kh, d.kw);
                if (g_in) g_in[ii] += g * weights[wi];
                if (g_weights) g_weights[wi] += g * in[ii];
              }
        }
}

void dense_forward(const double* in, const double* weights, const double* bias,
                   int n, int k, int m, double* out) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double acc = bias[j];
      for (int kk = 0; kk < k; ++kk) acc += in[i * k + kk] * weights[kk * m + j];
      out[i * m + j] = acc;
    }
}

void dilate(const std::uint8_t* in, int w, int h, int radius, bool euclidean,
            std::uint8_t* out) {
  const int r2 = radius * radius;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t hit = 0;
      for (int sy = 0; sy < h && !hit; ++sy)
        for (int sx = 0; sx < w; ++sx) {
          if (!in[sy * w + sx]) continue;
          const int dy = sy - y, dx = sx - x;
          const bool close = euclidean ? (dx * dx + dy * dy <= r2)
                                       : (std::max(std::abs(dx), std::abs(dy)) <=
                                          radius);
          if (close) {
            hit = 1;
            break;
          }
        }
      out[y * w + x] = hit;
    }
}

RelaxedHits relaxed_hits(const std::uint8_t* pred, const std::uint8_t* gt, int w,
                         int h, int radius, bool euclidean) {
  const int r2 = radius * radius;
  auto within = [&](const std::uint8_t* other, int y, int x) {
    for (int sy = 0; sy < h; ++sy)
      for (int sx = 0; sx < w; ++sx) {
        if (!other[sy * w + sx]) continue;
        const int dy = sy - y, dx = sx - x;
        const bool close = euclidean ? (dx * dx + dy * dy <= r2)
                                     : (std::max(std::abs(dx), std::abs(dy)) <=
                                        radius);
        if (close) return true;
      }
    return false;
  };
  RelaxedHits hits;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (pred[y * w + x]) {
        ++hits.pred_total;
        if (within(gt, y, x)) ++hits.pred_matched;
      }
      if (gt[y * w + x]) {
        ++hits.gt_total;
        if (within(pred, y, x)) ++hits.gt_matched;
      }
    }
  return hits;
}

double ScalarAdam::step(double theta, double grad) {
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const double mhat = m / (1.0 - std::pow(beta1, t));
  const double vhat = v / (1.0 - std::pow(beta2, t));
  return theta - lr * mhat / (std::sqrt(vhat) + eps);
}

double bce(const std::vector<double>& prob, const std::vector<double>& label) {
  if (prob.size() != label.size())
    throw std::invalid_argument("ref::bce: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], 1e-7, 1.0 - 1e-7);
    acc += -(label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p));
  }
  return acc / static_cast<double>(prob.size());
}

}  // namespace advseg::ref
