#include "advseg/kernels.hpp"

#include <algorithm>
#include <cstddef>

namespace advseg::kernels {

namespace {

inline int idx4(int a, int b, int c, int d, int B, int C, int D) {
  return ((a * B + b) * C + c) * D + d;
}

// valid ow range so that iw = ow * stride + base lies in [0, w)
inline void ow_range(int wo, int stride, int base, int w, int& ow0, int& ow1) {
  ow0 = 0;
  while (ow0 < wo && ow0 * stride + base < 0) ++ow0;
  ow1 = wo;
  while (ow1 > ow0 && (ow1 - 1) * stride + base >= w) --ow1;
}

// Stride-2 rows read every other input element; splitting rows into even and
// odd phases turns those gathers into contiguous streams. Tap kw reads
// iw = 2*ow + kw - pad: even iw lands in the even phase at iw/2, odd iw in
// the odd phase at (iw-1)/2.
struct Deinterleaved {
  std::vector<double> even, odd;
  int half_e = 0, half_o = 0;

  void build(const double* in, int rows, int w) {
    half_e = (w + 1) / 2;
    half_o = w / 2;
    even.resize(static_cast<std::size_t>(rows) * half_e);
    odd.resize(static_cast<std::size_t>(rows) * half_o);
    for (int r = 0; r < rows; ++r) {
      const double* src = in + static_cast<std::size_t>(r) * w;
      double* e = even.data() + static_cast<std::size_t>(r) * half_e;
      double* o = odd.data() + static_cast<std::size_t>(r) * half_o;
      for (int j = 0; j < half_e; ++j) e[j] = src[2 * j];
      for (int j = 0; j < half_o; ++j) o[j] = src[2 * j + 1];
    }
  }
  // phase row pointer and per-ow offset for tap base = kw - pad
  const double* row(int r, int base, int& offset) const {
    if (base % 2 == 0) {
      offset = base / 2;
      return even.data() + static_cast<std::size_t>(r) * half_e;
    }
    offset = (base - 1) / 2;
    return odd.data() + static_cast<std::size_t>(r) * half_o;
  }
};

}  // namespace

void conv2d_forward(const double* in, const double* weights, const double* bias,
                    const Conv2dDims& d, double* out) {
  const bool fused3 = d.stride == 1 && d.kw == 3;
  const bool strided3 = d.stride == 2 && d.kw == 3;
  Deinterleaved phases;
  if (strided3) phases.build(in, d.n * d.c * d.h, d.w);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < d.n; ++n) {
    for (int f = 0; f < d.f; ++f) {
      for (int oh = 0; oh < d.ho; ++oh) {
        double* orow = out + idx4(n, f, oh, 0, d.f, d.ho, d.wo);
        for (int ow = 0; ow < d.wo; ++ow) orow[ow] = bias[f];
        for (int c = 0; c < d.c; ++c) {
          for (int kh = 0; kh < d.kh; ++kh) {
            const int ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.h) continue;
            const double* irow = in + idx4(n, c, ih, 0, d.c, d.h, d.w);
            const double* wrow = weights + idx4(f, c, kh, 0, d.c, d.kh, d.kw);
            if (strided3) {
              const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
              const int row = (n * d.c + c) * d.h + ih;
              int o0, o1, o2;
              const double* s0 = phases.row(row, 0 - d.pad, o0);
              const double* s1 = phases.row(row, 1 - d.pad, o1);
              const double* s2 = phases.row(row, 2 - d.pad, o2);
              int lo = 0, hi = d.wo;
              for (int kw = 0; kw < 3; ++kw) {
                int a, b;
                ow_range(d.wo, 2, kw - d.pad, d.w, a, b);
                lo = std::max(lo, a);
                hi = std::min(hi, b);
              }
              hi = std::max(lo, hi);
              for (int ow = 0; ow < lo; ++ow)
                for (int kw = 0; kw < 3; ++kw) {
                  const int iw = 2 * ow + kw - d.pad;
                  if (iw >= 0 && iw < d.w) orow[ow] += wrow[kw] * irow[iw];
                }
              for (int ow = lo; ow < hi; ++ow)
                orow[ow] +=
                    w0 * s0[ow + o0] + w1 * s1[ow + o1] + w2 * s2[ow + o2];
              for (int ow = hi; ow < d.wo; ++ow)
                for (int kw = 0; kw < 3; ++kw) {
                  const int iw = 2 * ow + kw - d.pad;
                  if (iw >= 0 && iw < d.w) orow[ow] += wrow[kw] * irow[iw];
                }
            } else if (fused3) {
              // all three taps in one pass over the interior of the row
              const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
              const int lo = std::min(d.wo, std::max(0, d.pad));
              const int hi = std::max(lo, std::min(d.wo, d.w - 3 + d.pad + 1));
              for (int ow = 0; ow < lo; ++ow)
                for (int kw = 0; kw < 3; ++kw) {
                  const int iw = ow + kw - d.pad;
                  if (iw >= 0 && iw < d.w) orow[ow] += wrow[kw] * irow[iw];
                }
              const int b0 = -d.pad;
              for (int ow = lo; ow < hi; ++ow)
                orow[ow] += w0 * irow[ow + b0] + w1 * irow[ow + b0 + 1] +
                            w2 * irow[ow + b0 + 2];
              for (int ow = hi; ow < d.wo; ++ow)
                for (int kw = 0; kw < 3; ++kw) {
                  const int iw = ow + kw - d.pad;
                  if (iw >= 0 && iw < d.w) orow[ow] += wrow[kw] * irow[iw];
                }
            } else {
              for (int kw = 0; kw < d.kw; ++kw) {
                const double wv = wrow[kw];
                const int base = kw - d.pad;
                int ow0, ow1;
                ow_range(d.wo, d.stride, base, d.w, ow0, ow1);
                for (int ow = ow0; ow < ow1; ++ow)
                  orow[ow] += wv * irow[ow * d.stride + base];
              }
            }
          }
        }
      }
    }
  }
}

namespace {

void conv2d_backward_input(const double* weights, const double* g_out,
                           const Conv2dDims& d, double* g_in) {
  const bool fused3 = d.stride == 1 && d.kw == 3;
  // each thread owns one (n, c) input slice
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      for (int f = 0; f < d.f; ++f) {
        if (fused3) {
          // transposed 3-tap stencil: one store per input element
          for (int kh = 0; kh < d.kh; ++kh) {
            const double* wrow = weights + idx4(f, c, kh, 0, d.c, d.kh, d.kw);
            const double w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
            for (int ih = 0; ih < d.h; ++ih) {
              const int oh = ih + d.pad - kh;
              if (oh < 0 || oh >= d.ho) continue;
              const double* grow = g_out + idx4(n, f, oh, 0, d.f, d.ho, d.wo);
              double* girow = g_in + idx4(n, c, ih, 0, d.c, d.h, d.w);
              // ow = iw + pad - kw must lie in [0, wo)
              const int lo = std::min(d.w, std::max(0, 2 - d.pad));
              const int hi = std::max(lo, std::min(d.w, d.wo - d.pad));
              for (int iw = 0; iw < lo; ++iw)
                for (int kw = 0; kw < 3; ++kw) {
                  const int ow = iw + d.pad - kw;
                  if (ow >= 0 && ow < d.wo) girow[iw] += wrow[kw] * grow[ow];
                }
              const double* gp = grow + d.pad;
              for (int iw = lo; iw < hi; ++iw)
                girow[iw] +=
                    w0 * gp[iw] + w1 * gp[iw - 1] + w2 * gp[iw - 2];
              for (int iw = hi; iw < d.w; ++iw)
                for (int kw = 0; kw < 3; ++kw) {
                  const int ow = iw + d.pad - kw;
                  if (ow >= 0 && ow < d.wo) girow[iw] += wrow[kw] * grow[ow];
                }
            }
          }
        } else {
          for (int oh = 0; oh < d.ho; ++oh) {
            const double* grow = g_out + idx4(n, f, oh, 0, d.f, d.ho, d.wo);
            for (int kh = 0; kh < d.kh; ++kh) {
              const int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.h) continue;
              double* girow = g_in + idx4(n, c, ih, 0, d.c, d.h, d.w);
              for (int kw = 0; kw < d.kw; ++kw) {
                const double wv = weights[idx4(f, c, kh, kw, d.c, d.kh, d.kw)];
                const int base = kw - d.pad;
                int ow0, ow1;
                ow_range(d.wo, d.stride, base, d.w, ow0, ow1);
                for (int ow = ow0; ow < ow1; ++ow)
                  girow[ow * d.stride + base] += wv * grow[ow];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weights_k3(const double* in, const double* g_out,
                                const Conv2dDims& d, double* g_weights) {
  // all three kw taps accumulate in one pass over each output row
#pragma omp parallel for collapse(2) schedule(static)
  for (int f = 0; f < d.f; ++f) {
    for (int c = 0; c < d.c; ++c) {
      for (int kh = 0; kh < d.kh; ++kh) {
        double a0 = 0.0, a1 = 0.0, a2 = 0.0;
        double e0 = 0.0, e1 = 0.0, e2 = 0.0;  // guarded edge contributions
        for (int n = 0; n < d.n; ++n) {
          for (int oh = 0; oh < d.ho; ++oh) {
            const int ih = oh * d.stride - d.pad + kh;
            if (ih < 0 || ih >= d.h) continue;
            const double* grow = g_out + idx4(n, f, oh, 0, d.f, d.ho, d.wo);
            const double* irow = in + idx4(n, c, ih, 0, d.c, d.h, d.w);
            // interior where all of iw, iw+1, iw+2 are valid
            int lo = 0, hi = d.wo;
            {
              int a, b;
              ow_range(d.wo, d.stride, 0 - d.pad, d.w, a, b);
              lo = std::max(lo, a);
              hi = std::min(hi, b);
              ow_range(d.wo, d.stride, 2 - d.pad, d.w, a, b);
              lo = std::max(lo, a);
              hi = std::min(hi, b);
            }
            hi = std::max(lo, hi);
            for (int ow = 0; ow < lo; ++ow) {
              const double g = grow[ow];
              const int iw = ow * d.stride - d.pad;
              if (iw >= 0 && iw < d.w) e0 += g * irow[iw];
              if (iw + 1 >= 0 && iw + 1 < d.w) e1 += g * irow[iw + 1];
              if (iw + 2 >= 0 && iw + 2 < d.w) e2 += g * irow[iw + 2];
            }
            for (int ow = lo; ow < hi; ++ow) {
              const double g = grow[ow];
              const int iw = ow * d.stride - d.pad;
              a0 += g * irow[iw];
              a1 += g * irow[iw + 1];
              a2 += g * irow[iw + 2];
            }
            for (int ow = hi; ow < d.wo; ++ow) {
              const double g = grow[ow];
              const int iw = ow * d.stride - d.pad;
              if (iw >= 0 && iw < d.w) e0 += g * irow[iw];
              if (iw + 1 >= 0 && iw + 1 < d.w) e1 += g * irow[iw + 1];
              if (iw + 2 >= 0 && iw + 2 < d.w) e2 += g * irow[iw + 2];
            }
          }
        }
        double* gw = g_weights + idx4(f, c, kh, 0, d.c, d.kh, d.kw);
        gw[0] += a0 + e0;
        gw[1] += a1 + e1;
        gw[2] += a2 + e2;
      }
    }
  }
}

void conv2d_backward_weights(const double* in, const double* g_out,
                             const Conv2dDims& d, double* g_weights) {
  if (d.kw == 3) {
    conv2d_backward_weights_k3(in, g_out, d, g_weights);
    return;
  }
  const bool strided = d.stride == 2;
  Deinterleaved phases;
  if (strided) phases.build(in, d.n * d.c * d.h, d.w);
  // each thread owns one (f, c) kernel slice
#pragma omp parallel for collapse(2) schedule(static)
  for (int f = 0; f < d.f; ++f) {
    for (int c = 0; c < d.c; ++c) {
      for (int kh = 0; kh < d.kh; ++kh) {
        for (int kw = 0; kw < d.kw; ++kw) {
          const int base = kw - d.pad;
          int ow0, ow1;
          ow_range(d.wo, d.stride, base, d.w, ow0, ow1);
          // independent partial sums break the fp dependency chain
          double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
          for (int n = 0; n < d.n; ++n) {
            for (int oh = 0; oh < d.ho; ++oh) {
              const int ih = oh * d.stride - d.pad + kh;
              if (ih < 0 || ih >= d.h) continue;
              const double* grow = g_out + idx4(n, f, oh, 0, d.f, d.ho, d.wo);
              const double* ip = nullptr;
              int off = 0;
              if (d.stride == 1) {
                ip = in + idx4(n, c, ih, 0, d.c, d.h, d.w);
                off = base;
              } else if (strided) {
                ip = phases.row((n * d.c + c) * d.h + ih, base, off);
              }
              int ow = ow0;
              if (ip) {
                for (; ow + 4 <= ow1; ow += 4) {
                  a0 += grow[ow] * ip[ow + off];
                  a1 += grow[ow + 1] * ip[ow + 1 + off];
                  a2 += grow[ow + 2] * ip[ow + 2 + off];
                  a3 += grow[ow + 3] * ip[ow + 3 + off];
                }
                for (; ow < ow1; ++ow) a0 += grow[ow] * ip[ow + off];
              } else {
                const double* irow = in + idx4(n, c, ih, 0, d.c, d.h, d.w);
                for (; ow + 4 <= ow1; ow += 4) {
                  a0 += grow[ow] * irow[ow * d.stride + base];
                  a1 += grow[ow + 1] * irow[(ow + 1) * d.stride + base];
                  a2 += grow[ow + 2] * irow[(ow + 2) * d.stride + base];
                  a3 += grow[ow + 3] * irow[(ow + 3) * d.stride + base];
                }
                for (; ow < ow1; ++ow) a0 += grow[ow] * irow[ow * d.stride + base];
              }
            }
          }
          g_weights[idx4(f, c, kh, kw, d.c, d.kh, d.kw)] +=
              (a0 + a1) + (a2 + a3);
        }
      }
    }
  }
}

void conv2d_backward_bias(const double* g_out, const Conv2dDims& d,
                          double* g_bias) {
#pragma omp parallel for schedule(static)
  for (int f = 0; f < d.f; ++f) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    for (int n = 0; n < d.n; ++n) {
      const double* g = g_out + idx4(n, f, 0, 0, d.f, d.ho, d.wo);
      const int hw = d.ho * d.wo;
      int i = 0;
      for (; i + 4 <= hw; i += 4) {
        a0 += g[i];
        a1 += g[i + 1];
        a2 += g[i + 2];
        a3 += g[i + 3];
      }
      for (; i < hw; ++i) a0 += g[i];
    }
    g_bias[f] += (a0 + a1) + (a2 + a3);
  }
}

}  // namespace

void conv2d_backward(const double* in, const double* weights, const double* g_out,
                     const Conv2dDims& d, double* g_in, double* g_weights,
                     double* g_bias) {
  if (g_in) conv2d_backward_input(weights, g_out, d, g_in);
  if (g_weights) conv2d_backward_weights(in, g_out, d, g_weights);
  if (g_bias) conv2d_backward_bias(g_out, d, g_bias);
}

void dense_forward(const double* in, const double* weights, const double* bias,
                   int n, int k, int m, double* out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* orow = out + i * m;
    for (int j = 0; j < m; ++j) orow[j] = bias[j];
    const double* irow = in + i * static_cast<std::ptrdiff_t>(k);
    for (int kk = 0; kk < k; ++kk) {
      const double iv = irow[kk];
      const double* wrow = weights + kk * static_cast<std::ptrdiff_t>(m);
      for (int j = 0; j < m; ++j) orow[j] += iv * wrow[j];
    }
  }
}

void dense_backward(const double* in, const double* weights, const double* g_out,
                    int n, int k, int m, double* g_in, double* g_weights,
                    double* g_bias) {
  if (g_in) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      const double* grow = g_out + i * static_cast<std::ptrdiff_t>(m);
      double* girow = g_in + i * static_cast<std::ptrdiff_t>(k);
      for (int kk = 0; kk < k; ++kk) {
        const double* wrow = weights + kk * static_cast<std::ptrdiff_t>(m);
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        int j = 0;
        for (; j + 4 <= m; j += 4) {
          a0 += grow[j] * wrow[j];
          a1 += grow[j + 1] * wrow[j + 1];
          a2 += grow[j + 2] * wrow[j + 2];
          a3 += grow[j + 3] * wrow[j + 3];
        }
        for (; j < m; ++j) a0 += grow[j] * wrow[j];
        girow[kk] += (a0 + a1) + (a2 + a3);
      }
    }
  }
  if (g_weights) {
#pragma omp parallel for schedule(static)
    for (int kk = 0; kk < k; ++kk) {
      double* gwrow = g_weights + kk * static_cast<std::ptrdiff_t>(m);
      for (int i = 0; i < n; ++i) {
        const double iv = in[i * static_cast<std::ptrdiff_t>(k) + kk];
        const double* grow = g_out + i * static_cast<std::ptrdiff_t>(m);
        for (int j = 0; j < m; ++j) gwrow[j] += iv * grow[j];
      }
    }
  }
  if (g_bias) {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += g_out[i * static_cast<std::ptrdiff_t>(m) + j];
      g_bias[j] += acc;
    }
  }
}

void upsample_nn_forward(const double* in, int n, int c, int h, int w, int factor,
                         double* out) {
  const int oh = h * factor, ow = w * factor;
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      for (int y = 0; y < oh; ++y) {
        const double* irow = in + idx4(i, j, y / factor, 0, c, h, w);
        double* orow = out + idx4(i, j, y, 0, c, oh, ow);
        for (int x = 0; x < ow; ++x) orow[x] = irow[x / factor];
      }
    }
  }
}

void upsample_nn_backward(const double* g_out, int n, int c, int h, int w,
                          int factor, double* g_in) {
  const int oh = h * factor, ow = w * factor;
#pragma omp parallel for collapse(2) schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      for (int y = 0; y < h; ++y) {
        double* girow = g_in + idx4(i, j, y, 0, c, h, w);
        for (int x = 0; x < w; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < factor; ++dy) {
            const double* grow =
                g_out + idx4(i, j, y * factor + dy, x * factor, c, oh, ow);
            for (int dx = 0; dx < factor; ++dx) acc += grow[dx];
          }
          girow[x] += acc;
        }
      }
    }
  }
}

void dilate(const std::uint8_t* in, int w, int h, int radius, bool euclidean,
            std::uint8_t* out) {
  const int r2 = radius * radius;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t hit = 0;
      const int y0 = y - radius < 0 ? 0 : y - radius;
      const int y1 = y + radius >= h ? h - 1 : y + radius;
      const int x0 = x - radius < 0 ? 0 : x - radius;
      const int x1 = x + radius >= w ? w - 1 : x + radius;
      for (int sy = y0; sy <= y1 && !hit; ++sy) {
        const int dy = sy - y;
        for (int sx = x0; sx <= x1; ++sx) {
          const int dx = sx - x;
          if (euclidean && dx * dx + dy * dy > r2) continue;
          if (in[sy * w + sx]) {
            hit = 1;
            break;
          }
        }
      }
      out[y * w + x] = hit;
    }
  }
}

}  // namespace advseg::kernels
