#include "advseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "advseg/kernels.hpp"
#include "advseg/rng.hpp"

namespace advseg {

int numel(const Shape& shape) {
  long long n = 1;
  for (int e : shape) n *= e;
  return static_cast<int>(n);
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) {
  for (int e : shape)
    if (e <= 0)
      throw std::invalid_argument("tensor: nonpositive extent in " +
                                  shape_str(shape));
  data_ = std::make_shared<Data>();
  data_->values.assign(static_cast<std::size_t>(advseg::numel(shape)), 0.0);
  data_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : Tensor(shape) {
  if (static_cast<int>(values.size()) != numel())
    throw std::invalid_argument(
        "tensor: " + std::to_string(values.size()) + " values for shape " +
        shape_str(data_->shape));
  data_->values = std::move(values);
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

const Shape& Tensor::shape() const { return data_->shape; }

int Tensor::numel() const { return static_cast<int>(data_->values.size()); }

int Tensor::dim(int i) const { return data_->shape.at(static_cast<std::size_t>(i)); }

std::vector<double>& Tensor::values() const { return data_->values; }

double* Tensor::data() const { return data_->values.data(); }

double Tensor::value() const {
  if (numel() != 1)
    throw std::invalid_argument("tensor: value() on non-scalar " +
                                shape_str(shape()));
  return data_->values[0];
}

bool Tensor::has_grad() const { return data_ && data_->grad_enabled; }

void Tensor::ensure_grad() const {
  if (!data_->grad_enabled) {
    data_->grad.assign(data_->values.size(), 0.0);
    data_->grad_enabled = true;
  }
}

void Tensor::zero_grad() const {
  if (data_->grad_enabled)
    std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
}

std::vector<double>& Tensor::grad() const {
  if (!has_grad())
    throw std::logic_error("tensor: gradient slot absent; tensor never joined a tape");
  return data_->grad;
}

double* Tensor::grad_data() const { return grad().data(); }

void Tensor::mark_constant() const { data_->constant = true; }

bool Tensor::is_constant() const { return data_ && data_->constant; }

void Tape::record(std::function<void()> backward_rule) {
  nodes_.push_back(std::move(backward_rule));
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got " +
                                shape_str(loss.shape()));
  loss.ensure_grad();
  loss.grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.shape().size() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " +
                                std::to_string(rank) + " tensor, got " +
                                shape_str(t.shape()));
}

void attach(Tape* tape, const Tensor& out, std::initializer_list<Tensor> inputs,
            std::function<void()> rule) {
  out.ensure_grad();
  for (const Tensor& t : inputs)
    if (!t.is_constant()) t.ensure_grad();
  tape->record(std::move(rule));
}

double* grad_or_null(const Tensor& t) {
  return t.has_grad() ? t.grad_data() : nullptr;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              int stride, int padding, Tape* tape) {
  require_rank(input, 4, "conv2d");
  require_rank(weights, 4, "conv2d");
  require_rank(bias, 1, "conv2d");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  if (input.dim(1) != weights.dim(1))
    throw std::invalid_argument(
        "conv2d: input channels " + shape_str(input.shape()) +
        " do not match kernel channels " + shape_str(weights.shape()));
  if (bias.dim(0) != weights.dim(0))
    throw std::invalid_argument("conv2d: bias " + shape_str(bias.shape()) +
                                " does not match filter count " +
                                shape_str(weights.shape()));
  kernels::Conv2dDims d;
  d.n = input.dim(0);
  d.c = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.f = weights.dim(0);
  d.kh = weights.dim(2);
  d.kw = weights.dim(3);
  d.stride = stride;
  d.pad = padding;
  if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding)
    throw std::invalid_argument("conv2d: kernel " + shape_str(weights.shape()) +
                                " larger than padded input " +
                                shape_str(input.shape()));
  d.ho = (d.h + 2 * padding - d.kh) / stride + 1;
  d.wo = (d.w + 2 * padding - d.kw) / stride + 1;

  Tensor out({d.n, d.f, d.ho, d.wo});
  kernels::conv2d_forward(input.data(), weights.data(), bias.data(), d,
                          out.data());
  if (tape)
    attach(tape, out, {input, weights, bias}, [input, weights, bias, out, d] {
      kernels::conv2d_backward(input.data(), weights.data(), out.grad_data(), d,
                               grad_or_null(input), grad_or_null(weights),
                               grad_or_null(bias));
    });
  return out;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias,
             Tape* tape) {
  require_rank(input, 2, "dense");
  require_rank(weights, 2, "dense");
  require_rank(bias, 1, "dense");
  if (input.dim(1) != weights.dim(0) || weights.dim(1) != bias.dim(0))
    throw std::invalid_argument("dense: dimension mismatch " +
                                shape_str(input.shape()) + " x " +
                                shape_str(weights.shape()) + " + " +
                                shape_str(bias.shape()));
  const int n = input.dim(0), k = input.dim(1), m = weights.dim(1);
  Tensor out({n, m});
  kernels::dense_forward(input.data(), weights.data(), bias.data(), n, k, m,
                         out.data());
  if (tape)
    attach(tape, out, {input, weights, bias}, [input, weights, bias, out, n, k, m] {
      kernels::dense_backward(input.data(), weights.data(), out.grad_data(), n,
                              k, m, grad_or_null(input), grad_or_null(weights),
                              grad_or_null(bias));
    });
  return out;
}

Tensor elu(const Tensor& input, double alpha, Tape* tape) {
  Tensor out(input.shape());
  const int n = input.numel();
  const double* x = input.data();
  double* y = out.data();
#pragma omp parallel for schedule(static) if (n > 8192)
  for (int i = 0; i < n; ++i)
    y[i] = x[i] > 0.0 ? x[i] : alpha * (std::exp(x[i]) - 1.0);
  if (tape)
    attach(tape, out, {input}, [input, out, alpha, n] {
      double* gi = grad_or_null(input);
      if (!gi) return;
      const double* x = input.data();
      const double* y = out.data();
      const double* g = out.grad_data();
      for (int i = 0; i < n; ++i)
        gi[i] += x[i] > 0.0 ? g[i] : g[i] * (y[i] + alpha);
    });
  return out;
}

Tensor relu(const Tensor& input, Tape* tape) {
  Tensor out(input.shape());
  const int n = input.numel();
  const double* x = input.data();
  double* y = out.data();
#pragma omp parallel for schedule(static) if (n > 8192)
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (tape)
    attach(tape, out, {input}, [input, out, n] {
      double* gi = grad_or_null(input);
      if (!gi) return;
      const double* x = input.data();
      const double* g = out.grad_data();
      for (int i = 0; i < n; ++i)
        if (x[i] > 0.0) gi[i] += g[i];
    });
  return out;
}

Tensor sigmoid(const Tensor& input, Tape* tape) {
  Tensor out(input.shape());
  const int n = input.numel();
  const double* x = input.data();
  double* y = out.data();
#pragma omp parallel for schedule(static) if (n > 8192)
  for (int i = 0; i < n; ++i) {
    // evaluated on the negative branch to avoid exp overflow
    if (x[i] >= 0.0) {
      y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    } else {
      const double e = std::exp(x[i]);
      y[i] = e / (1.0 + e);
    }
  }
  if (tape)
    attach(tape, out, {input}, [input, out, n] {
      double* gi = grad_or_null(input);
      if (!gi) return;
      const double* y = out.data();
      const double* g = out.grad_data();
      for (int i = 0; i < n; ++i) gi[i] += g[i] * y[i] * (1.0 - y[i]);
    });
  return out;
}

Tensor activation(Activation kind, const Tensor& input, double alpha, Tape* tape) {
  switch (kind) {
    case Activation::elu:
      return elu(input, alpha, tape);
    case Activation::relu:
      return relu(input, tape);
    case Activation::sigmoid:
      return sigmoid(input, tape);
  }
  throw std::invalid_argument("activation: unknown kind");
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  const int n = a.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (tape)
    attach(tape, out, {a, b}, [a, b, out, n] {
      const double* g = out.grad_data();
      double* ga = grad_or_null(a);
      double* gb = grad_or_null(b);
      for (int i = 0; i < n; ++i) {
        if (ga) ga[i] += g[i];
        if (gb) gb[i] += g[i];
      }
    });
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  const int n = a.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (tape)
    attach(tape, out, {a, b}, [a, b, out, n] {
      const double* g = out.grad_data();
      double* ga = grad_or_null(a);
      double* gb = grad_or_null(b);
      for (int i = 0; i < n; ++i) {
        if (ga) ga[i] += g[i];
        if (gb) gb[i] -= g[i];
      }
    });
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  const int n = a.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (tape)
    attach(tape, out, {a, b}, [a, b, out, n] {
      const double* g = out.grad_data();
      double* ga = grad_or_null(a);
      double* gb = grad_or_null(b);
      for (int i = 0; i < n; ++i) {
        if (ga) ga[i] += g[i] * b.data()[i];
        if (gb) gb[i] += g[i] * a.data()[i];
      }
    });
  return out;
}

Tensor affine(const Tensor& t, double scale, double offset, Tape* tape) {
  Tensor out(t.shape());
  const int n = t.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = scale * t.data()[i] + offset;
  if (tape)
    attach(tape, out, {t}, [t, out, scale, n] {
      double* gi = grad_or_null(t);
      if (!gi) return;
      const double* g = out.grad_data();
      for (int i = 0; i < n; ++i) gi[i] += scale * g[i];
    });
  return out;
}

Tensor log(const Tensor& t, Tape* tape) {
  Tensor out(t.shape());
  const int n = t.numel();
  for (int i = 0; i < n; ++i) {
    if (t.data()[i] <= 0.0)
      throw std::domain_error("log: non-positive input " +
                              std::to_string(t.data()[i]) + " at index " +
                              std::to_string(i));
    out.data()[i] = std::log(t.data()[i]);
  }
  if (tape)
    attach(tape, out, {t}, [t, out, n] {
      double* gi = grad_or_null(t);
      if (!gi) return;
      const double* g = out.grad_data();
      for (int i = 0; i < n; ++i) gi[i] += g[i] / t.data()[i];
    });
  return out;
}

Tensor clamp(const Tensor& t, double lo, double hi, Tape* tape) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  Tensor out(t.shape());
  const int n = t.numel();
  for (int i = 0; i < n; ++i) out.data()[i] = std::clamp(t.data()[i], lo, hi);
  if (tape)
    attach(tape, out, {t}, [t, out, lo, hi, n] {
      double* gi = grad_or_null(t);
      if (!gi) return;
      const double* g = out.grad_data();
      for (int i = 0; i < n; ++i)
        if (t.data()[i] > lo && t.data()[i] < hi) gi[i] += g[i];
    });
  return out;
}

Tensor reduce_mean(const Tensor& t, Tape* tape) {
  const int n = t.numel();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += t.data()[i];
  Tensor out = Tensor::scalar(acc / n);
  if (tape)
    attach(tape, out, {t}, [t, out, n] {
      double* gi = grad_or_null(t);
      if (!gi) return;
      const double g = out.grad()[0] / n;
      for (int i = 0; i < n; ++i) gi[i] += g;
    });
  return out;
}

Tensor upsample_nn(const Tensor& input, int factor, Tape* tape) {
  require_rank(input, 4, "upsample_nn");
  if (factor < 1) throw std::invalid_argument("upsample_nn: factor must be >= 1");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor out({n, c, h * factor, w * factor});
  kernels::upsample_nn_forward(input.data(), n, c, h, w, factor, out.data());
  if (tape)
    attach(tape, out, {input}, [input, out, n, c, h, w, factor] {
      if (!input.has_grad()) return;
      kernels::upsample_nn_backward(out.grad_data(), n, c, h, w, factor,
                                    input.grad_data());
    });
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b, Tape* tape) {
  require_rank(a, 4, "concat_channels");
  require_rank(b, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw std::invalid_argument("concat_channels: incompatible shapes " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const int hw = a.dim(2) * a.dim(3);
  Tensor out({n, ca + cb, a.dim(2), a.dim(3)});
  for (int i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * ca * hw, ca * hw,
                out.data() + i * (ca + cb) * hw);
    std::copy_n(b.data() + i * cb * hw, cb * hw,
                out.data() + (i * (ca + cb) + ca) * hw);
  }
  if (tape)
    attach(tape, out, {a, b}, [a, b, out, n, ca, cb, hw] {
      const double* g = out.grad_data();
      double* ga_base = grad_or_null(a);
      double* gb_base = grad_or_null(b);
      for (int i = 0; i < n; ++i) {
        const double* gout = g + i * (ca + cb) * hw;
        if (ga_base) {
          double* ga = ga_base + i * ca * hw;
          for (int j = 0; j < ca * hw; ++j) ga[j] += gout[j];
        }
        if (gb_base) {
          double* gb = gb_base + i * cb * hw;
          for (int j = 0; j < cb * hw; ++j) gb[j] += gout[ca * hw + j];
        }
      }
    });
  return out;
}

Tensor flatten(const Tensor& input, Tape* tape) {
  require_rank(input, 4, "flatten");
  const int n = input.dim(0);
  const int k = input.numel() / n;
  Tensor out({n, k}, input.values());
  if (tape)
    attach(tape, out, {input}, [input, out] {
      double* gi = grad_or_null(input);
      if (!gi) return;
      const double* g = out.grad_data();
      const int total = input.numel();
      for (int i = 0; i < total; ++i) gi[i] += g[i];
    });
  return out;
}

Tensor detach(const Tensor& t) {
  Tensor out(t.shape(), t.values());
  out.mark_constant();
  return out;
}

double grad_check(const std::function<Tensor(Tape*)>& f,
                  std::span<const Tensor> params, double epsilon,
                  int max_samples_per_param, std::uint64_t sample_seed) {
  for (const Tensor& p : params) {
    p.ensure_grad();
    p.zero_grad();
  }
  Tape tape;
  Tensor loss = f(&tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) analytic.push_back(p.grad());

  Rng picker(mix_seed(sample_seed));
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const Tensor& p = params[pi];
    std::vector<int> indices;
    if (max_samples_per_param > 0 && p.numel() > max_samples_per_param) {
      for (int j = 0; j < max_samples_per_param; ++j)
        indices.push_back(picker.uniform_int(0, p.numel() - 1));
    } else {
      indices.resize(p.numel());
      for (int j = 0; j < p.numel(); ++j) indices[j] = j;
    }
    for (int idx : indices) {
      const double saved = p.values()[idx];
      p.values()[idx] = saved + epsilon;
      const double up = f(nullptr).value();
      p.values()[idx] = saved - epsilon;
      const double down = f(nullptr).value();
      p.values()[idx] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[pi][idx];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace advseg
