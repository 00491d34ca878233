#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace advseg {

using Shape = std::vector<int>;

int numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Value-semantics handle onto shared storage: copies alias the same values
// and gradient, which is what lets a tape accumulate gradients across every
// use of a tensor. Values are treated as immutable once an op has produced
// them; only the optimizer writes into parameter tensors between steps.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const;
  int numel() const;
  int dim(int i) const;

  std::vector<double>& values() const;
  double* data() const;
  double value() const;  // scalar tensors only

  // gradient slot; present only for tensors that participate in a tape
  bool has_grad() const;
  void ensure_grad() const;
  void zero_grad() const;
  std::vector<double>& grad() const;
  double* grad_data() const;

  // Constant tensors (input batches, labels) never receive an automatic
  // gradient slot; backward rules skip them. An explicit ensure_grad()
  // overrides the mark.
  void mark_constant() const;
  bool is_constant() const;

  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

 private:
  struct Data {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool grad_enabled = false;
    bool constant = false;
  };
  std::shared_ptr<Data> data_;
};

// Record of executed ops in forward order. backward() replays the recorded
// rules in exact reverse order, accumulating into gradient slots.
class Tape {
 public:
  void record(std::function<void()> backward_rule);
  void backward(const Tensor& loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

// ---- ops ----------------------------------------------------------------
// Every op runs pure when tape is null and records a backward rule otherwise.

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              int stride, int padding, Tape* tape = nullptr);

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias,
             Tape* tape = nullptr);

enum class Activation { elu, relu, sigmoid };

Tensor activation(Activation kind, const Tensor& input, double alpha = 1.0,
                  Tape* tape = nullptr);
Tensor elu(const Tensor& input, double alpha = 1.0, Tape* tape = nullptr);
Tensor relu(const Tensor& input, Tape* tape = nullptr);
Tensor sigmoid(const Tensor& input, Tape* tape = nullptr);

Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
// elementwise scale * t + offset
Tensor affine(const Tensor& t, double scale, double offset, Tape* tape = nullptr);
Tensor log(const Tensor& t, Tape* tape = nullptr);
Tensor clamp(const Tensor& t, double lo, double hi, Tape* tape = nullptr);
Tensor reduce_mean(const Tensor& t, Tape* tape = nullptr);

Tensor upsample_nn(const Tensor& input, int factor, Tape* tape = nullptr);
Tensor concat_channels(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor flatten(const Tensor& input, Tape* tape = nullptr);

// copy of the values with no gradient slot and no history
Tensor detach(const Tensor& t);

// Central finite-difference check of a scalar-valued tensor function against
// the tape gradients. Returns the max over checked parameter elements of
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|). When
// max_samples_per_param > 0, large parameters are subsampled with a seeded
// stream instead of sweeping every element.
double grad_check(const std::function<Tensor(Tape*)>& f,
                  std::span<const Tensor> params, double epsilon,
                  int max_samples_per_param = 0,
                  std::uint64_t sample_seed = 0);

}  // namespace advseg
