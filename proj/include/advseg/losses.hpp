#pragma once

#include <vector>

#include "advseg/tensor.hpp"

namespace advseg {

// Probability clamp applied before every log in the losses.
inline constexpr double kProbEps = 1e-7;

enum class LossKind { ce, adv_g, adv_d, combined };

// Scalar loss with provenance. The discriminator objective is stored negated
// so that both networks are trained by minimization; adv_d therefore equals
// -[mean log p_real + mean log(1 - p_fake)].
struct LossValue {
  Tensor node;  // scalar, lives on the tape when one was passed
  LossKind kind = LossKind::ce;
  double value() const { return node.value(); }
};

// mean over all pixels of -[y log p + (1-y) log(1-p)], probabilities clamped
LossValue bce_loss(const Tensor& y_hat, const Tensor& y, Tape* tape = nullptr);

LossValue adv_loss_d(const Tensor& p_real, const Tensor& p_fake,
                     Tape* tape = nullptr);

enum class AdvMode { saturating, nonsaturating };

// saturating: mean log(1 - p_fake), the generator side of the min-max game as
// written; nonsaturating: -mean log p_fake. Same minimizing direction.
LossValue adv_loss_g(const Tensor& p_fake, AdvMode mode, Tape* tape = nullptr);

LossValue combined_g_loss(const LossValue& ce, const LossValue& adv,
                          double adv_weight = 1.0, Tape* tape = nullptr);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  long t = 0;
  std::vector<std::vector<double>> m, v;  // shapes mirror the parameters

  static AdamState init(const std::vector<Tensor>& params, double lr,
                        double beta1, double beta2);
};

// t += 1; m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
// theta <- theta - lr * mhat / (sqrt(vhat) + eps) with bias-corrected moments
void adam_step(AdamState& state, const std::vector<Tensor>& params);

void zero_grads(const std::vector<Tensor>& params);

}  // namespace advseg
