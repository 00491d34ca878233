#include "advseg/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace advseg {

namespace {

Tensor clamped_log(const Tensor& p, Tape* tape) {
  return log(clamp(p, kProbEps, 1.0 - kProbEps, tape), tape);
}

void require_prob_column(const Tensor& p, const char* op) {
  if (p.shape().size() != 2 || p.dim(1) != 1)
    throw std::invalid_argument(std::string(op) +
                                ": expected probabilities [N x 1], got " +
                                shape_str(p.shape()));
}

}  // namespace

LossValue bce_loss(const Tensor& y_hat, const Tensor& y, Tape* tape) {
  if (y_hat.shape() != y.shape())
    throw std::invalid_argument("bce_loss: prediction " +
                                shape_str(y_hat.shape()) +
                                " vs label " + shape_str(y.shape()));
  Tensor p = clamp(y_hat, kProbEps, 1.0 - kProbEps, tape);
  Tensor term = add(mul(y, log(p, tape), tape),
                    mul(affine(y, -1.0, 1.0, tape),
                        log(affine(p, -1.0, 1.0, tape), tape), tape),
                    tape);
  return {affine(reduce_mean(term, tape), -1.0, 0.0, tape), LossKind::ce};
}

LossValue adv_loss_d(const Tensor& p_real, const Tensor& p_fake, Tape* tape) {
  require_prob_column(p_real, "adv_loss_d");
  require_prob_column(p_fake, "adv_loss_d");
  Tensor real_term = reduce_mean(clamped_log(p_real, tape), tape);
  Tensor fake_term =
      reduce_mean(clamped_log(affine(p_fake, -1.0, 1.0, tape), tape), tape);
  return {affine(add(real_term, fake_term, tape), -1.0, 0.0, tape),
          LossKind::adv_d};
}

LossValue adv_loss_g(const Tensor& p_fake, AdvMode mode, Tape* tape) {
  require_prob_column(p_fake, "adv_loss_g");
  if (mode == AdvMode::saturating)
    return {reduce_mean(clamped_log(affine(p_fake, -1.0, 1.0, tape), tape), tape),
            LossKind::adv_g};
  return {affine(reduce_mean(clamped_log(p_fake, tape), tape), -1.0, 0.0, tape),
          LossKind::adv_g};
}

LossValue combined_g_loss(const LossValue& ce, const LossValue& adv,
                          double adv_weight, Tape* tape) {
  return {add(ce.node, affine(adv.node, adv_weight, 0.0, tape), tape),
          LossKind::combined};
}

AdamState AdamState::init(const std::vector<Tensor>& params, double lr,
                          double beta1, double beta2) {
  AdamState state;
  state.lr = lr;
  state.beta1 = beta1;
  state.beta2 = beta2;
  for (const Tensor& p : params) {
    state.m.emplace_back(p.numel(), 0.0);
    state.v.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(AdamState& state, const std::vector<Tensor>& params) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::invalid_argument("adam_step: state tracks " +
                                std::to_string(state.m.size()) +
                                " parameters, got " +
                                std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.m[i].size() != params[i].values().size())
      throw std::invalid_argument(
          "adam_step: moment shape mismatch at parameter " + std::to_string(i) +
          " (" + std::to_string(state.m[i].size()) + " vs " +
          shape_str(params[i].shape()) + ")");

  ++state.t;
  const double bc1 = 1.0 - std::pow(state.beta1, state.t);
  const double bc2 = 1.0 - std::pow(state.beta2, state.t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double>& g = params[i].grad();
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    double* theta = params[i].data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      theta[j] -= state.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + state.eps);
    }
  }
}

void zero_grads(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    p.ensure_grad();
    p.zero_grad();
  }
}

}  // namespace advseg
