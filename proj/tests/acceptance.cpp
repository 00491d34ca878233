// Acceptance suite: runs every gate the project promises, one pass/fail line
// each. The two training gates dominate the runtime; everything else finishes
// in seconds.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "advseg/checkpoint.hpp"
#include "advseg/reference.hpp"
#include "advseg/rng.hpp"
#include "advseg/trainer.hpp"

using namespace advseg;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

constexpr double kGradTol = 1e-4;
constexpr double kGradEps = 1e-5;

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Tensor random_labels(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  return t;
}

Mask random_mask(int w, int h, double density, Rng& rng) {
  Mask m;
  m.width = w;
  m.height = h;
  m.labels.resize(static_cast<std::size_t>(w) * h);
  for (auto& v : m.labels) v = rng.uniform() < density ? 1 : 0;
  return m;
}

Tensor project(const Tensor& out, const Tensor& weights, Tape* tape) {
  return reduce_mean(mul(out, weights, tape), tape);
}

// desk-scale regime: 8 synthetic 64x64 scenes, depth-3 generator, 200 epochs
TrainConfig desk_config(bool adversarial) {
  TrainConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 200;
  cfg.batch_size = 3;
  cfg.patch = 64;
  cfg.adversarial = adversarial;
  cfg.adv_mode = AdvMode::saturating;
  cfg.adv_weight = 1.0;
  cfg.depth = 3;
  cfg.base_width = 16;
  cfg.g_lr = 1e-3;
  cfg.d_lr = 1e-5;
  cfg.d_beta1 = 0.5;
  cfg.d_beta2 = 0.9;
  cfg.d_to_g_ratio = 1;
  cfg.data_source = DataSource::synth;
  cfg.synth = SynthConfig{64, 8, 1, 5, 6, 24, 20, 70, 190, 21};
  return cfg;
}

SynthConfig held_out_config() {
  return SynthConfig{64, 32, 1, 5, 6, 24, 20, 70, 190, 22};
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.seed = 13;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.patch = 32;
  cfg.adversarial = true;
  cfg.depth = 2;
  cfg.base_width = 8;
  cfg.g_lr = 1e-3;
  cfg.d_lr = 1e-4;
  cfg.data_source = DataSource::synth;
  cfg.synth = SynthConfig{32, 4, 1, 4, 4, 12, 20, 70, 190, 31};
  return cfg;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- criterion 1: gradient integrity --------------------------------------

double check_all_ops(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  auto track = [&worst](double err) { worst = std::max(worst, err); };

  {
    Tensor in = random_tensor({2, 3, 6, 6}, rng);
    Tensor k = random_tensor({4, 3, 3, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    for (int stride : {1, 2}) {
      const int o = (6 + 2 - 3) / stride + 1;
      Tensor proj = random_tensor({2, 4, o, o}, rng);
      auto f = [&](Tape* tape) {
        return project(conv2d(in, k, b, stride, 1, tape), proj, tape);
      };
      const Tensor params[] = {in, k, b};
      track(grad_check(f, params, kGradEps));
    }
  }
  {
    Tensor in = random_tensor({3, 5}, rng);
    Tensor w = random_tensor({5, 4}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor proj = random_tensor({3, 4}, rng);
    auto f = [&](Tape* tape) { return project(dense(in, w, b, tape), proj, tape); };
    const Tensor params[] = {in, w, b};
    track(grad_check(f, params, kGradEps));
  }
  {
    Tensor in = random_tensor({2, 9}, rng);
    for (double& v : in.values()) v += v >= 0.0 ? 0.2 : -0.2;
    Tensor proj = random_tensor({2, 9}, rng);
    for (auto kind : {Activation::elu, Activation::relu, Activation::sigmoid}) {
      auto f = [&](Tape* tape) {
        return project(activation(kind, in, 1.1, tape), proj, tape);
      };
      const Tensor params[] = {in};
      track(grad_check(f, params, kGradEps));
    }
  }
  {
    Tensor a = random_tensor({7}, rng);
    Tensor b = random_tensor({7}, rng);
    Tensor proj = random_tensor({7}, rng);
    auto f = [&](Tape* tape) {
      Tensor s = add(mul(a, b, tape), sub(a, b, tape), tape);
      return project(affine(s, 0.7, -0.1, tape), proj, tape);
    };
    const Tensor params[] = {a, b};
    track(grad_check(f, params, kGradEps));

    Tensor pos = random_tensor({6}, rng, 0.2, 2.0);
    auto fl = [&](Tape* tape) {
      return reduce_mean(log(clamp(pos, 0.05, 3.0, tape), tape), tape);
    };
    const Tensor lparams[] = {pos};
    track(grad_check(fl, lparams, kGradEps));
  }
  {
    Tensor in = random_tensor({1, 2, 3, 3}, rng);
    Tensor other = random_tensor({1, 1, 6, 6}, rng);
    Tensor proj = random_tensor({1, 72 + 36}, rng);
    auto f = [&](Tape* tape) {
      Tensor cat = concat_channels(upsample_nn(in, 2, tape), other, tape);
      return project(flatten(cat, tape), proj, tape);
    };
    const Tensor params[] = {in, other};
    track(grad_check(f, params, kGradEps));
  }

  // both full networks
  {
    GeneratorConfig gc;
    gc.depth = 2;
    gc.base_width = 4;
    Generator g = build_generator(8, 8, gc, seed);
    Tensor x = random_tensor({2, 3, 8, 8}, rng, 0.0, 1.0);
    Tensor y = random_labels({2, 1, 8, 8}, rng);
    auto f = [&](Tape* tape) {
      return bce_loss(generator_forward(g, x, tape), y, tape).node;
    };
    track(grad_check(f, g.parameters(), kGradEps));
  }
  {
    Discriminator d = build_discriminator(16, 16, 1, seed + 1);
    Tensor m = random_tensor({2, 1, 16, 16}, rng, 0.0, 1.0);
    auto f = [&](Tape* tape) {
      return adv_loss_g(discriminator_forward(d, m, tape),
                        AdvMode::nonsaturating, tape)
          .node;
    };
    track(grad_check(f, d.parameters(), kGradEps, 20, seed));
    const Tensor input_only[] = {m};
    track(grad_check(f, input_only, kGradEps));
  }

  // all three losses
  {
    Tensor raw = random_tensor({2, 1, 3, 3}, rng, -2.0, 2.0);
    Tensor y = random_labels({2, 1, 3, 3}, rng);
    auto f_bce = [&](Tape* tape) {
      return bce_loss(sigmoid(raw, tape), y, tape).node;
    };
    const Tensor p1[] = {raw};
    track(grad_check(f_bce, p1, kGradEps));

    Tensor raw_r = random_tensor({4, 1}, rng, -2.0, 2.0);
    Tensor raw_f = random_tensor({4, 1}, rng, -2.0, 2.0);
    auto f_d = [&](Tape* tape) {
      return adv_loss_d(sigmoid(raw_r, tape), sigmoid(raw_f, tape), tape).node;
    };
    const Tensor p2[] = {raw_r, raw_f};
    track(grad_check(f_d, p2, kGradEps));

    for (auto mode : {AdvMode::saturating, AdvMode::nonsaturating}) {
      auto f_g = [&](Tape* tape) {
        return adv_loss_g(sigmoid(raw_f, tape), mode, tape).node;
      };
      const Tensor p3[] = {raw_f};
      track(grad_check(f_g, p3, kGradEps));
    }
  }
  return worst;
}

Outcome criterion_gradients() {
  double worst = 0.0;
  for (std::uint64_t seed : {101u, 202u, 303u})
    worst = std::max(worst, check_all_ops(seed));
  std::ostringstream os;
  os << "max relative error " << worst << " across 3 seeds (tol " << kGradTol
     << ")";
  return {worst < kGradTol, os.str()};
}

// ---- criterion 2: relaxed metrics vs brute force ---------------------------

Outcome criterion_metric_oracle() {
  Rng rng(20240501);
  long checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Mask pred = random_mask(16, 16, rng.uniform(0.0, 0.35), rng);
    Mask gt = random_mask(16, 16, rng.uniform(0.0, 0.35), rng);
    for (int rho : {0, 1, 3}) {
      const RelaxedCounts mine =
          relaxed_counts(pred, gt, {rho, Distance::euclidean});
      const ref::RelaxedHits oracle = ref::relaxed_hits(
          pred.labels.data(), gt.labels.data(), 16, 16, rho, true);
      if (mine.pred_matched != oracle.pred_matched ||
          mine.pred_total != oracle.pred_total ||
          mine.gt_matched != oracle.gt_matched ||
          mine.gt_total != oracle.gt_total) {
        std::ostringstream os;
        os << "mismatch at trial " << trial << " rho " << rho;
        return {false, os.str()};
      }
      ++checked;
    }
  }
  return {true, std::to_string(checked) + " pair/rho combinations, exact"};
}

// ---- criterion 3: reductions and bounds ------------------------------------

Outcome criterion_metric_bounds() {
  Rng rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    Mask pred = random_mask(12, 12, rng.uniform(0.05, 0.5), rng);
    Mask gt = random_mask(12, 12, rng.uniform(0.05, 0.5), rng);
    MetricReport zero = evaluate_pair(pred, gt, {0, Distance::euclidean});
    if (zero.relaxed_precision != zero.precision ||
        zero.relaxed_recall != zero.recall || zero.relaxed_f1 != zero.f1 ||
        zero.relaxed_iou != zero.iou)
      return {false, "rho=0 did not reduce to the strict metrics"};
    double last_p = -1.0, last_r = -1.0;
    for (int rho = 0; rho <= 4; ++rho) {
      auto [p, r] = relaxed_pr(pred, gt, {rho, Distance::euclidean});
      if (p < zero.precision || r < zero.recall)
        return {false, "relaxed value fell below its strict counterpart"};
      if (p < last_p || r < last_r)
        return {false, "relaxed value decreased with growing rho"};
      last_p = p;
      last_r = r;
    }
  }
  return {true, "rho=0 reduction exact; dominance and monotonicity on 100 pairs"};
}

// ---- criterion 4: tiling and augmentation ----------------------------------

Outcome criterion_tiling() {
  RasterImage big;
  big.width = big.height = 1500;
  big.channels = 3;
  big.samples.resize(static_cast<std::size_t>(1500) * 1500 * 3);
  for (std::size_t i = 0; i < big.samples.size(); ++i)
    big.samples[i] = static_cast<std::uint8_t>((i * 31) % 251);
  Mask mask;
  mask.width = mask.height = 1500;
  mask.labels.assign(static_cast<std::size_t>(1500) * 1500, 0);
  const auto tiles = tile(big, mask, 300);
  if (tiles.size() != 25)
    return {false, "expected 25 tiles, got " + std::to_string(tiles.size())};

  Rng rng(4242);
  for (int trial = 0; trial < 20; ++trial) {
    RasterImage patch;
    patch.width = patch.height = 8;
    patch.channels = 3;
    patch.samples.resize(8 * 8 * 3);
    for (auto& v : patch.samples)
      v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    Mask pm = random_mask(8, 8, 0.4, rng);
    const auto variants = augment(patch, pm);

    Sample r90 = variants[3];
    for (int i = 0; i < 3; ++i) r90 = augment(r90.image, r90.mask)[3];
    if (r90.image.samples != patch.samples || r90.mask.labels != pm.labels)
      return {false, "rot90 applied four times is not the identity"};
    if (augment(variants[1].image, variants[1].mask)[1].image.samples !=
            patch.samples ||
        augment(variants[2].image, variants[2].mask)[2].image.samples !=
            patch.samples)
      return {false, "flips are not involutions"};
    const Sample composed = augment(variants[2].image, variants[2].mask)[1];
    if (composed.image.samples != variants[4].image.samples ||
        composed.mask.labels != variants[4].mask.labels)
      return {false, "rot180 != flipLR o flipTD"};
  }
  return {true, "25 tiles from the 1500x1500 fixture; dihedral identities hold"};
}

// ---- criterion 5: optimizer oracle -----------------------------------------

Outcome criterion_adam() {
  for (auto [b1, b2] : {std::pair{0.9, 0.99}, std::pair{0.5, 0.9}}) {
    Tensor theta({1}, {3.0});
    AdamState state = AdamState::init({theta}, 0.05, b1, b2);
    ref::ScalarAdam oracle{0.0, 0.0, 0, 0.05, b1, b2, 1e-8};
    double theta_ref = 3.0;
    for (int step = 0; step < 10; ++step) {
      Tape tape;
      Tensor loss = mul(theta, theta, &tape);
      theta.ensure_grad();
      theta.zero_grad();
      tape.backward(loss);
      adam_step(state, {theta});
      theta_ref = oracle.step(theta_ref, 2.0 * theta_ref);
      if (std::abs(theta.values()[0] - theta_ref) > 1e-12) {
        std::ostringstream os;
        os << "divergence from scalar reference at step " << step + 1
           << " for betas (" << b1 << ", " << b2 << ")";
        return {false, os.str()};
      }
    }
  }
  return {true, "10-step trajectories match the scalar reference to 1e-12 for "
                "both beta configurations"};
}

// ---- criteria 6 & 7: desk-scale training gates ------------------------------

struct TrainedPair {
  TrainResult ce;
  MetricReport ce_train;
  MetricReport ce_held;
};

Outcome criterion_memorization(TrainedPair& out) {
  const TrainConfig cfg = desk_config(false);
  Dataset data = synth_dataset(cfg.synth);
  out.ce = train(cfg, data);
  out.ce_train = evaluate(out.ce.checkpoint, data, {3, Distance::euclidean});
  out.ce_held = evaluate(out.ce.checkpoint, synth_dataset(held_out_config()),
                         {3, Distance::euclidean});
  std::ostringstream os;
  os << "strict IoU " << out.ce_train.iou
     << " on the training samples (threshold 0.95)";
  return {out.ce_train.iou >= 0.95, os.str()};
}

Outcome criterion_adversarial(const TrainedPair& baseline) {
  const TrainConfig cfg = desk_config(true);
  Dataset data = synth_dataset(cfg.synth);
  TrainResult result;
  try {
    result = train(cfg, data);
  } catch (const std::exception& e) {
    return {false, std::string("training aborted: ") + e.what()};
  }
  for (const EpochLog& log : result.logs) {
    if (!log.mean_d_real || !log.mean_d_fake)
      return {false, "missing discriminator statistics"};
    if (*log.mean_d_real <= 0.01 || *log.mean_d_real >= 0.99 ||
        *log.mean_d_fake <= 0.01 || *log.mean_d_fake >= 0.99) {
      std::ostringstream os;
      os << "epoch " << log.epoch << ": mean D(real) " << *log.mean_d_real
         << ", mean D(fake) " << *log.mean_d_fake << " left (0.01, 0.99)";
      return {false, os.str()};
    }
  }
  MetricReport held = evaluate(result.checkpoint,
                               synth_dataset(held_out_config()),
                               {3, Distance::euclidean});
  std::ostringstream os;
  os << "held-out relaxed F1 " << held.relaxed_f1 << " (threshold 0.85); "
     << "signed delta vs cross-entropy-only: "
     << (held.relaxed_f1 - baseline.ce_held.relaxed_f1) << " relaxed F1, "
     << (held.relaxed_iou - baseline.ce_held.relaxed_iou)
     << " relaxed IoU (informational)";
  return {held.relaxed_f1 >= 0.85, os.str()};
}

// ---- criterion 8: determinism and round-trip --------------------------------

Outcome criterion_determinism(Checkpoint& saved_for_later) {
  const TrainConfig cfg = small_config();
  Dataset data = synth_dataset(cfg.synth);
  TrainResult a = train(cfg, data);
  TrainResult b = train(cfg, data);

  const NamedParams pa = a.checkpoint.generator.named_parameters();
  const NamedParams pb = b.checkpoint.generator.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (pa[i].second.values() != pb[i].second.values())
      return {false, "generator parameters differ between identical runs"};
  const NamedParams da = a.checkpoint.discriminator->named_parameters();
  const NamedParams db = b.checkpoint.discriminator->named_parameters();
  for (std::size_t i = 0; i < da.size(); ++i)
    if (da[i].second.values() != db[i].second.values())
      return {false, "discriminator parameters differ between identical runs"};
  if (a.checkpoint.g_optim.m != b.checkpoint.g_optim.m ||
      a.checkpoint.g_optim.v != b.checkpoint.g_optim.v)
    return {false, "optimizer state differs between identical runs"};

  const fs::path dir = fs::temp_directory_path() /
                       ("advseg_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  MetricReport before = evaluate(a.checkpoint, data, {3, Distance::euclidean});
  save_checkpoint(dir, a.checkpoint);
  Checkpoint loaded = load_checkpoint(dir);
  MetricReport after = evaluate(loaded, data, {3, Distance::euclidean});
  fs::remove_all(dir);
  const bool same =
      before.accuracy == after.accuracy && before.precision == after.precision &&
      before.recall == after.recall && before.f1 == after.f1 &&
      before.iou == after.iou &&
      before.relaxed_precision == after.relaxed_precision &&
      before.relaxed_recall == after.relaxed_recall &&
      before.relaxed_f1 == after.relaxed_f1 &&
      before.relaxed_iou == after.relaxed_iou &&
      before.counts.tp == after.counts.tp &&
      before.counts.tn == after.counts.tn &&
      before.counts.fp == after.counts.fp && before.counts.fn == after.counts.fn;
  if (!same) return {false, "reloaded checkpoint produced a different report"};
  saved_for_later = a.checkpoint;
  return {true, "bit-identical checkpoints; save/load/evaluate reproduces the "
                "report exactly"};
}

// ---- criterion 9: equal-weighting linearity ---------------------------------

Outcome criterion_linearity() {
  const TrainConfig cfg = small_config();
  Generator g = generator_from_config(cfg);
  Discriminator d = *discriminator_from_config(cfg);
  Rng rng(55);
  Tensor x = random_tensor({3, 3, 32, 32}, rng, 0.0, 1.0);
  x.mark_constant();
  Tensor y = random_labels({3, 1, 32, 32}, rng);
  y.mark_constant();
  const std::vector<Tensor> params = g.parameters();

  auto grads_for = [&](int which) {
    zero_grads(params);
    Tape tape;
    Tensor y_hat = generator_forward(g, x, &tape);
    LossValue ce = bce_loss(y_hat, y, &tape);
    LossValue adv = adv_loss_g(discriminator_forward(d, y_hat, &tape),
                               AdvMode::saturating, &tape);
    LossValue target = which == 0   ? ce
                       : which == 1 ? adv
                                    : combined_g_loss(ce, adv, 1.0, &tape);
    tape.backward(target.node);
    std::vector<std::vector<double>> out;
    for (const Tensor& p : params) out.push_back(p.grad());
    return out;
  };
  const auto g_ce = grads_for(0), g_adv = grads_for(1), g_comb = grads_for(2);
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < g_ce[p].size(); ++i)
      worst = std::max(worst,
                       std::abs(g_comb[p][i] - (g_ce[p][i] + g_adv[p][i])));
  std::ostringstream os;
  os << "max |combined - (ce + adv)| = " << worst << " (tol 1e-10)";
  return {worst <= 1e-10, os.str()};
}

// ---- criterion 10: diff render vs confusion counts --------------------------

Outcome criterion_diff_render(const Checkpoint& ckpt) {
  SynthConfig sc = small_config().synth;
  sc.seed = 91;
  sc.count = 1;
  Dataset data = synth_dataset(sc);
  const Sample& sample = data.samples[0];
  Prediction pred = predict(ckpt, sample.image, &sample.mask);
  if (!pred.diff) return {false, "no diff image produced"};
  ConfusionCounts counts = confusion(pred.mask, sample.mask);
  std::uint64_t white = 0, black = 0, blue = 0, red = 0, other = 0;
  for (std::size_t i = 0; i < pred.diff->samples.size(); i += 3) {
    const int r = pred.diff->samples[i], g = pred.diff->samples[i + 1],
              b = pred.diff->samples[i + 2];
    if (r == 255 && g == 255 && b == 255)
      ++white;
    else if (r == 0 && g == 0 && b == 0)
      ++black;
    else if (r == 0 && g == 0 && b == 255)
      ++blue;
    else if (r == 255 && g == 0 && b == 0)
      ++red;
    else
      ++other;
  }
  if (other != 0) return {false, "diff image contains off-palette pixels"};
  if (white != counts.tp || black != counts.tn || blue != counts.fp ||
      red != counts.fn)
    return {false, "color histogram does not equal the confusion counts"};
  std::ostringstream os;
  os << "histogram (" << white << ", " << black << ", " << blue << ", " << red
     << ") equals (tp, tn, fp, fn) exactly";
  return {true, os.str()};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&failures](int id, const char* name, const Outcome& o,
                            double seconds) {
    std::printf("[%s] criterion %2d: %s (%.1fs) - %s\n",
                o.pass ? "PASS" : "FAIL", id, name, seconds, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto timed = [&report](int id, const char* name,
                         const std::function<Outcome()>& fn) {
    const auto t0 = clock_type::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt =
        std::chrono::duration<double>(clock_type::now() - t0).count();
    report(id, name, o, dt);
  };

  timed(1, "gradient integrity", criterion_gradients);
  timed(2, "relaxed metric oracle equivalence", criterion_metric_oracle);
  timed(3, "metric reductions and bounds", criterion_metric_bounds);
  timed(4, "tiling and augmentation", criterion_tiling);
  timed(5, "optimizer scalar oracle", criterion_adam);

  TrainedPair pair;
  timed(6, "memorization sanity",
        [&pair] { return criterion_memorization(pair); });
  timed(7, "adversarial mechanism",
        [&pair] { return criterion_adversarial(pair); });

  Checkpoint small_ckpt;
  timed(8, "determinism and checkpoint round-trip",
        [&small_ckpt] { return criterion_determinism(small_ckpt); });
  timed(9, "equal-weighting linearity", criterion_linearity);
  timed(10, "diff render consistency",
        [&small_ckpt] { return criterion_diff_render(small_ckpt); });

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures;
}
