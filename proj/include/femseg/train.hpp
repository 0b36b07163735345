#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "femseg/augment.hpp"
#include "femseg/metrics.hpp"
#include "femseg/nn/adam.hpp"
#include "femseg/nn/dice_loss.hpp"
#include "femseg/predict.hpp"

namespace femseg {

struct TrainConfig {
  std::int64_t batch_size = 2;
  Dim3 patch_size{128, 128, 128};
  Dim3 overlap{64, 64, 64};  // used by validation/inference tiling
  std::int64_t epochs = 300;
  std::int64_t iterations_per_epoch = 80;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size < 1 || epochs < 1 || iterations_per_epoch < 1)
      raise(ErrorKind::Config, "batch size, epochs, and iterations must be positive");
    if (!patch_size.positive()) raise(ErrorKind::Config, "patch size must be positive");
    if (!(learning_rate > 0.0)) raise(ErrorKind::Config, "learning rate must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0))
      raise(ErrorKind::Config, "adam betas must lie in (0, 1)");
    if (!(adam_eps > 0.0)) raise(ErrorKind::Config, "adam eps must be positive");
  }

  AdamConfig adam() const { return AdamConfig{learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

struct EpochRecord {
  std::int64_t epoch = 0;      // 1-based
  double train_loss = 0.0;     // mean over the epoch's iterations
  double val_dsc = std::numeric_limits<double>::quiet_NaN();  // NaN without validation cases
};

using EpochCallback = std::function<void(const EpochRecord&, UNetModel&)>;

/// Mean volume-level overlap of predictions against case masks.
inline double validation_dsc(UNetModel& m, const std::vector<PreprocessedCase>& cases,
                             Dim3 patch, Dim3 overlap) {
  double sum = 0.0;
  for (const auto& c : cases) {
    const LabelMask pred = predict_volume(m, c, patch, overlap);
    sum += dsc(pred, *c.mask);
  }
  return sum / static_cast<double>(cases.size());
}

/// One optimizer step on a batch of freshly augmented random crops; returns
/// the batch loss (mean per-sample Dice loss). Sample randomness derives
/// from (seed, global step, sample slot), so runs are reproducible and a
/// training run split into chunks matches an uninterrupted one.
inline double train_step(UNetModel& model, const std::vector<PreprocessedCase>& cases,
                         const TrainConfig& cfg, const AugmentConfig& aug) {
  const std::int64_t B = cfg.batch_size;
  const Dim3 p = cfg.patch_size;
  Tensor batch_img(TensorShape{B, 1, p.z, p.y, p.x});
  Tensor batch_tgt(TensorShape{B, 2, p.z, p.y, p.x});
  for (std::int64_t s = 0; s < B; ++s) {
    auto rng = make_rng(derive_seed(cfg.seed, model.adam_t, static_cast<std::uint64_t>(s), 1));
    const auto case_idx = std::uniform_int_distribution<std::size_t>(0, cases.size() - 1)(rng);
    const PreprocessedCase sample = augment_pair(cases[case_idx], aug, rng);
    auto [img, tgt] = random_crop(sample, p, rng);
    std::copy(img.v.begin(), img.v.end(), batch_img.channel(s, 0));
    std::copy(tgt.channel(0, 0), tgt.channel(0, 0) + tgt.shape.spatial(),
              batch_tgt.channel(s, 0));
    std::copy(tgt.channel(0, 1), tgt.channel(0, 1) + tgt.shape.spatial(),
              batch_tgt.channel(s, 1));
  }

  Tensor logits = unet_forward(model, std::move(batch_img), true);
  Tensor probs = softmax_voxelwise(logits);

  const std::int64_t sp = probs.shape.spatial();
  Tensor grad_probs(probs.shape);
  double loss = 0.0;
  for (std::int64_t s = 0; s < B; ++s) {
    const auto r = dice_loss({probs.channel(s, 1), static_cast<std::size_t>(sp)},
                             {batch_tgt.channel(s, 1), static_cast<std::size_t>(sp)});
    loss += r.loss;
    double* gp = grad_probs.channel(s, 1);
    for (std::int64_t i = 0; i < sp; ++i) gp[i] = r.grad[static_cast<std::size_t>(i)] /
                                                  static_cast<double>(B);
  }
  loss /= static_cast<double>(B);

  Tensor grad_logits = softmax_backward(grad_probs, probs);
  model.zero_grad();
  unet_backward(model, grad_logits);
  auto params = model.parameters();
  adam_step(params, ++model.adam_t, cfg.adam());
  model.drop_saved();
  return loss;
}

/// Full training loop: per epoch, iterations_per_epoch optimizer steps on
/// batches of augmented random crops, then (when validation cases exist)
/// volume-level validation overlap via tiled prediction.
inline std::vector<EpochRecord> train(UNetModel& model,
                                      const std::vector<PreprocessedCase>& train_cases,
                                      const std::vector<PreprocessedCase>& val_cases,
                                      const TrainConfig& cfg, const AugmentConfig& aug,
                                      const EpochCallback& on_epoch = {}) {
  cfg.validate();
  aug.validate();
  if (train_cases.empty()) raise(ErrorKind::Config, "training requires at least one case");
  for (const auto& c : train_cases)
    if (!c.mask) raise(ErrorKind::Config, "every training case needs a mask");
  for (const auto& c : val_cases)
    if (!c.mask) raise(ErrorKind::Config, "every validation case needs a mask");

  std::vector<EpochRecord> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (std::int64_t e = 0; e < cfg.epochs; ++e) {
    double loss_sum = 0.0;
    for (std::int64_t it = 0; it < cfg.iterations_per_epoch; ++it)
      loss_sum += train_step(model, train_cases, cfg, aug);

    EpochRecord rec;
    rec.epoch = e + 1;
    rec.train_loss = loss_sum / static_cast<double>(cfg.iterations_per_epoch);
    if (!val_cases.empty())
      rec.val_dsc = validation_dsc(model, val_cases, cfg.patch_size, cfg.overlap);
    history.push_back(rec);
    if (on_epoch) on_epoch(rec, model);
  }
  return history;
}

}  // namespace femseg
