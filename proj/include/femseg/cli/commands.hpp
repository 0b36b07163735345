#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "femseg/cli/run_config.hpp"
#include "femseg/core/parallel.hpp"
#include "femseg/io/nifti.hpp"
#include "femseg/io/pnm.hpp"
#include "femseg/metrics.hpp"
#include "femseg/nn/checkpoint.hpp"
#include "femseg/postprocess.hpp"
#include "femseg/predict.hpp"
#include "femseg/train.hpp"

namespace femseg::cli {

namespace cmd_detail {

inline Volume load_image(const std::filesystem::path& p, const std::string& what) {
  nifti::VolumeOrMask v = [&] {
    try {
      return nifti::read_volume_file(p);
    } catch (const Error& e) {
      raise(ErrorKind::Ingestion, what + " " + p.string() + ": " + e.what());
    }
  }();
  if (!std::holds_alternative<Volume>(v))
    raise(ErrorKind::Ingestion, what + " " + p.string() + " is a binary mask, expected a volume");
  return std::get<Volume>(std::move(v));
}

inline LabelMask load_mask(const std::filesystem::path& p, const std::string& what) {
  nifti::VolumeOrMask v = [&] {
    try {
      return nifti::read_volume_file(p);
    } catch (const Error& e) {
      raise(ErrorKind::Ingestion, what + " " + p.string() + ": " + e.what());
    }
  }();
  if (!std::holds_alternative<LabelMask>(v))
    raise(ErrorKind::Ingestion, what + " " + p.string() + " is not a binary mask");
  return std::get<LabelMask>(std::move(v));
}

/// Normalizes and optionally splits/mirrors one scan into network cases.
inline std::vector<std::pair<std::string, PreprocessedCase>> make_cases(
    const std::string& stem, const Volume& image, const std::optional<LabelMask>& mask,
    bool split) {
  const Volume norm = normalize_minmax(image);
  std::vector<std::pair<std::string, PreprocessedCase>> out;
  if (split) {
    auto [right, left] = split_halves(norm, mask);
    out.emplace_back(stem + "_right", std::move(right));
    out.emplace_back(stem + "_left", mirror_lr(std::move(left)));
  } else {
    PreprocessedCase c;
    c.geometry = GeometryRecord{norm.dims(), Dim3{0, 0, 0}, false};
    c.input = std::move(norm);
    c.mask = mask;
    out.emplace_back(stem, std::move(c));
  }
  return out;
}

inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace cmd_detail

/// train: fit the network on the manifest, recording per-epoch losses and
/// validation overlap, and writing final plus best-validation checkpoints.
inline void cmd_train(const RunConfig& cfg) {
  using namespace cmd_detail;
  std::vector<PreprocessedCase> train_cases, val_cases;
  auto ingest = [&](const std::vector<DataPairSpec>& pairs,
                    std::vector<PreprocessedCase>& out) {
    for (const auto& p : pairs) {
      const Volume img = load_image(p.image, "case image");
      const LabelMask msk = load_mask(p.mask, "case mask");
      if (msk.dims() != img.dims())
        raise(ErrorKind::Ingestion,
              "case " + p.image.string() + ": mask dims do not match image");
      for (auto& [id, c] : make_cases(p.image.stem().string(), img, msk, cfg.split_halves))
        out.push_back(std::move(c));
    }
  };
  ingest(cfg.train_cases, train_cases);
  ingest(cfg.val_cases, val_cases);

  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream history(cfg.output_dir / "history.tsv", std::ios::trunc);
  if (!history) raise(ErrorKind::Processing, "cannot write history file");
  history << "epoch\ttrain_loss\tval_dsc\n";

  UNetModel model = make_unet(cfg.model, cfg.seed);
  double best_val = -1.0;
  const auto best_path = cfg.output_dir / "checkpoint_best.fsck";
  auto on_epoch = [&](const EpochRecord& rec, UNetModel& m) {
    history << rec.epoch << '\t' << fmt6(rec.train_loss) << '\t'
            << (std::isnan(rec.val_dsc) ? std::string("nan") : fmt6(rec.val_dsc)) << '\n';
    history.flush();
    if (!std::isnan(rec.val_dsc) && rec.val_dsc > best_val) {
      best_val = rec.val_dsc;
      save_checkpoint(best_path, m);
    }
    std::cout << "epoch " << rec.epoch << "/" << cfg.training.epochs << "  loss "
              << fmt6(rec.train_loss);
    if (!std::isnan(rec.val_dsc)) std::cout << "  val_dsc " << fmt6(rec.val_dsc);
    std::cout << std::endl;
  };
  train(model, train_cases, val_cases, cfg.training, cfg.augment, on_epoch);

  save_checkpoint(cfg.output_dir / "checkpoint_final.fsck", model);
  if (best_val < 0.0) save_checkpoint(best_path, model);  // no validation split
}

/// predict: checkpointed model over each input scan; per femur, tiled
/// inference, geometry restoration, largest-component cleanup, mask output,
/// and a wall-clock timing row.
inline void cmd_predict(const RunConfig& cfg) {
  using namespace cmd_detail;
  UNetModel model = load_checkpoint(cfg.checkpoint);
  if (cfg.model_specified && !(model.config == cfg.model))
    raise(ErrorKind::Compatibility,
          "checkpoint architecture does not match the configured model block");
  const std::int64_t div = model.config.spatial_divisor();
  if (cfg.infer_patch.z % div != 0 || cfg.infer_patch.y % div != 0 ||
      cfg.infer_patch.x % div != 0)
    raise(ErrorKind::Compatibility, "inference patch_size must be divisible by " +
                                        std::to_string(div) + " for this checkpoint");

  struct Job {
    std::string id;
    PreprocessedCase c;
    std::filesystem::path out_path;
    double seconds = 0.0;
  };
  std::vector<Job> jobs;
  for (const auto& input : cfg.inputs) {
    const Volume img = load_image(input, "input volume");
    for (auto& [id, c] : make_cases(input.stem().string(), img, std::nullopt, cfg.split_halves)) {
      Job j;
      j.id = id;
      j.c = std::move(c);
      jobs.push_back(std::move(j));
    }
  }
  std::filesystem::create_directories(cfg.output_dir);
  for (auto& j : jobs) j.out_path = cfg.output_dir / (j.id + "_mask.nii");

  parallel_for_items(static_cast<std::int64_t>(jobs.size()), cfg.workers, [&](std::int64_t i) {
    Job& j = jobs[static_cast<std::size_t>(i)];
    const auto t0 = std::chrono::steady_clock::now();
    LabelMask pred = predict_volume(model, j.c, cfg.infer_patch, cfg.infer_overlap);
    pred = restore_geometry(pred, j.c.geometry);
    if (pred.foreground_count() > 0) pred = largest_component(pred);
    j.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    nifti::write_volume_file(j.out_path, pred);
  });

  std::ofstream timing(cfg.output_dir / "timing.tsv", std::ios::trunc);
  if (!timing) raise(ErrorKind::Processing, "cannot write timing file");
  timing << "case_id\tseconds\n";
  for (const auto& j : jobs) {
    timing << j.id << '\t' << fmt6(j.seconds) << '\n';
    std::cout << "predicted " << j.id << " in " << fmt6(j.seconds) << " s" << std::endl;
  }
}

namespace cmd_detail {

/// Central-slice audit image: ground truth filled, prediction contoured.
inline void write_overlay(const std::filesystem::path& path, const LabelMask& pred,
                          const LabelMask& gt, const Volume* image) {
  const Dim3 d = pred.dims();
  const std::int64_t z = d.z / 2;
  std::vector<std::array<std::uint8_t, 3>> pix(static_cast<std::size_t>(d.y * d.x));
  auto contour = [&](std::int64_t y, std::int64_t x) {
    if (!pred.data(z, y, x)) return false;
    return y == 0 || x == 0 || y == d.y - 1 || x == d.x - 1 || !pred.data(z, y - 1, x) ||
           !pred.data(z, y + 1, x) || !pred.data(z, y, x - 1) || !pred.data(z, y, x + 1);
  };
  for (std::int64_t y = 0; y < d.y; ++y)
    for (std::int64_t x = 0; x < d.x; ++x) {
      std::uint8_t base = 0;
      if (image) {
        double v = static_cast<double>(image->data(z, y, x));
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        base = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
      std::array<std::uint8_t, 3> c{base, base, base};
      if (gt.data(z, y, x)) c[1] = static_cast<std::uint8_t>(std::min(255, base + 120));
      if (contour(y, x)) c = {255, static_cast<std::uint8_t>(c[1] / 2), 0};
      pix[static_cast<std::size_t>(y * d.x + x)] = c;
    }
  pnm::write_ppm(path, pix, d.x, d.y);
}

}  // namespace cmd_detail

/// evaluate: per-case DSC/HD/HD95 against ground truth plus the cohort
/// summary block; optional overlay slices for visual audit.
inline void cmd_evaluate(const RunConfig& cfg) {
  using namespace cmd_detail;
  struct Loaded {
    LabelMask pred, gt;
    std::optional<Volume> image;
  };
  std::vector<Loaded> loaded(cfg.eval_pairs.size());
  std::vector<MetricsReport> reports(cfg.eval_pairs.size());

  for (std::size_t i = 0; i < cfg.eval_pairs.size(); ++i) {
    const auto& p = cfg.eval_pairs[i];
    loaded[i].pred = load_mask(p.prediction, "case " + p.id + " prediction");
    loaded[i].gt = load_mask(p.ground_truth, "case " + p.id + " ground truth");
    if (loaded[i].pred.dims() != loaded[i].gt.dims())
      raise(ErrorKind::Pairing, "case " + p.id + ": prediction and ground truth dims differ");
    if (p.image) loaded[i].image = normalize_minmax(load_image(*p.image, "case " + p.id));
  }

  std::filesystem::create_directories(cfg.output_dir);
  if (cfg.overlays) std::filesystem::create_directories(cfg.output_dir / "overlays");

  parallel_for_items(static_cast<std::int64_t>(cfg.eval_pairs.size()), cfg.workers,
                     [&](std::int64_t i) {
                       const auto& p = cfg.eval_pairs[static_cast<std::size_t>(i)];
                       auto& l = loaded[static_cast<std::size_t>(i)];
                       reports[static_cast<std::size_t>(i)] =
                           evaluate_case(p.id, l.pred, l.gt, 0.0);
                       if (cfg.overlays)
                         write_overlay(cfg.output_dir / "overlays" / (p.id + ".ppm"), l.pred,
                                       l.gt, l.image ? &*l.image : nullptr);
                     });

  std::ofstream out(cfg.output_dir / "metrics.tsv", std::ios::trunc);
  if (!out) raise(ErrorKind::Processing, "cannot write metrics report");
  write_metrics_report(out, reports);
  write_metrics_report(std::cout, reports);
}

/// augment-preview: before/after central-slice images of one case under the
/// configured augmentation, deterministic per seed.
inline void cmd_augment_preview(const RunConfig& cfg) {
  using namespace cmd_detail;
  const Volume img = load_image(cfg.preview_image, "preview image");
  const LabelMask msk = load_mask(cfg.preview_mask, "preview mask");
  if (msk.dims() != img.dims())
    raise(ErrorKind::Ingestion, "preview mask dims do not match image");

  PreprocessedCase c;
  c.input = normalize_minmax(img);
  c.mask = msk;
  c.geometry = GeometryRecord{img.dims(), Dim3{0, 0, 0}, false};

  auto rng = make_rng(cfg.seed);
  AugmentTrace trace;
  const PreprocessedCase aug = augment_pair(c, cfg.augment, rng, &trace);

  std::filesystem::create_directories(cfg.output_dir);
  const Dim3 d = c.input.dims();
  pnm::write_pgm(cfg.output_dir / "preview_original_image.pgm", pnm::central_slice(c.input.data),
                 d.x, d.y);
  pnm::write_pgm(cfg.output_dir / "preview_original_mask.pgm", pnm::central_slice(c.mask->data),
                 d.x, d.y);
  pnm::write_pgm(cfg.output_dir / "preview_augmented_image.pgm",
                 pnm::central_slice(aug.input.data), d.x, d.y);
  pnm::write_pgm(cfg.output_dir / "preview_augmented_mask.pgm",
                 pnm::central_slice(aug.mask->data), d.x, d.y);

  std::ofstream tr(cfg.output_dir / "preview_trace.txt", std::ios::trunc);
  tr << "affine\t" << trace.affine << "\trot_deg\t" << trace.rot_x << '\t' << trace.rot_y << '\t'
     << trace.rot_z << "\tscale\t" << trace.scale << '\n'
     << "elastic\t" << trace.elastic << "\talpha\t" << trace.alpha << "\tsigma\t" << trace.sigma
     << '\n'
     << "brightness\t" << trace.brightness << "\tfactor\t" << trace.factor << '\n';
}

/// Maps failure categories onto process exit codes: 2 for configuration,
/// 3 for ingestion, 4 for everything else.
inline int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Ingestion: return 3;
    default: return 4;
  }
}

}  // namespace femseg::cli
