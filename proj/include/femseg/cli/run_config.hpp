#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "femseg/augment.hpp"
#include "femseg/nn/unet.hpp"
#include "femseg/train.hpp"

// Run configuration: one JSON file per run plus command-line overrides
// (flags win). Every referenced input path is checked during validation,
// before any output is touched.

namespace femseg::cli {

using nlohmann::json;

struct DataPairSpec {
  std::filesystem::path image;
  std::filesystem::path mask;
};

struct EvalPairSpec {
  std::string id;
  std::filesystem::path prediction;
  std::filesystem::path ground_truth;
  std::optional<std::filesystem::path> image;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 1;
  std::filesystem::path output_dir;

  // train
  bool split_halves = false;
  std::vector<DataPairSpec> train_cases;
  std::vector<DataPairSpec> val_cases;
  UNetConfig model;
  TrainConfig training;
  AugmentConfig augment;

  // predict
  std::filesystem::path checkpoint;
  std::vector<std::filesystem::path> inputs;
  bool model_specified = false;  // config carried an explicit model block
  Dim3 infer_patch{128, 128, 128};
  Dim3 infer_overlap{64, 64, 64};

  // evaluate
  std::vector<EvalPairSpec> eval_pairs;
  bool overlays = false;

  // augment-preview
  std::filesystem::path preview_image;
  std::filesystem::path preview_mask;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> output_dir;
  std::optional<std::string> checkpoint;
};

namespace cfg_detail {

inline json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Config, "cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    raise(ErrorKind::Config, "config parse error in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) raise(ErrorKind::Config, "config root must be a JSON object");
  return j;
}

inline Dim3 as_dim3(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number_integer())
    raise(ErrorKind::Config, key + " must be a [z, y, x] integer triple");
  return Dim3{j[0].get<std::int64_t>(), j[1].get<std::int64_t>(), j[2].get<std::int64_t>()};
}

inline std::pair<double, double> as_range(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number())
    raise(ErrorKind::Config, key + " must be a [lo, hi] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void require_file(const std::filesystem::path& p, const std::string& what) {
  if (p.empty()) raise(ErrorKind::Config, what + " path missing");
  if (!std::filesystem::exists(p)) raise(ErrorKind::Config, what + " does not exist: " + p.string());
}

inline void parse_common(const json& j, RunConfig& cfg) {
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("workers")) cfg.workers = j.at("workers").get<int>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
}

inline void parse_model(const json& j, UNetConfig& m) {
  if (j.contains("levels")) m.levels = j.at("levels").get<std::int64_t>();
  if (j.contains("base_features")) m.base_features = j.at("base_features").get<std::int64_t>();
  if (j.contains("in_channels")) m.in_channels = j.at("in_channels").get<std::int64_t>();
  if (j.contains("out_classes")) m.out_classes = j.at("out_classes").get<std::int64_t>();
}

inline void parse_training(const json& j, TrainConfig& t) {
  if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<std::int64_t>();
  if (j.contains("patch_size")) t.patch_size = as_dim3(j.at("patch_size"), "patch_size");
  if (j.contains("overlap")) t.overlap = as_dim3(j.at("overlap"), "overlap");
  if (j.contains("epochs")) t.epochs = j.at("epochs").get<std::int64_t>();
  if (j.contains("iterations_per_epoch"))
    t.iterations_per_epoch = j.at("iterations_per_epoch").get<std::int64_t>();
  if (j.contains("learning_rate")) t.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("adam_beta1")) t.adam_beta1 = j.at("adam_beta1").get<double>();
  if (j.contains("adam_beta2")) t.adam_beta2 = j.at("adam_beta2").get<double>();
  if (j.contains("adam_eps")) t.adam_eps = j.at("adam_eps").get<double>();
}

inline void parse_augment(const json& j, AugmentConfig& a) {
  if (j.contains("apply_probability"))
    a.apply_probability = j.at("apply_probability").get<double>();
  if (j.contains("brightness_range"))
    a.brightness_range = as_range(j.at("brightness_range"), "brightness_range");
  if (j.contains("rotation_range_deg"))
    a.rotation_range_deg = as_range(j.at("rotation_range_deg"), "rotation_range_deg");
  if (j.contains("scaling_range"))
    a.scaling_range = as_range(j.at("scaling_range"), "scaling_range");
  if (j.contains("elastic_alpha_range"))
    a.elastic_alpha_range = as_range(j.at("elastic_alpha_range"), "elastic_alpha_range");
  if (j.contains("elastic_sigma_range"))
    a.elastic_sigma_range = as_range(j.at("elastic_sigma_range"), "elastic_sigma_range");
}

inline std::vector<DataPairSpec> parse_pairs(const json& j, const std::string& what) {
  std::vector<DataPairSpec> out;
  if (!j.is_array()) raise(ErrorKind::Config, what + " must be an array");
  for (const auto& e : j) {
    if (!e.is_object() || !e.contains("image") || !e.contains("mask"))
      raise(ErrorKind::Config, what + " entries need image and mask paths");
    out.push_back({e.at("image").get<std::string>(), e.at("mask").get<std::string>()});
  }
  return out;
}

inline void apply_overrides(RunConfig& cfg, const Overrides& ov) {
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.workers) cfg.workers = *ov.workers;
  if (ov.output_dir) cfg.output_dir = *ov.output_dir;
  if (ov.checkpoint) cfg.checkpoint = *ov.checkpoint;
  if (cfg.workers < 1) {
    if (const char* env = std::getenv("FEMSEG_WORKERS")) cfg.workers = std::atoi(env);
    if (cfg.workers < 1) cfg.workers = 1;
  }
}

}  // namespace cfg_detail

inline RunConfig load_train_config(const std::filesystem::path& path, const Overrides& ov) {
  using namespace cfg_detail;
  const json j = load_json(path);
  RunConfig cfg;
  cfg.training.patch_size = Dim3{128, 128, 128};
  parse_common(j, cfg);
  if (!j.contains("data")) raise(ErrorKind::Config, "train config needs a data block");
  const json& d = j.at("data");
  if (d.contains("split_halves")) cfg.split_halves = d.at("split_halves").get<bool>();
  if (!d.contains("train")) raise(ErrorKind::Config, "data.train manifest missing");
  cfg.train_cases = parse_pairs(d.at("train"), "data.train");
  if (d.contains("validation")) cfg.val_cases = parse_pairs(d.at("validation"), "data.validation");
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("training")) parse_training(j.at("training"), cfg.training);
  if (j.contains("augment")) parse_augment(j.at("augment"), cfg.augment);
  apply_overrides(cfg, ov);
  cfg.training.seed = cfg.seed;

  if (cfg.output_dir.empty()) raise(ErrorKind::Config, "output_dir missing");
  if (cfg.train_cases.empty()) raise(ErrorKind::Config, "data.train manifest is empty");
  cfg.model.validate();
  cfg.training.validate();
  cfg.augment.validate();
  for (const auto& p : cfg.train_cases) {
    require_file(p.image, "training image");
    require_file(p.mask, "training mask");
  }
  for (const auto& p : cfg.val_cases) {
    require_file(p.image, "validation image");
    require_file(p.mask, "validation mask");
  }
  // disjoint splits
  for (const auto& t : cfg.train_cases)
    for (const auto& v : cfg.val_cases)
      if (std::filesystem::absolute(t.image) == std::filesystem::absolute(v.image))
        raise(ErrorKind::Config,
              "training and validation splits overlap on " + t.image.string());
  const std::int64_t div = cfg.model.spatial_divisor();
  const Dim3 p = cfg.training.patch_size;
  if (p.z % div != 0 || p.y % div != 0 || p.x % div != 0)
    raise(ErrorKind::Config, "patch_size must be divisible by " + std::to_string(div));
  return cfg;
}

inline RunConfig load_predict_config(const std::filesystem::path& path, const Overrides& ov) {
  using namespace cfg_detail;
  const json j = load_json(path);
  RunConfig cfg;
  parse_common(j, cfg);
  if (j.contains("checkpoint")) cfg.checkpoint = j.at("checkpoint").get<std::string>();
  if (j.contains("model")) {
    parse_model(j.at("model"), cfg.model);
    cfg.model_specified = true;
  }
  if (!j.contains("data")) raise(ErrorKind::Config, "predict config needs a data block");
  const json& d = j.at("data");
  if (d.contains("split_halves")) cfg.split_halves = d.at("split_halves").get<bool>();
  if (!d.contains("inputs") || !d.at("inputs").is_array())
    raise(ErrorKind::Config, "data.inputs must list input volumes");
  for (const auto& e : d.at("inputs")) cfg.inputs.push_back(e.get<std::string>());
  if (j.contains("inference")) {
    const json& inf = j.at("inference");
    if (inf.contains("patch_size")) cfg.infer_patch = as_dim3(inf.at("patch_size"), "patch_size");
    if (inf.contains("overlap")) cfg.infer_overlap = as_dim3(inf.at("overlap"), "overlap");
  }
  apply_overrides(cfg, ov);

  if (cfg.output_dir.empty()) raise(ErrorKind::Config, "output_dir missing");
  if (cfg.inputs.empty()) raise(ErrorKind::Config, "data.inputs is empty");
  require_file(cfg.checkpoint, "checkpoint");
  for (const auto& p : cfg.inputs) require_file(p, "input volume");
  if (!cfg.infer_patch.positive()) raise(ErrorKind::Config, "inference patch must be positive");
  const Dim3 s = cfg.infer_patch - cfg.infer_overlap;
  if (!s.positive()) raise(ErrorKind::Config, "inference patch must exceed overlap");
  return cfg;
}

inline RunConfig load_evaluate_config(const std::filesystem::path& path, const Overrides& ov) {
  using namespace cfg_detail;
  const json j = load_json(path);
  RunConfig cfg;
  parse_common(j, cfg);
  if (j.contains("overlays")) cfg.overlays = j.at("overlays").get<bool>();
  if (!j.contains("data") || !j.at("data").contains("pairs"))
    raise(ErrorKind::Config, "evaluate config needs data.pairs");
  for (const auto& e : j.at("data").at("pairs")) {
    if (!e.is_object() || !e.contains("id") || !e.contains("prediction") ||
        !e.contains("ground_truth"))
      raise(ErrorKind::Config, "data.pairs entries need id, prediction, ground_truth");
    EvalPairSpec p;
    p.id = e.at("id").get<std::string>();
    p.prediction = e.at("prediction").get<std::string>();
    p.ground_truth = e.at("ground_truth").get<std::string>();
    if (e.contains("image")) p.image = std::filesystem::path(e.at("image").get<std::string>());
    cfg.eval_pairs.push_back(std::move(p));
  }
  apply_overrides(cfg, ov);

  if (cfg.output_dir.empty()) raise(ErrorKind::Config, "output_dir missing");
  if (cfg.eval_pairs.empty()) raise(ErrorKind::Config, "data.pairs is empty");
  for (const auto& p : cfg.eval_pairs) {
    if (!std::filesystem::exists(p.prediction))
      raise(ErrorKind::Pairing, "case " + p.id + ": prediction missing: " + p.prediction.string());
    if (!std::filesystem::exists(p.ground_truth))
      raise(ErrorKind::Pairing,
            "case " + p.id + ": ground truth missing: " + p.ground_truth.string());
    if (p.image) require_file(*p.image, "case " + p.id + " image");
  }
  return cfg;
}

inline RunConfig load_preview_config(const std::filesystem::path& path, const Overrides& ov) {
  using namespace cfg_detail;
  const json j = load_json(path);
  RunConfig cfg;
  parse_common(j, cfg);
  if (!j.contains("data")) raise(ErrorKind::Config, "augment-preview config needs a data block");
  const json& d = j.at("data");
  if (d.contains("image")) cfg.preview_image = d.at("image").get<std::string>();
  if (d.contains("mask")) cfg.preview_mask = d.at("mask").get<std::string>();
  if (j.contains("augment")) parse_augment(j.at("augment"), cfg.augment);
  apply_overrides(cfg, ov);

  if (cfg.output_dir.empty()) raise(ErrorKind::Config, "output_dir missing");
  require_file(cfg.preview_image, "preview image");
  require_file(cfg.preview_mask, "preview mask");
  cfg.augment.validate();
  return cfg;
}

}  // namespace femseg::cli
