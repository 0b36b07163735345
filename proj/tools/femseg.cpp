// Batch command-line front end for the segmentation pipeline:
// train / predict / evaluate / augment-preview, each driven by a JSON run
// configuration with flag overrides.

#include <CLI11.hpp>

#include <iostream>

#include "femseg/cli/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Volumetric proximal-femur segmentation toolkit"};
  app.require_subcommand(1);

  struct Args {
    std::string config;
    femseg::cli::Overrides ov;
  };

  auto add_common = [](CLI::App* cmd, Args& a) {
    cmd->add_option("--config", a.config, "Run configuration file (JSON)")->required();
    cmd->add_option("--seed", a.ov.seed, "Override the configured seed");
    cmd->add_option("--workers", a.ov.workers, "Override the worker count");
    cmd->add_option("--output-dir", a.ov.output_dir, "Override the output directory");
  };

  Args train_args, predict_args, eval_args, preview_args;
  CLI::App* train = app.add_subcommand("train", "Fit the network on a dataset manifest");
  add_common(train, train_args);
  CLI::App* predict = app.add_subcommand("predict", "Segment volumes with a checkpoint");
  add_common(predict, predict_args);
  predict->add_option("--checkpoint", predict_args.ov.checkpoint, "Model checkpoint file");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  add_common(evaluate, eval_args);
  CLI::App* preview =
      app.add_subcommand("augment-preview", "Write before/after augmentation slices");
  add_common(preview, preview_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      femseg::cli::cmd_train(femseg::cli::load_train_config(train_args.config, train_args.ov));
    else if (predict->parsed())
      femseg::cli::cmd_predict(
          femseg::cli::load_predict_config(predict_args.config, predict_args.ov));
    else if (evaluate->parsed())
      femseg::cli::cmd_evaluate(
          femseg::cli::load_evaluate_config(eval_args.config, eval_args.ov));
    else if (preview->parsed())
      femseg::cli::cmd_augment_preview(
          femseg::cli::load_preview_config(preview_args.config, preview_args.ov));
  } catch (const femseg::Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return femseg::cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 4;
  }
  return 0;
}
