#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "mdt/commands.hpp"
#include "mdt/errors.hpp"
#include "mdt/experiment.hpp"

namespace {

// Flag values are collected as flat key=value settings and applied after the
// config file, so flags always win.
struct Cli {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> kv;
  std::vector<std::string> raw_sets;
  std::vector<std::string> inputs;

  void option(CLI::App* cmd, const char* flag, const char* key, const char* help) {
    cmd->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { kv.emplace_back(key, v); }, help);
  }

  void shared(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "flat key=value config file (flags override it)");
    cmd->add_option("--set", raw_sets, "extra key=value override (repeatable)");
    option(cmd, "--seed", "seed", "experiment seed");
    option(cmd, "--out", "out", "output directory");
    option(cmd, "--image-size", "image_size", "square image size in pixels");
    option(cmd, "--domains", "domains", "number of domains N");
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "many-to-many multi-domain image translator\n"
      "Set MDT_SINGLE_THREAD=1 (or MDT_THREADS=n) to control worker threads;\n"
      "results are bit-identical for any thread count."};
  app.require_subcommand(1);

  Cli cli;
  auto* synth = app.add_subcommand("synth", "generate the synthetic paired dataset");
  auto* train = app.add_subcommand("train", "train a translator on a domain-folder dataset");
  auto* translate = app.add_subcommand("translate", "translate images into every domain");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint against a dataset");
  for (CLI::App* cmd : {synth, train, translate, evaluate}) cli.shared(cmd);

  cli.option(synth, "--train-per-domain", "synth.train_per_domain", "training images per domain");
  cli.option(synth, "--test-per-domain", "synth.test_per_domain", "test images per domain");

  cli.option(train, "--dataset", "dataset", "dataset root (uses its train/ split when present)");
  cli.option(train, "--epochs", "train.epochs", "training epochs");
  cli.option(train, "--lr", "train.lr0", "initial learning rate");
  cli.option(train, "--lambda-rec", "train.lambda_rec", "reconstruction weight");
  cli.option(train, "--lambda-idt", "train.lambda_idt", "identity weight");
  cli.option(train, "--iters", "train.iters", "iterations per epoch (0 = largest domain size)");
  cli.option(train, "--batch-size", "train.batch_size", "bags per optimizer step");
  cli.option(train, "--base-channels", "base_channels", "generator base channel width");
  cli.option(train, "--num-downsample", "num_downsample", "encoder down-sampling stages");
  cli.option(train, "--num-res-blocks", "num_res_blocks", "residual blocks per side");
  cli.option(train, "--disc-base-channels", "disc.base_channels", "discriminator base width");
  cli.option(train, "--resume", "resume", "checkpoint path or 'auto'");

  cli.option(translate, "--checkpoint", "checkpoint", "checkpoint file");
  translate->add_option("inputs", cli.inputs, "input images (PNG)");

  cli.option(evaluate, "--checkpoint", "checkpoint", "checkpoint file");
  cli.option(evaluate, "--dataset", "dataset", "dataset root with a test split and pairs.json");
  cli.option(evaluate, "--blocks", "metrics.kid_blocks", "KID block count");
  cli.option(evaluate, "--block-size", "metrics.kid_block_size", "KID block size");

  CLI11_PARSE(app, argc, argv);

  try {
    mdt::ExperimentConfig cfg;
    if (!cli.config_path.empty()) mdt::apply_config_file(cfg, cli.config_path);
    for (const auto& [k, v] : cli.kv) cfg.set(k, v);
    for (const auto& s : cli.raw_sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos)
        throw mdt::ConfigError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    cfg.inputs = cli.inputs;

    if (synth->parsed()) mdt::cli::cmd_synth(cfg);
    else if (train->parsed()) mdt::cli::cmd_train(cfg);
    else if (translate->parsed()) mdt::cli::cmd_translate(cfg);
    else mdt::cli::cmd_evaluate(cfg);
    return mdt::cli::kOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return mdt::cli::exit_code_for(e);
  }
}
