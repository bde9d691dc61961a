// cascadet: generate synthetic scenes, train, evaluate and ablate.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "cascadet/checkpoint.hpp"
#include "cascadet/experiment.hpp"

namespace {

using namespace cascadet;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Run configuration file (key = value lines)");
  cmd->add_option("--seed", o.seed, "Seed");
  cmd->add_option("--override", o.overrides, "KEY=VALUE, applied after the config file (repeatable)");
  cmd->add_option("--out", o.out_dir, "Output directory");
  cmd->add_option("--threads", o.threads, "Worker threads for data generation and evaluation");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const auto& kv : o.overrides) apply_setting(config, kv, "--override");
  if (!o.out_dir.empty()) config.out_dir = o.out_dir;
  if (o.threads) config.threads = *o.threads;
  return config;
}

void check(const RunConfig& config) {
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

int cmd_train(const CommonOptions& o) {
  RunConfig config = resolve(o);
  if (o.seed) config.seed = *o.seed;
  check(config);
  std::cout << "# epoch, step, lr, str_loss, stc_loss, fsm_loss, total\n";
  const RunResult result = run_experiment(config, [](const EpochLog& e) { std::cout << metrics_line(e) << std::endl; });
  write_run_artifacts(config.out_dir, config, result, evaluation_set(config));
  std::cout << summary_line(result.eval.report) << "\n";
  std::cout << "wrote " << config.out_dir << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint) {
  RunConfig config = resolve(o);
  if (o.seed) config.data.eval_seed = *o.seed;
  check(config);
  Detector<float> model(config.model, init_seed(config));
  model.load_records(load_checkpoint(checkpoint));
  const auto scenes = evaluation_set(config);
  const EvalOutput eval = evaluate_model(model, scenes, config.cascade, config.threads);
  write_eval_artifacts(config.out_dir, eval, scenes);
  std::cout << summary_line(eval.report) << "\n";
  return 0;
}

int cmd_ablate(const CommonOptions& o) {
  RunConfig config = resolve(o);
  if (o.seed) config.seed = *o.seed;
  check(config);
  const auto rows = run_ablation(config, [](const AblationRow& r) {
    std::cout << r.name << ": " << summary_line(r.report) << std::endl;
  });
  std::filesystem::create_directories(config.out_dir);
  std::ofstream table(std::filesystem::path(config.out_dir) / "ablation.txt");
  write_ablation_table(table, rows);
  write_ablation_table(std::cout, rows);
  return 0;
}

int cmd_generate(const CommonOptions& o, std::optional<int> count) {
  RunConfig config = resolve(o);
  if (o.seed) config.data.train_seed = *o.seed;
  if (count) config.data.train_scenes = *count;
  check(config);
  const auto scenes = training_set(config);
  for (std::size_t i = 0; i < scenes.size(); ++i) export_scene(scenes[i], static_cast<int>(i), config.out_dir);
  std::cout << "wrote " << scenes.size() << " scenes to " << config.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective two-step anchor detector: synthetic training and evaluation"};
  app.require_subcommand(1);

  CommonOptions train_opts, eval_opts, ablate_opts, gen_opts;
  auto* train = app.add_subcommand("train", "Train on the synthetic training set, then evaluate");
  add_common(train, train_opts);

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint; --seed selects the evaluation scenes");
  add_common(eval, eval_opts);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  auto* ablate = app.add_subcommand("ablate", "Baseline, each module alone, and all modules");
  add_common(ablate, ablate_opts);

  std::optional<int> count;
  auto* gen = app.add_subcommand("generate", "Export synthetic scenes as PPM images with box sidecars");
  add_common(gen, gen_opts);
  gen->add_option("--count", count, "Number of scenes (default: train_scenes)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_opts);
    if (eval->parsed()) return cmd_eval(eval_opts, checkpoint);
    if (ablate->parsed()) return cmd_ablate(ablate_opts);
    if (gen->parsed()) return cmd_generate(gen_opts, count);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
