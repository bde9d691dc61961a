#pragma once

// Generate -> train -> evaluate, as driven by a RunConfig.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cascadet/config.hpp"
#include "cascadet/eval.hpp"
#include "cascadet/synth.hpp"
#include "cascadet/train.hpp"

namespace cascadet {

std::vector<Scene> training_set(const RunConfig& config);
std::vector<Scene> evaluation_set(const RunConfig& config);

// Initialization seed of the model for a run.
std::uint64_t init_seed(const RunConfig& config);

struct EvalOutput {
  DetectionsPerImage detections;
  EvalReport report;
};

// Batched inference over `scenes` plus the full report, including the step-1
// positive/negative anchor ratio before and after the stc filter.
EvalOutput evaluate_model(const Detector<float>& model, const std::vector<Scene>& scenes, const CascadeConfig& cascade,
                          int threads = 1, int batch_size = 16);

struct RunResult {
  Detector<float> model;
  std::vector<EpochLog> log;
  EvalOutput eval;
};

RunResult run_experiment(const RunConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

// "epoch, step, lr, str_loss, stc_loss, fsm_loss, total"
std::string metrics_line(const EpochLog& entry);

// model.ckpt, metrics.log, config.cfg, report.txt, pr.txt, detections.txt, gts.txt
void write_run_artifacts(const std::filesystem::path& dir, const RunConfig& config, const RunResult& result,
                         const std::vector<Scene>& eval_scenes);
void write_eval_artifacts(const std::filesystem::path& dir, const EvalOutput& eval, const std::vector<Scene>& eval_scenes);

struct Toggles {
  bool str = false, stc = false, sml = false, fsm = false, rfe = false;
};

// Starts from `base` and switches each module on (default settings) or off.
RunConfig with_toggles(const RunConfig& base, const Toggles& toggles);

struct AblationRow {
  std::string name;
  Toggles toggles;
  EvalReport report;
};

// baseline, +STR, +STC, +SML, +FSM, +RFE, all-on
std::vector<std::pair<std::string, Toggles>> ablation_rows();
std::vector<AblationRow> run_ablation(const RunConfig& base,
                                      const std::function<void(const AblationRow&)>& on_row = {});
void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace cascadet
