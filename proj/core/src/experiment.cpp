#include "cascadet/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "cascadet/checkpoint.hpp"
#include "cascadet/rng.hpp"

namespace cascadet {

namespace {

GenerateOptions generate_options(const RunConfig& config) {
  GenerateOptions opt;
  opt.size = config.model.image_size;
  opt.scale_mix = config.data.scale_mix;
  opt.threads = config.threads;
  return opt;
}

struct BatchStats {
  std::int64_t pos_before = 0, neg_before = 0, pos_after = 0, neg_after = 0;
};

double ratio(std::int64_t pos, std::int64_t neg) {
  return neg == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(pos) / static_cast<double>(neg);
}

}  // namespace

std::vector<Scene> training_set(const RunConfig& config) {
  return generate(config.data.train_seed, config.data.train_scenes, generate_options(config));
}

std::vector<Scene> evaluation_set(const RunConfig& config) {
  return generate(config.data.eval_seed, config.data.eval_scenes, generate_options(config));
}

std::uint64_t init_seed(const RunConfig& config) { return derive_seed(config.seed, "init"); }

EvalOutput evaluate_model(const Detector<float>& model, const std::vector<Scene>& scenes, const CascadeConfig& cascade,
                          int threads, int batch_size) {
  const PyramidLayout layout(model.config().image_size, model.config().strides);
  const std::size_t n = scenes.size();
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  const std::size_t batches = (n + bs - 1) / bs;
  EvalOutput out;
  out.detections.resize(n);
  std::vector<BatchStats> stats(batches);

  auto run_batch = [&](std::size_t b) {
    NoGradGuard no_grad;
    std::vector<std::size_t> idx;
    std::vector<std::vector<Box>> gts;
    for (std::size_t i = b * bs; i < std::min(n, (b + 1) * bs); ++i) {
      idx.push_back(i);
      gts.push_back(scenes[i].gts);
    }
    const auto feats = model.features(make_batch(scenes, idx));
    const auto outputs = model.heads(feats, cascade.str_levels, cascade.stc_levels);
    const auto preds = extract_predictions(outputs, layout);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.detections[idx[k]] = postprocess(preds[k], layout, cascade, model.config().image_size);
    }
    const TrainTargets t = plan_targets(layout, preds, gts, cascade, false, model.config().image_size);
    stats[b] = {t.pos_before, t.neg_before, t.pos_after, t.neg_after};
  };

  const auto t = static_cast<std::size_t>(std::max(1, threads));
  if (t <= 1 || batches < 2) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < std::min(t, batches); ++k) {
      pool.emplace_back([&, k] {
        for (std::size_t b = k; b < batches; b += t) run_batch(b);
      });
    }
    for (auto& th : pool) th.join();
  }

  BatchStats total;
  for (const auto& s : stats) {
    total.pos_before += s.pos_before;
    total.neg_before += s.neg_before;
    total.pos_after += s.pos_after;
    total.neg_after += s.neg_after;
  }
  BoxesPerImage gts;
  for (const auto& s : scenes) gts.push_back(s.gts);
  out.report = evaluate(out.detections, gts, threads);
  out.report.pos_neg_ratio_before = ratio(total.pos_before, total.neg_before);
  out.report.pos_neg_ratio = ratio(total.pos_after, total.neg_after);
  return out;
}

RunResult run_experiment(const RunConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  RunResult result{Detector<float>(config.model, init_seed(config)), {}, {}};
  const auto train_scenes = training_set(config);
  result.log = train(result.model, train_scenes, config.train, config.cascade, derive_seed(config.seed, "train"), on_epoch);
  result.eval = evaluate_model(result.model, evaluation_set(config), config.cascade, config.threads);
  return result;
}

std::string metrics_line(const EpochLog& e) {
  std::ostringstream os;
  os << e.epoch << ", " << e.step << ", " << std::setprecision(9) << e.lr << ", " << e.mean.str_loss << ", "
     << e.mean.stc_loss << ", " << e.mean.fsm_loss << ", " << e.mean.total;
  return os.str();
}

void write_eval_artifacts(const std::filesystem::path& dir, const EvalOutput& eval, const std::vector<Scene>& eval_scenes) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "report.txt");
    write_report(os, eval.report);
  }
  {
    std::ofstream os(dir / "pr.txt");
    write_pr_curve(os, eval.report.pr);
  }
  {
    std::vector<DumpRecord> records;
    for (std::size_t i = 0; i < eval.detections.size(); ++i) {
      for (const auto& d : eval.detections[i]) records.push_back({static_cast<int>(i), d.box, d.score});
    }
    std::ofstream os(dir / "detections.txt");
    write_dump(os, records);
  }
  {
    std::ofstream os(dir / "gts.txt");
    for (std::size_t i = 0; i < eval_scenes.size(); ++i) write_boxes(os, static_cast<int>(i), eval_scenes[i].gts);
  }
}

void write_run_artifacts(const std::filesystem::path& dir, const RunConfig& config, const RunResult& result,
                         const std::vector<Scene>& eval_scenes) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "model.ckpt", result.model.to_records());
  {
    std::ofstream os(dir / "config.cfg");
    write_config(os, config);
  }
  {
    std::ofstream os(dir / "metrics.log");
    os << "# epoch, step, lr, str_loss, stc_loss, fsm_loss, total\n";
    for (const auto& e : result.log) os << metrics_line(e) << "\n";
  }
  write_eval_artifacts(dir, result.eval, eval_scenes);
}

RunConfig with_toggles(const RunConfig& base, const Toggles& toggles) {
  const CascadeConfig defaults;
  RunConfig c = base;
  c.cascade.str_levels = toggles.str ? defaults.str_levels : std::vector<int>{};
  c.cascade.stc_levels = toggles.stc ? defaults.stc_levels : std::vector<int>{};
  c.cascade.sml_enabled = toggles.sml;
  c.model.fsm_enabled = toggles.fsm;
  c.model.rfe_enabled = toggles.rfe;
  return c;
}

std::vector<std::pair<std::string, Toggles>> ablation_rows() {
  return {
      {"baseline", Toggles{}},
      {"+STR", Toggles{.str = true}},
      {"+STC", Toggles{.stc = true}},
      {"+SML", Toggles{.sml = true}},
      {"+FSM", Toggles{.fsm = true}},
      {"+RFE", Toggles{.rfe = true}},
      {"all", Toggles{true, true, true, true, true}},
  };
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const std::function<void(const AblationRow&)>& on_row) {
  std::vector<AblationRow> rows;
  for (const auto& [name, toggles] : ablation_rows()) {
    RunResult r = run_experiment(with_toggles(base, toggles));
    rows.push_back({name, toggles, std::move(r.eval.report)});
    if (on_row) on_row(rows.back());
  }
  return rows;
}

void write_ablation_table(std::ostream& os, const std::vector<AblationRow>& rows) {
  auto mark = [](bool on) { return on ? "  x " : "    "; };
  os << std::left << std::setw(10) << "row" << " STR  STC  SML  FSM  RFE "
     << "   AP@0.5    AP@0.6    AP@0.7    AP@0.8   APsmall   dAP@0.5\n";
  const double base = rows.empty() ? 0.0 : rows.front().report.ap_by_iou.at(0.5);
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::left << std::setw(10) << r.name << mark(r.toggles.str) << ' ' << mark(r.toggles.stc) << ' '
       << mark(r.toggles.sml) << ' ' << mark(r.toggles.fsm) << ' ' << mark(r.toggles.rfe) << std::right;
    for (double t : kApThresholds) os << std::setw(10) << r.report.ap_by_iou.at(t);
    os << std::setw(10) << r.report.ap_small << std::setw(10) << std::showpos << r.report.ap_by_iou.at(0.5) - base
       << std::noshowpos << "\n";
  }
}

}  // namespace cascadet
