// fakeseg command line: one subcommand per pipeline stage plus a full run.
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fakeseg/experiment.hpp"
#include "fakeseg/metrics.hpp"

namespace fs = std::filesystem;
using namespace fakeseg;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kStageError = 3;

// Relative run directories resolve against $FAKESEG_RUN_ROOT when it is set.
std::string resolve_run_dir(const std::string& dir) {
  const fs::path p(dir);
  if (p.is_absolute()) return dir;
  if (const char* root = std::getenv("FAKESEG_RUN_ROOT"); root && *root) return (fs::path(root) / p).string();
  return dir;
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  os << text;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// Either a score file (one probability per line) or a label file.
bool looks_like_scores(const std::string& path) { return fs::path(path).extension() == ".scores"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal deepfake segmentation toolkit"};
  app.require_subcommand(1);

  // plan
  auto* plan = app.add_subcommand("plan", "Draw fake-segment plans for a video list");
  std::string plan_mode = "one", videos_path, plan_out, stats_out;
  std::uint64_t plan_seed = 1;
  plan->add_option("--mode", plan_mode, "one or two segments")->check(CLI::IsMember({"one", "two"}));
  plan->add_option("--seed", plan_seed, "plan seed");
  plan->add_option("--videos", videos_path, "JSON lines with id and length")->required();
  plan->add_option("--out", plan_out, "plan file (JSON lines)")->required();
  plan->add_option("--stats", stats_out, "write dataset statistics JSON here");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic features for a plan file");
  std::string synth_plans, synth_dir;
  SynthConfig synth_cfg;
  synth->add_option("--plans", synth_plans, "plan file")->required();
  synth->add_option("--out-dir", synth_dir, "output directory")->required();
  synth->add_option("--dim", synth_cfg.dim);
  synth->add_option("--separation", synth_cfg.separation);
  synth->add_option("--rho", synth_cfg.temporal_rho);
  synth->add_option("--noise", synth_cfg.noise_std);
  synth->add_option("--seed", synth_cfg.seed);

  // train
  auto* trn = app.add_subcommand("train", "Train a model on feature directories");
  std::string train_cfg_path, train_dir, val_dir, model_out, history_out;
  trn->add_option("--config", train_cfg_path, "experiment config (model, train, eval sections)")->required();
  trn->add_option("--train-dir", train_dir)->required();
  trn->add_option("--val-dir", val_dir)->required();
  trn->add_option("--out", model_out, "checkpoint path")->required();
  trn->add_option("--history", history_out, "training history JSON");

  // predict
  auto* pred = app.add_subcommand("predict", "Frame scores for one feature file");
  std::string pred_model, pred_features, pred_out, pred_map, pred_agg = "mean";
  std::size_t pred_overlap = 4;
  double pred_threshold = 0.5;
  pred->add_option("--model", pred_model)->required();
  pred->add_option("--features", pred_features)->required();
  pred->add_option("--out", pred_out, "score file")->required();
  pred->add_option("--overlap", pred_overlap);
  pred->add_option("--aggregation", pred_agg)->check(CLI::IsMember({"mean", "max", "center"}));
  pred->add_option("--threshold", pred_threshold);
  pred->add_option("--map-out", pred_map, "also write the thresholded label map");

  // smooth
  auto* smt = app.add_subcommand("smooth", "Majority-vote smoothing of a label map or score file");
  std::string smooth_in, smooth_out;
  std::size_t smooth_k = 7;
  double smooth_threshold = 0.5;
  smt->add_option("--in", smooth_in, "label map, or .scores file")->required();
  smt->add_option("--out", smooth_out, "smoothed label map")->required();
  smt->add_option("--k", smooth_k);
  smt->add_option("--threshold", smooth_threshold);

  // eval
  auto* ev = app.add_subcommand("eval", "Frame metrics of a prediction against ground truth");
  std::string eval_gt, eval_pred, eval_scores;
  double eval_threshold = 0.5;
  ev->add_option("--gt", eval_gt, "ground-truth label map")->required();
  ev->add_option("--pred", eval_pred, "predicted label map, or .scores file");
  ev->add_option("--scores", eval_scores, "score file for AUC");
  ev->add_option("--threshold", eval_threshold);

  // run
  auto* run = app.add_subcommand("run", "Run the whole pipeline from a config");
  std::string run_cfg, run_dir;
  run->add_option("--config", run_cfg)->required();
  run->add_option("--run-dir", run_dir, "output directory (default: runs/<name>)");

  // sweep-lengths
  auto* swl = app.add_subcommand("sweep-lengths", "IoU/AUC against injected segment length");
  std::string swl_cfg, swl_model, swl_out;
  std::vector<std::size_t> swl_lengths;
  swl->add_option("--config", swl_cfg)->required();
  swl->add_option("--model", swl_model)->required();
  swl->add_option("--lengths", swl_lengths, "frame counts (default: eval.segment_lengths)");
  swl->add_option("--out", swl_out, "CSV output");

  // sweep-window
  auto* sww = app.add_subcommand("sweep-window", "Train and score one model per window geometry");
  std::string sww_cfg, sww_out;
  std::vector<std::size_t> sww_windows, sww_overlaps;
  sww->add_option("--config", sww_cfg)->required();
  sww->add_option("--windows", sww_windows);
  sww->add_option("--overlaps", sww_overlaps);
  sww->add_option("--out", sww_out, "CSV output");

  // report
  auto* rep = app.add_subcommand("report", "Recompute and print the report of a run directory");
  std::string rep_dir;
  bool rep_check = false;
  rep->add_option("--run-dir", rep_dir)->required();
  rep->add_flag("--check", rep_check, "fail unless the stored report matches the recomputation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  // Config problems map to exit code 2; everything after loading is a stage failure.
  auto load_cfg = [](const std::string& path) { return load_experiment_config(path); };

  try {
    if (plan->parsed()) {
      const auto mode = plan_mode == "one" ? PlanMode::OneSegment : PlanMode::TwoSegments;
      std::vector<VideoSpec> videos;
      try {
        videos = read_video_list(videos_path);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      std::vector<PlannedVideo> out;
      std::vector<SegmentPlan> plans;
      for (const auto& v : videos) {
        out.push_back({v, plan_video(v, mode, plan_seed)});
        plans.push_back(out.back().plan);
      }
      write_plan_file(plan_out, out);
      const auto stats = stats_to_json(dataset_stats(plans, videos));
      if (!stats_out.empty()) write_file(stats_out, stats + "\n");
      std::cout << stats << '\n';
    } else if (synth->parsed()) {
      try {
        synth_cfg.validate();
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      const auto plans = read_plan_file(synth_plans);
      fs::create_directories(synth_dir);
      for (const auto& pv : plans) {
        const auto seq = synth_video(pv.plan, pv.video.length_frames, synth_cfg);
        save_sequence((fs::path(synth_dir) / (pv.video.id + ".tfkf")).string(), seq);
      }
      std::cout << "wrote " << plans.size() << " videos to " << synth_dir << '\n';
    } else if (trn->parsed()) {
      const auto cfg = load_cfg(train_cfg_path);
      ExperimentData data;
      auto load_dir = [](const std::string& dir) {
        std::vector<FeatureSequence> out;
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
          if (e.path().extension() == ".tfkf") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(load_sequence(f.string(), f.stem().string()));
        return out;
      };
      data.train = load_dir(train_dir);
      data.val = load_dir(val_dir);
      auto result = train_on(cfg, data, cfg.eval.window_spec());
      save_checkpoint(model_out, result.model);
      if (!history_out.empty()) write_file(history_out, result.history.to_json() + "\n");
      const auto& best = result.history.epochs.at(result.history.best_epoch - 1);
      std::cout << "best epoch " << result.history.best_epoch << " of " << result.history.epochs.size()
                << ", val loss " << best.val_loss << ", val accuracy " << best.val_accuracy << '\n';
    } else if (pred->parsed()) {
      const auto model = load_checkpoint(pred_model);
      const auto seq = load_sequence(pred_features, stem_of(pred_features));
      const WindowSpec spec{model.config().window, pred_overlap};
      if (spec.overlap >= spec.size) throw ConfigError("--overlap must be smaller than the model window");
      const auto scores = predict_video(model, seq, spec, parse_aggregation(pred_agg));
      write_scores(pred_out, scores);
      if (!pred_map.empty()) save_segmap(pred_map, scores.threshold(pred_threshold));
      std::cout << "video score " << video_score(scores) << '\n';
    } else if (smt->parsed()) {
      const auto smoothed = looks_like_scores(smooth_in)
                                ? smooth_scores(read_scores(smooth_in), smooth_threshold, {smooth_k})
                                : smooth(load_segmap(smooth_in), {smooth_k});
      save_segmap(smooth_out, smoothed);
    } else if (ev->parsed()) {
      const auto gt = load_segmap(eval_gt);
      nlohmann::ordered_json j;
      if (!eval_pred.empty()) {
        const auto p = looks_like_scores(eval_pred) ? read_scores(eval_pred).threshold(eval_threshold)
                                                    : load_segmap(eval_pred);
        j["iou"] = iou(gt, p);
        j["accuracy"] = frame_accuracy(gt, p);
      }
      const std::string sp = !eval_scores.empty() ? eval_scores : (looks_like_scores(eval_pred) ? eval_pred : "");
      if (!sp.empty()) {
        const auto s = read_scores(sp);
        const auto fakes = gt.count_fake();
        j["auc"] = fakes > 0 && fakes < gt.size() ? nlohmann::ordered_json(frame_auc(gt, s)) : nullptr;
        j["video_score"] = video_score(s);
      }
      j["random_baseline_iou"] = expected_iou_baseline({gt.real_ratio(), 0.5});
      std::cout << j.dump(2) << '\n';
    } else if (run->parsed()) {
      const auto cfg = load_cfg(run_cfg);
      const auto dir = resolve_run_dir(run_dir.empty() ? "runs/" + cfg.name : run_dir);
      const auto report = run_experiment(cfg, dir);
      std::cout << report_to_text(report) << "\nartifacts in " << dir << '\n';
    } else if (swl->parsed()) {
      const auto cfg = load_cfg(swl_cfg);
      const auto lengths = swl_lengths.empty() ? cfg.eval.segment_lengths : swl_lengths;
      if (lengths.empty()) throw ConfigError("no segment lengths given");
      const auto rows = sweep_segment_lengths(load_checkpoint(swl_model), lengths, cfg);
      if (!swl_out.empty()) write_file(swl_out, length_sweep_to_csv(rows));
      std::cout << length_sweep_to_csv(rows);
    } else if (sww->parsed()) {
      const auto cfg = load_cfg(sww_cfg);
      auto windows = sww_windows, overlaps = sww_overlaps;
      if (windows.empty() && cfg.eval.window_grid) windows = cfg.eval.window_grid->windows;
      if (overlaps.empty() && cfg.eval.window_grid) overlaps = cfg.eval.window_grid->overlaps;
      if (windows.empty() || overlaps.empty()) throw ConfigError("no window grid given");
      const auto data = build_dataset(cfg);
      const auto cells = sweep_window_grid(cfg, data, windows, overlaps);
      if (!sww_out.empty()) write_file(sww_out, window_grid_to_csv(cells));
      std::cout << window_grid_to_csv(cells);
    } else if (rep->parsed()) {
      const auto dir = resolve_run_dir(rep_dir);
      const auto recomputed = recompute_report(dir);
      std::cout << report_to_text(recomputed);
      if (rep_check) {
        const auto stored = report_from_json(read_file((fs::path(dir) / "report.json").string()));
        if (!(stored.videos == recomputed.videos && stored.aggregate == recomputed.aggregate)) {
          std::cerr << "report.json does not match the persisted predictions\n";
          return kStageError;
        }
        std::cout << "\nreport.json matches the persisted predictions\n";
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const StageError& e) {
    std::cerr << e.what() << '\n';
    return kStageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kStageError;
  }
  return kOk;
}
