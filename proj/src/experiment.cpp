#include "fakeseg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fakeseg/metrics.hpp"
#include "fakeseg/rng.hpp"

namespace fakeseg {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Strict config reading

class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where() + "key '" + key + "' has the wrong type");
    }
  }

  void read_size(const char* key, std::size_t& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number_unsigned()) throw ConfigError(where() + "key '" + key + "' must be a non-negative integer");
    out = it->get<std::size_t>();
  }

  void read_sizes(const char* key, std::vector<std::size_t>& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_array()) throw ConfigError(where() + "key '" + key + "' must be an array");
    out.clear();
    for (const auto& v : *it) {
      if (!v.is_number_unsigned()) throw ConfigError(where() + "key '" + key + "' must hold non-negative integers");
      out.push_back(v.get<std::size_t>());
    }
  }

  void read_double(const char* key, double& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_number()) throw ConfigError(where() + "key '" + key + "' must be a number");
    out = it->get<double>();
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where() + "unknown key '" + key + "'");
    }
  }

 private:
  std::string where() const { return "config" + (path_.empty() ? "" : "." + path_) + ": "; }

  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_synth(const nlohmann::json& j, SynthConfig& s) {
  Section sec(j, "dataset.synth");
  sec.read_size("dim", s.dim);
  sec.read_double("separation", s.separation);
  sec.read_double("temporal_rho", s.temporal_rho);
  sec.read_double("noise_std", s.noise_std);
  sec.read("seed", s.seed);
  sec.finish();
}

void read_dataset(const nlohmann::json& j, DatasetSection& d) {
  Section sec(j, "dataset");
  sec.read("source", d.source);
  std::string mode = d.plan_mode == PlanMode::OneSegment ? "one" : "two";
  sec.read("plan_mode", mode);
  if (mode == "one") {
    d.plan_mode = PlanMode::OneSegment;
  } else if (mode == "two") {
    d.plan_mode = PlanMode::TwoSegments;
  } else {
    throw ConfigError("config.dataset: plan_mode must be \"one\" or \"two\"");
  }
  sec.read("plan_seed", d.plan_seed);
  sec.read_size("train_videos", d.train_videos);
  sec.read_size("val_videos", d.val_videos);
  sec.read_size("test_videos", d.test_videos);
  sec.read_size("pristine_test_videos", d.pristine_test_videos);
  sec.read_size("min_length", d.min_length);
  sec.read_size("max_length", d.max_length);
  sec.read("feature_dir", d.feature_dir);
  if (const auto* s = sec.child("synth")) read_synth(*s, d.synth);
  sec.finish();
}

void read_model(const nlohmann::json& j, TstConfig& m) {
  Section sec(j, "model");
  sec.read_size("num_blocks", m.num_blocks);
  sec.read_size("num_heads", m.num_heads);
  sec.read_size("head_dim", m.head_dim);
  sec.read_size("ff_dim", m.ff_dim);
  sec.read_sizes("mlp_hidden", m.mlp_hidden);
  sec.read_double("dropout", m.dropout);
  sec.read("use_positional", m.use_positional);
  sec.read("use_ssf_head", m.use_ssf_head);
  sec.read("use_ssf_input", m.use_ssf_input);
  sec.finish();
}

void read_train(const nlohmann::json& j, TrainConfig& t) {
  Section sec(j, "train");
  sec.read_size("batch_size", t.batch_size);
  sec.read_double("learning_rate", t.learning_rate);
  sec.read_double("beta1", t.beta1);
  sec.read_double("beta2", t.beta2);
  sec.read_double("epsilon", t.epsilon);
  sec.read_size("patience", t.patience);
  sec.read_size("max_epochs", t.max_epochs);
  sec.read("class_balance", t.class_balance);
  sec.finish();
}

void read_eval(const nlohmann::json& j, EvalSection& e) {
  Section sec(j, "eval");
  sec.read_size("window", e.window);
  sec.read_size("overlap", e.overlap);
  sec.read_double("threshold", e.threshold);
  sec.read_size("k", e.k);
  std::string agg = to_string(e.aggregation);
  sec.read("aggregation", agg);
  try {
    e.aggregation = parse_aggregation(agg);
  } catch (const Error& err) {
    throw ConfigError(std::string("config.eval: ") + err.what());
  }
  sec.read_sizes("segment_lengths", e.segment_lengths);
  sec.read_size("sweep_videos", e.sweep_videos);
  sec.read_double("fps", e.fps);
  if (const auto* g = sec.child("window_grid")) {
    Section gs(*g, "eval.window_grid");
    WindowGrid grid;
    gs.read_sizes("windows", grid.windows);
    gs.read_sizes("overlaps", grid.overlaps);
    gs.finish();
    e.window_grid = grid;
  }
  sec.finish();
}

void validate_config(ExperimentConfig& c) {
  const auto& d = c.dataset;
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (c.workers == 0) fail("workers must be >= 1");
  if (d.source != "synthetic" && d.source != "features") fail("dataset.source must be \"synthetic\" or \"features\"");
  if (d.source == "features" && d.feature_dir.empty()) fail("dataset.feature_dir is required for source \"features\"");
  if (d.source == "synthetic") {
    if (d.train_videos == 0 || d.val_videos == 0 || d.test_videos == 0) {
      fail("dataset needs at least one train, val and test video");
    }
    const std::size_t need = d.plan_mode == PlanMode::OneSegment ? kMinOneSegmentLength : kMinTwoSegmentLength;
    if (d.min_length < need) {
      fail("dataset.min_length must be >= " + std::to_string(need) + " for this plan_mode");
    }
    if (d.max_length < d.min_length) fail("dataset.max_length must be >= min_length");
  }
  try {
    d.synth.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
  const auto& e = c.eval;
  if (e.window == 0 || e.overlap >= e.window) fail("eval needs window >= 1 and overlap < window");
  if (!(e.threshold >= 0.0 && e.threshold <= 1.0)) fail("eval.threshold must lie in [0, 1]");
  if (!(e.fps > 0.0)) fail("eval.fps must be positive");
  for (auto len : e.segment_lengths) {
    if (len == 0) fail("eval.segment_lengths must be positive");
  }
  if (!e.segment_lengths.empty() && e.sweep_videos == 0) fail("eval.sweep_videos must be >= 1");
  if (e.window_grid) {
    if (e.window_grid->windows.empty() || e.window_grid->overlaps.empty()) {
      fail("eval.window_grid needs windows and overlaps");
    }
    for (auto w : e.window_grid->windows) {
      if (w == 0) fail("eval.window_grid.windows must be positive");
    }
  }
  try {
    model_config_for(c, e.window, d.synth.dim).validate();
    c.train.validate();
  } catch (const Error& err) {
    fail(err.what());
  }
}

// ---------------------------------------------------------------------------
// Files

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
  if (!os) throw Error("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string opt_fixed(const std::optional<double>& v) { return v ? fixed(*v) : "n/a"; }

ojson opt_json(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string pad(const std::string& s, std::size_t width, bool right = true) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right ? fill + s : s + fill;
}

// Aligned text table: first column left-aligned, the rest right-aligned.
std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) os << "  ";
      os << pad(r[c], width[c], c != 0);
    }
    os << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  os << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) line(r);
  return os.str();
}

std::string video_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, i);
  return buf;
}

std::size_t draw_length(std::uint64_t seed, const std::string& id, std::size_t lo, std::size_t hi) {
  Pcg32 rng(derive_seed(seed, "length:" + id));
  return lo + rng.below(static_cast<std::uint32_t>(hi - lo + 1));
}

std::vector<FeatureSequence> load_split(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("missing feature directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tfkf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error("no .tfkf files in " + dir.string());
  std::vector<FeatureSequence> out;
  for (const auto& f : files) {
    auto seq = load_sequence(f.string(), f.stem().string());
    if (!seq.labels) throw Error("feature file " + f.string() + " has no label file");
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<PlannedVideo> plans_of(const std::vector<FeatureSequence>& seqs) {
  std::vector<PlannedVideo> out;
  for (const auto& s : seqs) {
    out.push_back({{s.video_id, s.length()}, {s.video_id, segments_of(*s.labels)}});
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section sec(j, "");
  sec.read("name", c.name);
  sec.read("seed", c.seed);
  sec.read_size("workers", c.workers);
  if (const auto* d = sec.child("dataset")) read_dataset(*d, c.dataset);
  if (const auto* m = sec.child("model")) read_model(*m, c.model);
  if (const auto* t = sec.child("train")) read_train(*t, c.train);
  if (const auto* e = sec.child("eval")) read_eval(*e, c.eval);
  sec.finish();
  validate_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_experiment_config(text);
}

std::string experiment_config_to_json(const ExperimentConfig& c) {
  ojson j;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  const auto& d = c.dataset;
  ojson ds;
  ds["source"] = d.source;
  ds["plan_mode"] = d.plan_mode == PlanMode::OneSegment ? "one" : "two";
  ds["plan_seed"] = d.plan_seed;
  ds["train_videos"] = d.train_videos;
  ds["val_videos"] = d.val_videos;
  ds["test_videos"] = d.test_videos;
  ds["pristine_test_videos"] = d.pristine_test_videos;
  ds["min_length"] = d.min_length;
  ds["max_length"] = d.max_length;
  ds["feature_dir"] = d.feature_dir;
  ojson sy;
  sy["dim"] = d.synth.dim;
  sy["separation"] = d.synth.separation;
  sy["temporal_rho"] = d.synth.temporal_rho;
  sy["noise_std"] = d.synth.noise_std;
  sy["seed"] = d.synth.seed;
  ds["synth"] = sy;
  j["dataset"] = ds;
  ojson m;
  m["num_blocks"] = c.model.num_blocks;
  m["num_heads"] = c.model.num_heads;
  m["head_dim"] = c.model.head_dim;
  m["ff_dim"] = c.model.ff_dim;
  m["mlp_hidden"] = c.model.mlp_hidden;
  m["dropout"] = c.model.dropout;
  m["use_positional"] = c.model.use_positional;
  m["use_ssf_head"] = c.model.use_ssf_head;
  m["use_ssf_input"] = c.model.use_ssf_input;
  j["model"] = m;
  ojson t;
  t["batch_size"] = c.train.batch_size;
  t["learning_rate"] = c.train.learning_rate;
  t["beta1"] = c.train.beta1;
  t["beta2"] = c.train.beta2;
  t["epsilon"] = c.train.epsilon;
  t["patience"] = c.train.patience;
  t["max_epochs"] = c.train.max_epochs;
  t["class_balance"] = c.train.class_balance;
  j["train"] = t;
  const auto& e = c.eval;
  ojson ev;
  ev["window"] = e.window;
  ev["overlap"] = e.overlap;
  ev["threshold"] = e.threshold;
  ev["k"] = e.k;
  ev["aggregation"] = to_string(e.aggregation);
  ev["segment_lengths"] = e.segment_lengths;
  ev["sweep_videos"] = e.sweep_videos;
  ev["fps"] = e.fps;
  if (e.window_grid) {
    ojson g;
    g["windows"] = e.window_grid->windows;
    g["overlaps"] = e.window_grid->overlaps;
    ev["window_grid"] = g;
  }
  j["eval"] = ev;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Metrics and reports

VideoMetrics score_video(const std::string& id, const SegmentationMap& truth, const ScoreMap& scores,
                         double threshold, const SmoothConfig& smoothing) {
  if (truth.size() != scores.size()) {
    throw ShapeError("video '" + id + "': " + std::to_string(truth.size()) + " labels but " +
                     std::to_string(scores.size()) + " scores");
  }
  const auto raw = scores.threshold(threshold);
  const auto smoothed = smooth(raw, smoothing);
  VideoMetrics m;
  m.id = id;
  m.frames = truth.size();
  m.fake_ratio = truth.fake_ratio();
  m.iou_raw = iou(truth, raw);
  m.iou_smoothed = iou(truth, smoothed);
  m.accuracy_raw = frame_accuracy(truth, raw);
  m.accuracy_smoothed = frame_accuracy(truth, smoothed);
  m.predicted_fake_ratio = raw.fake_ratio();
  const auto fakes = truth.count_fake();
  if (fakes > 0 && fakes < truth.size()) m.auc = frame_auc(truth, scores);
  m.video_score = video_score(scores);
  m.video_truth = fakes > 0 ? FrameLabel::Fake : FrameLabel::Real;
  return m;
}

Aggregates aggregate_rows(const std::vector<VideoMetrics>& rows, double threshold) {
  Aggregates a;
  if (rows.empty()) return a;
  const auto n = static_cast<double>(rows.size());
  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  std::size_t video_correct = 0;
  std::vector<FrameLabel> vt;
  std::vector<double> vs;
  for (const auto& r : rows) {
    a.iou_raw += r.iou_raw;
    a.iou_smoothed += r.iou_smoothed;
    a.accuracy_raw += r.accuracy_raw;
    a.accuracy_smoothed += r.accuracy_smoothed;
    if (r.auc) {
      auc_sum += *r.auc;
      ++auc_n;
    }
    const auto predicted = r.video_score >= threshold ? FrameLabel::Fake : FrameLabel::Real;
    video_correct += predicted == r.video_truth;
    vt.push_back(r.video_truth);
    vs.push_back(r.video_score);
    a.random_baseline_iou += expected_iou_baseline({1.0 - r.fake_ratio, 0.5});
    a.matched_baseline_iou += expected_iou_baseline({1.0 - r.fake_ratio, 1.0 - r.predicted_fake_ratio});
  }
  a.iou_raw /= n;
  a.iou_smoothed /= n;
  a.accuracy_raw /= n;
  a.accuracy_smoothed /= n;
  a.random_baseline_iou /= n;
  a.matched_baseline_iou /= n;
  if (auc_n) a.auc = auc_sum / static_cast<double>(auc_n);
  a.video_accuracy = static_cast<double>(video_correct) / n;
  const auto vf = static_cast<std::size_t>(std::count(vt.begin(), vt.end(), FrameLabel::Fake));
  if (vf > 0 && vf < vt.size()) a.video_auc = binary_auc(vt, vs);
  return a;
}

std::string report_to_json(const EvalReport& r) {
  ojson j;
  j["name"] = r.name;
  j["seed"] = r.seed;
  j["fps"] = r.fps;
  auto vids = ojson::array();
  for (const auto& v : r.videos) {
    ojson o;
    o["id"] = v.id;
    o["frames"] = v.frames;
    o["fake_ratio"] = v.fake_ratio;
    o["iou_raw"] = v.iou_raw;
    o["iou_smoothed"] = v.iou_smoothed;
    o["accuracy_raw"] = v.accuracy_raw;
    o["accuracy_smoothed"] = v.accuracy_smoothed;
    o["predicted_fake_ratio"] = v.predicted_fake_ratio;
    o["auc"] = opt_json(v.auc);
    o["video_score"] = v.video_score;
    o["video_label"] = std::string(1, to_char(v.video_truth));
    vids.push_back(o);
  }
  j["videos"] = vids;
  const auto& a = r.aggregate;
  ojson ag;
  ag["iou_raw"] = a.iou_raw;
  ag["iou_smoothed"] = a.iou_smoothed;
  ag["accuracy_raw"] = a.accuracy_raw;
  ag["accuracy_smoothed"] = a.accuracy_smoothed;
  ag["auc"] = opt_json(a.auc);
  ag["video_auc"] = opt_json(a.video_auc);
  ag["video_accuracy"] = a.video_accuracy;
  ag["random_baseline_iou"] = a.random_baseline_iou;
  ag["matched_baseline_iou"] = a.matched_baseline_iou;
  j["aggregate"] = ag;
  auto ls = ojson::array();
  for (const auto& row : r.length_sweep) {
    ls.push_back(ojson{{"length", row.length}, {"seconds", row.seconds}, {"iou", row.iou}, {"auc", row.auc}});
  }
  j["length_sweep"] = ls;
  auto wg = ojson::array();
  for (const auto& c : r.window_grid) {
    ojson o{{"window", c.window}, {"overlap", c.overlap}, {"valid", c.valid}};
    if (c.valid) {
      o["iou"] = c.iou;
      o["iou_smoothed"] = c.iou_smoothed;
      o["auc"] = c.auc;
    }
    wg.push_back(o);
  }
  j["window_grid"] = wg;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.name = j.at("name").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.fps = j.at("fps").get<double>();
    for (const auto& o : j.at("videos")) {
      VideoMetrics v;
      v.id = o.at("id").get<std::string>();
      v.frames = o.at("frames").get<std::size_t>();
      v.fake_ratio = o.at("fake_ratio").get<double>();
      v.iou_raw = o.at("iou_raw").get<double>();
      v.iou_smoothed = o.at("iou_smoothed").get<double>();
      v.accuracy_raw = o.at("accuracy_raw").get<double>();
      v.accuracy_smoothed = o.at("accuracy_smoothed").get<double>();
      v.predicted_fake_ratio = o.at("predicted_fake_ratio").get<double>();
      v.auc = opt_from(o.at("auc"));
      v.video_score = o.at("video_score").get<double>();
      v.video_truth = o.at("video_label").get<std::string>() == "F" ? FrameLabel::Fake : FrameLabel::Real;
      r.videos.push_back(v);
    }
    const auto& ag = j.at("aggregate");
    auto& a = r.aggregate;
    a.iou_raw = ag.at("iou_raw").get<double>();
    a.iou_smoothed = ag.at("iou_smoothed").get<double>();
    a.accuracy_raw = ag.at("accuracy_raw").get<double>();
    a.accuracy_smoothed = ag.at("accuracy_smoothed").get<double>();
    a.auc = opt_from(ag.at("auc"));
    a.video_auc = opt_from(ag.at("video_auc"));
    a.video_accuracy = ag.at("video_accuracy").get<double>();
    a.random_baseline_iou = ag.at("random_baseline_iou").get<double>();
    a.matched_baseline_iou = ag.at("matched_baseline_iou").get<double>();
    for (const auto& o : j.at("length_sweep")) {
      r.length_sweep.push_back({o.at("length").get<std::size_t>(), o.at("seconds").get<double>(),
                                o.at("iou").get<double>(), o.at("auc").get<double>()});
    }
    for (const auto& o : j.at("window_grid")) {
      WindowGridCell c;
      c.window = o.at("window").get<std::size_t>();
      c.overlap = o.at("overlap").get<std::size_t>();
      c.valid = o.at("valid").get<bool>();
      if (c.valid) {
        c.iou = o.at("iou").get<double>();
        c.iou_smoothed = o.at("iou_smoothed").get<double>();
        c.auc = o.at("auc").get<double>();
      }
      r.window_grid.push_back(c);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report: ") + e.what());
  }
  return r;
}

std::string report_to_text(const EvalReport& r) {
  std::ostringstream os;
  const auto& a = r.aggregate;
  os << "Experiment " << r.name << " (seed " << r.seed << ", " << r.videos.size() << " test videos)\n\n";
  os << "Frame-level\n";
  os << table({"", "IoU", "AUC", "Accuracy"},
              {{"raw", fixed(a.iou_raw), opt_fixed(a.auc), fixed(a.accuracy_raw)},
               {"smoothed", fixed(a.iou_smoothed), opt_fixed(a.auc), fixed(a.accuracy_smoothed)}});
  os << "\nVideo-level (mean frame score)\n";
  os << table({"", "AUC", "Accuracy"}, {{"video", opt_fixed(a.video_auc), fixed(a.video_accuracy)}});
  os << "\nRandom-guess IoU: " << fixed(a.random_baseline_iou) << " at p = 0.5, "
     << fixed(a.matched_baseline_iou) << " at the model's predicted Real rate\n";

  os << "\nPer video\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& v : r.videos) {
    rows.push_back({v.id, std::to_string(v.frames), fixed(v.fake_ratio, 3), fixed(v.iou_raw),
                    fixed(v.iou_smoothed), opt_fixed(v.auc), fixed(v.accuracy_raw), fixed(v.accuracy_smoothed),
                    fixed(v.video_score), std::string(1, to_char(v.video_truth))});
  }
  os << table({"video", "frames", "fake", "IoU raw", "IoU smooth", "AUC", "acc raw", "acc smooth", "score",
               "label"},
              rows);

  if (!r.length_sweep.empty()) {
    os << "\nSegment length sweep (no smoothing; seconds at " << fixed(r.fps, 0) << " fps)\n";
    std::vector<std::vector<std::string>> lr;
    for (const auto& row : r.length_sweep) {
      lr.push_back({std::to_string(row.length), fixed(row.seconds, 2), fixed(row.iou), fixed(row.auc)});
    }
    os << table({"frames", "seconds", "IoU", "AUC"}, lr);
  }
  if (!r.window_grid.empty()) {
    os << "\nWindow grid (* marks the default W = 5, overlap = 4)\n";
    std::vector<std::vector<std::string>> gr;
    for (const auto& c : r.window_grid) {
      const std::string mark = c.window == 5 && c.overlap == 4 ? "*" : "";
      if (c.valid) {
        gr.push_back({std::to_string(c.window) + mark, std::to_string(c.overlap), fixed(c.iou),
                      fixed(c.iou_smoothed), fixed(c.auc)});
      } else {
        gr.push_back({std::to_string(c.window) + mark, std::to_string(c.overlap), "skipped", "skipped",
                      "skipped"});
      }
    }
    os << table({"W", "overlap", "IoU raw", "IoU smooth", "AUC"}, gr);
  }
  return os.str();
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "video,frames,fake_ratio,iou_raw,iou_smoothed,auc,accuracy_raw,accuracy_smoothed,"
        "predicted_fake_ratio,video_score,video_label\n";
  for (const auto& v : r.videos) {
    os << v.id << ',' << v.frames << ',' << v.fake_ratio << ',' << v.iou_raw << ',' << v.iou_smoothed << ',';
    if (v.auc) os << *v.auc;
    os << ',' << v.accuracy_raw << ',' << v.accuracy_smoothed << ',' << v.predicted_fake_ratio << ','
       << v.video_score << ',' << to_char(v.video_truth) << '\n';
  }
  return os.str();
}

std::string length_sweep_to_csv(const std::vector<LengthSweepRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17) << "length_frames,seconds,iou,auc\n";
  for (const auto& r : rows) os << r.length << ',' << r.seconds << ',' << r.iou << ',' << r.auc << '\n';
  return os.str();
}

std::string window_grid_to_csv(const std::vector<WindowGridCell>& cells) {
  std::ostringstream os;
  os << std::setprecision(17) << "window,overlap,valid,iou,iou_smoothed,auc\n";
  for (const auto& c : cells) {
    os << c.window << ',' << c.overlap << ',' << (c.valid ? 1 : 0) << ',';
    if (c.valid) os << c.iou << ',' << c.iou_smoothed << ',' << c.auc;
    else os << ",,";
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Scores

void write_scores(const std::string& path, const ScoreMap& scores) {
  std::ostringstream os;
  char buf[32];
  for (double s : scores) {
    std::snprintf(buf, sizeof buf, "%.17g\n", s);
    os << buf;
  }
  write_text(path, os.str());
}

ScoreMap read_scores(const std::string& path) {
  std::istringstream is(read_text(path));
  std::vector<double> v;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(line, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != line.size()) throw FormatError("score file " + path + ": bad line '" + line + "'");
    v.push_back(x);
  }
  return ScoreMap(std::move(v));
}

// ---------------------------------------------------------------------------
// Pipeline pieces

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

ExperimentData build_dataset(const ExperimentConfig& cfg) {
  ExperimentData data;
  const auto& d = cfg.dataset;
  if (d.source == "features") {
    const fs::path root(d.feature_dir);
    data.train = load_split(root / "train");
    data.val = load_split(root / "val");
    data.test = load_split(root / "test");
    data.train_plans = plans_of(data.train);
    data.val_plans = plans_of(data.val);
    data.test_plans = plans_of(data.test);
    return data;
  }
  auto make_plans = [&](const char* prefix, std::size_t n, bool pristine) {
    std::vector<PlannedVideo> out;
    for (std::size_t i = 0; i < n; ++i) {
      VideoSpec v{video_name(prefix, i), 0};
      v.length_frames = draw_length(d.plan_seed, v.id, d.min_length, d.max_length);
      SegmentPlan p = pristine ? SegmentPlan{v.id, {}} : plan_video(v, d.plan_mode, d.plan_seed);
      out.push_back({v, p});
    }
    return out;
  };
  data.train_plans = make_plans("train", d.train_videos, false);
  data.val_plans = make_plans("val", d.val_videos, false);
  data.test_plans = make_plans("test", d.test_videos, false);
  const auto pristine = make_plans("pristine", d.pristine_test_videos, true);
  data.test_plans.insert(data.test_plans.end(), pristine.begin(), pristine.end());

  auto synth_split = [&](const std::vector<PlannedVideo>& plans) {
    std::vector<FeatureSequence> out(plans.size());
    parallel_for(plans.size(), cfg.workers, [&](std::size_t i) {
      out[i] = synth_video(plans[i].plan, plans[i].video.length_frames, d.synth);
    });
    return out;
  };
  data.train = synth_split(data.train_plans);
  data.val = synth_split(data.val_plans);
  data.test = synth_split(data.test_plans);
  return data;
}

TstConfig model_config_for(const ExperimentConfig& cfg, std::size_t window, std::size_t dim) {
  TstConfig m = cfg.model;
  m.window = window;
  m.input_dim = dim;
  return m;
}

LabeledWindows pool_windows(const std::vector<FeatureSequence>& videos, const WindowSpec& spec) {
  LabeledWindows set;
  for (const auto& v : videos) set.append(make_windows(v, spec));
  return set;
}

TrainResult train_on(const ExperimentConfig& cfg, const ExperimentData& data, const WindowSpec& spec) {
  if (data.train.empty()) throw DomainError("train: no training videos");
  const std::size_t dim = data.train.front().dim();
  const std::string tag = "W" + std::to_string(spec.size) + "o" + std::to_string(spec.overlap);
  const TstModel<float> init(model_config_for(cfg, spec.size, dim), derive_seed(cfg.seed, "init:" + tag));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, "train:" + tag);
  return train(init, pool_windows(data.train, spec), pool_windows(data.val, spec), tc);
}

namespace {

std::vector<ScoreMap> predict_all(const TstModel<float>& model, const std::vector<FeatureSequence>& videos,
                                  const WindowSpec& spec, FrameAggregation agg, std::size_t workers) {
  std::vector<ScoreMap> out(videos.size());
  parallel_for(videos.size(), workers, [&](std::size_t i) { out[i] = predict_video(model, videos[i], spec, agg); });
  return out;
}

}  // namespace

std::vector<LengthSweepRow> sweep_segment_lengths(const TstModel<float>& model,
                                                  const std::vector<std::size_t>& lengths,
                                                  const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  const std::size_t n = cfg.eval.sweep_videos;
  if (n == 0) throw DomainError("sweep_segment_lengths: sweep_videos must be >= 1");
  std::vector<std::size_t> video_len(n);
  std::vector<double> start_frac(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = video_name("sweep", i);
    video_len[i] = draw_length(cfg.seed, id, std::max(d.min_length, cfg.eval.window), std::max(d.max_length, d.min_length));
    start_frac[i] = Pcg32(derive_seed(cfg.seed, "start:" + id)).uniform();
  }
  for (auto len : lengths) {
    if (len == 0) throw DomainError("sweep_segment_lengths: segment length must be positive");
    for (std::size_t i = 0; i < n; ++i) {
      if (len >= video_len[i]) {
        throw DomainError("sweep_segment_lengths: segment of " + std::to_string(len) +
                          " frames does not fit a video of " + std::to_string(video_len[i]) +
                          " frames with real frames left over");
      }
    }
  }
  std::vector<LengthSweepRow> rows;
  for (auto len : lengths) {
    std::vector<double> ious(n), aucs(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      const auto id = video_name("sweep", i);
      const std::size_t t = video_len[i];
      const auto start = std::min(static_cast<std::size_t>(start_frac[i] * static_cast<double>(t / 2)), t - len);
      const SegmentPlan plan{id, {{start, len}}};
      const auto seq = synth_video(plan, t, d.synth);
      const auto scores = predict_video(model, seq, cfg.eval.window_spec(), cfg.eval.aggregation);
      ious[i] = iou(*seq.labels, scores.threshold(cfg.eval.threshold));
      aucs[i] = frame_auc(*seq.labels, scores);
    });
    LengthSweepRow row;
    row.length = len;
    row.seconds = static_cast<double>(len) / cfg.eval.fps;
    for (std::size_t i = 0; i < n; ++i) {
      row.iou += ious[i];
      row.auc += aucs[i];
    }
    row.iou /= static_cast<double>(n);
    row.auc /= static_cast<double>(n);
    rows.push_back(row);
  }
  return rows;
}

std::vector<WindowGridCell> sweep_window_grid(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const std::vector<std::size_t>& windows,
                                              const std::vector<std::size_t>& overlaps) {
  std::vector<WindowGridCell> cells;
  for (auto w : windows) {
    for (auto o : overlaps) {
      WindowGridCell c;
      c.window = w;
      c.overlap = o;
      c.valid = w > 0 && o < w;
      if (c.valid) {
        const WindowSpec spec{w, o};
        const auto trained = train_on(cfg, data, spec);
        const auto scores = predict_all(trained.model, data.test, spec, cfg.eval.aggregation, cfg.workers);
        std::vector<VideoMetrics> rows;
        for (std::size_t i = 0; i < data.test.size(); ++i) {
          rows.push_back(score_video(data.test[i].video_id, *data.test[i].labels, scores[i], cfg.eval.threshold,
                                     {cfg.eval.k}));
        }
        const auto a = aggregate_rows(rows, cfg.eval.threshold);
        c.iou = a.iou_raw;
        c.iou_smoothed = a.iou_smoothed;
        c.auc = a.auc.value_or(0.5);
      }
      cells.push_back(c);
    }
  }
  return cells;
}

EvalReport run_experiment(const ExperimentConfig& cfg, const std::string& run_dir) {
  const fs::path root(run_dir);
  run_stage("setup", [&] {
    fs::create_directories(root);
    write_text(root / "config.json", experiment_config_to_json(cfg));
    ojson manifest;
    manifest["fakeseg_version"] = kVersion;
    manifest["feature_format"] = kFeatureFileVersion;
    manifest["checkpoint_format"] = 1;
    manifest["seed"] = cfg.seed;
    write_text(root / "manifest.json", manifest.dump(2) + "\n");
  });

  const auto data = run_stage(cfg.dataset.source == "features" ? "ingest" : "synth", [&] {
    auto d = build_dataset(cfg);
    const std::pair<const char*, const std::vector<PlannedVideo>*> plan_sets[] = {
        {"train", &d.train_plans}, {"val", &d.val_plans}, {"test", &d.test_plans}};
    for (const auto& [split, plans] : plan_sets) {
      fs::create_directories(root / "plans");
      write_plan_file((root / "plans" / (std::string(split) + ".jsonl")).string(), *plans);
    }
    const std::pair<const char*, const std::vector<FeatureSequence>*> seq_sets[] = {
        {"train", &d.train}, {"val", &d.val}, {"test", &d.test}};
    for (const auto& [split, seqs] : seq_sets) {
      const auto dir = root / "features" / split;
      fs::create_directories(dir);
      for (const auto& s : *seqs) save_sequence((dir / (s.video_id + ".tfkf")).string(), s);
    }
    return d;
  });

  const auto trained = run_stage("train", [&] {
    auto t = train_on(cfg, data, cfg.eval.window_spec());
    save_checkpoint((root / "model.tfkm").string(), t.model);
    write_text(root / "history.json", t.history.to_json() + "\n");
    return t;
  });

  const auto scores = run_stage("predict", [&] {
    auto s = predict_all(trained.model, data.test, cfg.eval.window_spec(), cfg.eval.aggregation, cfg.workers);
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto base = root / "predictions" / data.test[i].video_id;
      write_scores(base.string() + ".scores", s[i]);
      save_segmap(base.string() + ".raw.labels", s[i].threshold(cfg.eval.threshold));
    }
    return s;
  });

  run_stage("smooth", [&] {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto base = root / "predictions" / data.test[i].video_id;
      save_segmap(base.string() + ".smooth.labels", smooth_scores(scores[i], cfg.eval.threshold, {cfg.eval.k}));
    }
  });

  EvalReport report = run_stage("evaluate", [&] {
    EvalReport r;
    r.name = cfg.name;
    r.seed = cfg.seed;
    r.fps = cfg.eval.fps;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      r.videos.push_back(score_video(data.test[i].video_id, *data.test[i].labels, scores[i], cfg.eval.threshold,
                                     {cfg.eval.k}));
    }
    r.aggregate = aggregate_rows(r.videos, cfg.eval.threshold);
    return r;
  });

  if (!cfg.eval.segment_lengths.empty()) {
    report.length_sweep = run_stage("sweep-lengths", [&] {
      auto rows = sweep_segment_lengths(trained.model, cfg.eval.segment_lengths, cfg);
      write_text(root / "length_sweep.csv", length_sweep_to_csv(rows));
      return rows;
    });
  }
  if (cfg.eval.window_grid) {
    report.window_grid = run_stage("sweep-window", [&] {
      auto cells = sweep_window_grid(cfg, data, cfg.eval.window_grid->windows, cfg.eval.window_grid->overlaps);
      write_text(root / "window_grid.csv", window_grid_to_csv(cells));
      return cells;
    });
  }

  run_stage("report", [&] {
    write_text(root / "report.json", report_to_json(report));
    write_text(root / "report.txt", report_to_text(report));
    write_text(root / "report.csv", report_to_csv(report));
  });
  return report;
}

EvalReport recompute_report(const std::string& run_dir) {
  const fs::path root(run_dir);
  const auto cfg = load_experiment_config((root / "config.json").string());
  EvalReport r = report_from_json(read_text(root / "report.json"));
  r.videos.clear();
  for (const auto& pv : read_plan_file((root / "plans" / "test.jsonl").string())) {
    const auto& id = pv.video.id;
    const auto truth = load_segmap((root / "features" / "test" / (id + ".labels")).string());
    const auto scores = read_scores((root / "predictions" / (id + ".scores")).string());
    r.videos.push_back(score_video(id, truth, scores, cfg.eval.threshold, {cfg.eval.k}));
  }
  r.aggregate = aggregate_rows(r.videos, cfg.eval.threshold);
  return r;
}

}  // namespace fakeseg
