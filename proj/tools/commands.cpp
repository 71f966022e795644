#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "pqi/augment.hpp"
#include "pqi/csv.hpp"
#include "pqi/detection.hpp"
#include "pqi/error.hpp"
#include "pqi/image_io.hpp"
#include "pqi/metrics.hpp"
#include "pqi/parallel.hpp"
#include "pqi/plot.hpp"
#include "pqi/pqi.hpp"
#include "pqi/saliency.hpp"
#include "pqi/spanet.hpp"

namespace pqi::cli {
namespace {

namespace fs = std::filesystem;

std::string default_levels_text() {
  std::string text;
  for (const double l : default_sweep_levels()) {
    text += (text.empty() ? "" : ",") + format_number(l);
  }
  return text;
}

struct Options {
  std::string config;
  std::string out;
  unsigned threads = default_parallelism();

  std::string images;
  std::string detections;
  std::string scores;
  std::string predictions;
  std::string targets;
  std::string val_targets;
  std::string model;

  int sigma = 1;
  std::string scales = "0,1,2,3,4,5";
  double conf_threshold = kDefaultConfidenceThreshold;
  std::string export_saliency = "none";

  std::string kind = "all";
  std::string levels = default_levels_text();

  std::string column = "pqi";
  double bucket_width = 1.0;
  std::string std_kind = "population";

  std::string pred_column = "pqi_pred";
  std::string target_column = "pqi";

  std::string scale = "full";
  std::string variant = "full";
  int superpixel_k = -1;
  int epochs = 50;
  double lr_max = 2e-5;
  double lr_min = 1e-6;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double compactness = 10.0;
  int slic_iterations = 10;
};

// ---- small helpers --------------------------------------------------------

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) {
      return parts;
    }
    start = pos + 1;
  }
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> values;
  for (const auto& part : split(text, ',')) {
    T v{};
    const auto res = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || res.ec != std::errc{} || res.ptr != part.data() + part.size()) {
      throw InvalidArgument(std::string(flag) + ": cannot parse '" + part + "'");
    }
    values.push_back(v);
  }
  return values;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += (i ? sep : "") + items[i];
  }
  return out;
}

struct Warnings {
  std::size_t count = 0;
  void add(const std::string& msg) {
    ++count;
    std::cerr << "warning: " << msg << '\n';
  }
};

struct ImageRef {
  std::string id;
  fs::path path;
};

std::vector<ImageRef> scan_images(const std::string& dir) {
  std::vector<ImageRef> refs;
  for (const auto& p : list_images(dir)) {
    refs.push_back({p.stem().string(), p});
  }
  std::ranges::sort(refs, {}, &ImageRef::id);
  for (std::size_t i = 1; i < refs.size(); ++i) {
    if (refs[i].id == refs[i - 1].id) {
      throw DataError("duplicate image id '" + refs[i].id + "': " + refs[i - 1].path.string() + ", " +
                      refs[i].path.string());
    }
  }
  return refs;
}

std::vector<RgbImage> read_images(const std::vector<ImageRef>& refs, unsigned threads) {
  std::vector<RgbImage> images(refs.size());
  parallel_for(refs.size(), threads, [&](std::size_t i) {
    try {
      images[i] = read_image(refs[i].path);
    } catch (const DataError& e) {
      throw DataError(refs[i].path.string() + ": " + e.what());
    }
  });
  return images;
}

SaliencyParams saliency_params(const Options& o) {
  SaliencyParams p;
  p.sigma = o.sigma;
  p.scales = parse_list<int>(o.scales, "--scales");
  p.validate();
  return p;
}

struct LoadedDetections {
  bool present = false;
  DetectionLoadResult result;
};

LoadedDetections load_optional_detections(const Options& o, Warnings& warn) {
  LoadedDetections d;
  if (o.detections.empty()) {
    return d;
  }
  d.present = true;
  d.result = load_detections(o.detections);
  for (const auto& msg : d.result.warnings) {
    warn.add(o.detections + " " + msg);
  }
  return d;
}

/// Filtered detections for each image; missing[i] marks images without a record.
std::vector<DetectionSet> detections_for(const std::vector<ImageRef>& refs, const LoadedDetections& dets,
                                         double threshold, std::vector<char>& missing, Warnings& warn) {
  std::set<std::string> ids;
  std::vector<DetectionSet> sets;
  missing.assign(refs.size(), 0);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ids.insert(refs[i].id);
    const auto it = dets.result.sets.find(refs[i].id);
    if (it == dets.result.sets.end()) {
      sets.push_back(DetectionSet{refs[i].id, dets.result.coords, {}});
      missing[i] = 1;
    } else {
      sets.push_back(filter_detections(it->second, threshold));
    }
  }
  if (dets.present) {
    for (const auto& [id, _] : dets.result.sets) {
      if (!ids.contains(id)) {
        warn.add("detections reference unknown image '" + id + "'");
      }
    }
  }
  return sets;
}

struct Keyed {
  std::map<std::string, double> values;
  std::string column;
};

Keyed read_keyed(const std::string& path, std::string column, const std::string& fallback) {
  const CsvTable t = read_csv(path);
  const std::size_t id_col = t.require_column("image_id");
  if (!t.column(column) && !fallback.empty() && t.column(fallback)) {
    column = fallback;
  }
  const std::size_t v_col = t.require_column(column);
  Keyed k;
  k.column = column;
  for (const auto& row : t.rows) {
    const double v = parse_number(row.at(v_col));
    if (!std::isfinite(v)) {
      throw DataError(path + ": non-finite " + column + " for '" + row.at(id_col) + "'");
    }
    if (!k.values.emplace(row.at(id_col), v).second) {
      throw DataError(path + ": duplicate image_id '" + row.at(id_col) + "'");
    }
  }
  return k;
}

void write_metrics(const fs::path& path, const MetricsReport& r) {
  write_csv(path, CsvTable{{"plcc", "srcc", "r2", "n"},
                           {{format_number(r.plcc), format_number(r.srcc), format_number(r.r2), std::to_string(r.n)}}});
}

MetricsReport evaluate_or_data_error(const PairedScores& scores) {
  try {
    return evaluate(scores);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
}

// ---- commands -------------------------------------------------------------

int cmd_score(const Options& o) {
  Warnings warn;
  const SaliencyParams params = saliency_params(o);
  const auto refs = scan_images(o.images);
  if (refs.empty()) {
    warn.add("no images found in " + o.images);
  }
  const LoadedDetections dets = load_optional_detections(o, warn);
  std::vector<char> missing;
  const auto sets = detections_for(refs, dets, o.conf_threshold, missing, warn);

  const fs::path sal_dir = fs::path(o.out) / "saliency";
  if (o.export_saliency != "none") {
    fs::create_directories(sal_dir);
  }
  std::vector<PqiScore> scores(refs.size());
  parallel_for(refs.size(), o.threads, [&](std::size_t i) {
    RgbImage img;
    try {
      img = read_image(refs[i].path);
    } catch (const DataError& e) {
      throw DataError(refs[i].path.string() + ": " + e.what());
    }
    const SaliencyMap sm = fine_grained_saliency(to_grayscale(img), params);
    scores[i] = compute_pqi(sm, sets[i]);
    if (o.export_saliency == "png") {
      export_saliency_png(sal_dir / (refs[i].id + ".png"), sm);
    } else if (o.export_saliency == "raw") {
      export_saliency_raw(sal_dir / (refs[i].id + ".raw"), sm);
    }
  });

  CsvTable table{{"image_id", "pqi", "k_used", "warning"}, {}};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (missing[i]) {
      warn.add("no detections for '" + refs[i].id + "'; scored with k=0");
    }
    table.rows.push_back({refs[i].id, format_number(scores[i].value), std::to_string(scores[i].k_used),
                          missing[i] ? "missing_detections" : ""});
  }
  const fs::path out = fs::path(o.out) / "scores.csv";
  write_csv(out, table);
  std::cout << "scored " << refs.size() << " image(s), " << warn.count << " warning(s) -> " << out.string() << '\n';
  return kOk;
}

int cmd_sweep(const Options& o) {
  Warnings warn;
  const SaliencyParams params = saliency_params(o);
  const auto levels = parse_list<double>(o.levels, "--levels");
  std::vector<ArtifactKind> kinds;
  if (o.kind == "all") {
    kinds = {ArtifactKind::Brightness, ArtifactKind::Darkness, ArtifactKind::Fog, ArtifactKind::Speed};
  } else {
    kinds = {*parse_artifact_kind(o.kind)};
  }
  const auto refs = scan_images(o.images);
  if (refs.empty()) {
    throw DataError("no images found in " + o.images);
  }
  const LoadedDetections dets = load_optional_detections(o, warn);
  std::vector<char> missing;
  SweepInput input;
  input.detections = detections_for(refs, dets, o.conf_threshold, missing, warn);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (missing[i]) {
      warn.add("no detections for '" + refs[i].id + "'; scored with k=0");
    }
  }
  input.images = read_images(refs, o.threads);

  std::vector<LineSeries> all;
  for (const ArtifactKind kind : kinds) {
    const SweepResult r = sweep(input, kind, levels, params, o.threads);
    const std::string name = to_string(kind);
    CsvTable table{{"level", "mean_pqi", "n_images"}, {}};
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
      table.rows.push_back({format_number(r.levels[i]), format_number(r.mean_pqi[i]), std::to_string(r.n_images[i])});
    }
    write_csv(fs::path(o.out) / ("sweep_" + name + ".csv"), table);
    LineSeries series{name, r.levels, r.mean_pqi};
    write_line_chart_svg(fs::path(o.out) / ("sweep_" + name + ".svg"), {series}, "PQI vs " + name, "level",
                         "mean PQI");
    all.push_back(std::move(series));
    if (r.excluded > 0) {
      warn.add(name + ": " + std::to_string(r.excluded) + " evaluation(s) failed and were excluded");
    }
  }
  if (all.size() > 1) {
    write_line_chart_svg(fs::path(o.out) / "sweep_all.svg", all, "PQI vs artifact level", "level", "mean PQI");
  }
  std::cout << "swept " << refs.size() << " image(s) over " << levels.size() << " level(s), " << warn.count
            << " warning(s)\n";
  return kOk;
}

int cmd_stats(const Options& o) {
  const CsvTable t = read_csv(o.scores);
  const std::size_t col = t.require_column(o.column);
  if (t.rows.empty()) {
    throw DataError(o.scores + ": no scores");
  }
  std::vector<double> values;
  for (const auto& row : t.rows) {
    const double v = parse_number(row.at(col));
    if (!std::isfinite(v)) {
      throw DataError(o.scores + ": non-finite value in column " + o.column);
    }
    values.push_back(v);
  }
  const StdKind kind = o.std_kind == "sample" ? StdKind::Sample : StdKind::Population;
  const PqiDistribution dist = pqi_distribution(values, o.bucket_width, kind);

  CsvTable hist{{"bucket_lo", "bucket_hi", "count"}, {}};
  for (const auto& b : dist.histogram) {
    hist.rows.push_back({format_number(b.lo), format_number(b.hi), std::to_string(b.count)});
  }
  write_csv(fs::path(o.out) / "distribution.csv", hist);
  write_csv(fs::path(o.out) / "stats.csv", CsvTable{{"mean", "std", "n"},
                                                    {{format_number(dist.mean), format_number(dist.std),
                                                      std::to_string(dist.n)}}});
  std::cout << "mean " << format_number(dist.mean) << " std " << format_number(dist.std) << " n " << dist.n << '\n';
  return kOk;
}

int cmd_eval(const Options& o) {
  const Keyed pred = read_keyed(o.predictions, o.pred_column, o.pred_column == "pqi_pred" ? "pqi" : "");
  const Keyed target = read_keyed(o.targets, o.target_column, "");
  std::vector<std::string> no_pred;
  std::vector<std::string> no_target;
  for (const auto& [id, _] : target.values) {
    if (!pred.values.contains(id)) {
      no_pred.push_back(id);
    }
  }
  for (const auto& [id, _] : pred.values) {
    if (!target.values.contains(id)) {
      no_target.push_back(id);
    }
  }
  if (!no_pred.empty() || !no_target.empty()) {
    std::string msg = "image_id sets differ;";
    if (!no_pred.empty()) {
      msg += " missing from predictions: " + join(no_pred, ", ") + ";";
    }
    if (!no_target.empty()) {
      msg += " missing from targets: " + join(no_target, ", ") + ";";
    }
    msg.pop_back();
    throw DataError(msg);
  }
  PairedScores scores;
  for (const auto& [id, v] : target.values) {
    scores.target.push_back(v);
    scores.predicted.push_back(pred.values.at(id));
  }
  const MetricsReport r = evaluate_or_data_error(scores);
  write_metrics(fs::path(o.out) / "metrics.csv", r);
  std::cout << "plcc " << format_number(r.plcc) << " srcc " << format_number(r.srcc) << " r2 " << format_number(r.r2)
            << " n " << r.n << '\n';
  return kOk;
}

SlicParams slic_params(const Options& o) {
  SlicParams p;
  p.compactness = o.compactness;
  p.iterations = o.slic_iterations;
  return p;
}

LabeledImages labeled_images(const std::string& targets_path, const std::string& column,
                             const std::map<std::string, fs::path>& paths, unsigned threads) {
  const Keyed k = read_keyed(targets_path, column, "");
  if (k.values.empty()) {
    throw DataError(targets_path + ": no targets");
  }
  LabeledImages data;
  std::vector<ImageRef> refs;
  std::vector<std::string> missing;
  for (const auto& [id, v] : k.values) {
    const auto it = paths.find(id);
    if (it == paths.end()) {
      missing.push_back(id);
      continue;
    }
    refs.push_back({id, it->second});
    data.ids.push_back(id);
    data.targets.push_back(v);
  }
  if (!missing.empty()) {
    throw DataError(targets_path + ": no image for " + join(missing, ", "));
  }
  data.images = read_images(refs, threads);
  return data;
}

int cmd_spanet_train(const Options& o) {
  SpaNetConfig cfg = o.scale == "desk" ? SpaNetConfig::desk_scale() : SpaNetConfig{};
  if (o.superpixel_k >= 0) {
    cfg.superpixel_k = o.superpixel_k;
  }
  const AblationVariant variant = AblationVariant::parse(o.variant);
  if (variant.superpixel_k >= 0) {
    cfg.superpixel_k = variant.superpixel_k;
  }
  cfg.use_pos_encoding = cfg.use_pos_encoding && variant.use_pos_encoding;
  cfg.validate();

  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.lr_max = o.lr_max;
  tc.lr_min = o.lr_min;
  tc.batch_size = o.batch_size;
  tc.seed = o.seed;
  tc.threads = o.threads;
  tc.validate();

  std::map<std::string, fs::path> paths;
  for (const auto& r : scan_images(o.images)) {
    paths.emplace(r.id, r.path);
  }
  const SlicParams slic = slic_params(o);
  const auto train_set = prepare_samples(labeled_images(o.targets, o.target_column, paths, o.threads), cfg, slic,
                                         o.threads);
  std::vector<SpaNetSample> val_set;
  if (!o.val_targets.empty()) {
    val_set = prepare_samples(labeled_images(o.val_targets, o.target_column, paths, o.threads), cfg, slic, o.threads);
  }

  SpaNetModel model(cfg);
  model.initialize(o.seed);
  const TrainResult result = train(model, train_set, val_set, tc);

  const fs::path out(o.out);
  save_checkpoint(out / "model.spanet", model);
  write_loss_history(out / "loss.csv", result);
  const auto report = [&](const std::vector<SpaNetSample>& set, const char* file) {
    if (set.size() < 2) {
      return;
    }
    PairedScores scores;
    scores.predicted = predict_all(model, set, o.threads);
    for (const auto& s : set) {
      scores.target.push_back(s.target);
    }
    const MetricsReport r = evaluate_or_data_error(scores);
    write_metrics(out / file, r);
    std::cout << file << ": plcc " << format_number(r.plcc) << " srcc " << format_number(r.srcc) << " r2 "
              << format_number(r.r2) << '\n';
  };
  report(train_set, "train_metrics.csv");
  report(val_set, "val_metrics.csv");
  std::cout << "trained " << result.history.size() << " epoch(s) on " << train_set.size()
            << " image(s); final train loss " << format_number(result.history.back().train_loss) << '\n';
  return kOk;
}

int cmd_spanet_predict(const Options& o) {
  const SpaNetModel model = load_checkpoint(o.model);
  const auto refs = scan_images(o.images);
  if (refs.empty()) {
    throw DataError("no images found in " + o.images);
  }
  LabeledImages data;
  for (const auto& r : refs) {
    data.ids.push_back(r.id);
  }
  data.targets.assign(refs.size(), 0.0);
  data.images = read_images(refs, o.threads);
  const auto samples = prepare_samples(data, model.config(), slic_params(o), o.threads);
  const auto preds = predict_all(model, samples, o.threads);

  CsvTable table{{"image_id", "pqi_pred"}, {}};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    table.rows.push_back({refs[i].id, format_number(preds[i])});
  }
  const fs::path out = fs::path(o.out) / "predictions.csv";
  write_csv(out, table);
  std::cout << "predicted " << refs.size() << " image(s) -> " << out.string() << '\n';
  return kOk;
}

// ---- command-line wiring ----------------------------------------------------

using Handler = int (*)(const Options&);

struct Command {
  CLI::App* app = nullptr;
  Handler handler = nullptr;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key=value file; flags on the command line take precedence")
      ->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "Output directory")->required();
  sub->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);
}

void add_saliency(CLI::App* sub, Options& o) {
  sub->add_option("--detections", o.detections, "Detections JSONL; images without a record are scored with k=0")
      ->check(CLI::ExistingFile);
  sub->add_option("--sigma", o.sigma, "Base surround radius");
  sub->add_option("--scales", o.scales, "Comma-separated surround scale exponents");
  sub->add_option("--conf-threshold", o.conf_threshold, "Minimum detection confidence (inclusive)");
}

std::map<std::string, Command> build(CLI::App& app, Options& o) {
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::map<std::string, Command> cmds;

  auto* score = app.add_subcommand("score", "Saliency + PQI for every image in a directory");
  add_common(score, o);
  score->add_option("--images", o.images, "Image directory (PNG/JPEG)")->required()->check(CLI::ExistingDirectory);
  add_saliency(score, o);
  score->add_option("--export-saliency", o.export_saliency, "Per-image saliency export")
      ->check(CLI::IsMember({"none", "png", "raw"}));
  cmds["score"] = {score, cmd_score};

  auto* sw = app.add_subcommand("sweep", "Mean PQI under increasing artifact levels");
  add_common(sw, o);
  sw->add_option("--images", o.images, "Image directory (PNG/JPEG)")->required()->check(CLI::ExistingDirectory);
  add_saliency(sw, o);
  sw->add_option("--kind", o.kind, "Artifact kind")
      ->check(CLI::IsMember({"all", "brightness", "darkness", "fog", "speed"}));
  sw->add_option("--levels", o.levels, "Comma-separated levels in [0, 1], increasing");
  cmds["sweep"] = {sw, cmd_sweep};

  auto* stats = app.add_subcommand("stats", "Mean, std and histogram of a score column");
  add_common(stats, o);
  stats->add_option("--scores", o.scores, "Scores CSV")->required()->check(CLI::ExistingFile);
  stats->add_option("--column", o.column, "Column to summarize");
  stats->add_option("--bucket-width", o.bucket_width, "Histogram bucket width");
  stats->add_option("--std", o.std_kind, "Standard deviation kind")->check(CLI::IsMember({"population", "sample"}));
  cmds["stats"] = {stats, cmd_stats};

  auto* ev = app.add_subcommand("eval", "PLCC, SRCC and R^2 of predictions against targets, joined on image_id");
  add_common(ev, o);
  ev->add_option("--predictions", o.predictions, "Predictions CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--targets", o.targets, "Targets CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--pred-column", o.pred_column, "Prediction column (pqi_pred falls back to pqi)");
  ev->add_option("--target-column", o.target_column, "Target column");
  cmds["eval"] = {ev, cmd_eval};

  auto* tr = app.add_subcommand("spanet-train", "Train the PQI regressor on images and target scores");
  add_common(tr, o);
  tr->add_option("--images", o.images, "Image directory (PNG/JPEG)")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--targets", o.targets, "Training targets CSV (image_id + target column)")
      ->required()
      ->check(CLI::ExistingFile);
  tr->add_option("--val-targets", o.val_targets, "Validation targets CSV")->check(CLI::ExistingFile);
  tr->add_option("--target-column", o.target_column, "Target column");
  tr->add_option("--scale", o.scale, "Network size")->check(CLI::IsMember({"full", "desk"}));
  tr->add_option("--variant", o.variant, "full, no_superpixel, no_pos_encoding or k=<n>");
  tr->add_option("--superpixel-k", o.superpixel_k, "Superpixel count; -1 keeps the scale default");
  tr->add_option("--epochs", o.epochs, "Training epochs");
  tr->add_option("--lr-max", o.lr_max, "Initial learning rate");
  tr->add_option("--lr-min", o.lr_min, "Final learning rate");
  tr->add_option("--batch-size", o.batch_size, "Mini-batch size");
  tr->add_option("--seed", o.seed, "Initialization and shuffling seed");
  tr->add_option("--compactness", o.compactness, "SLIC compactness");
  tr->add_option("--slic-iterations", o.slic_iterations, "SLIC iterations");
  cmds["spanet-train"] = {tr, cmd_spanet_train};

  auto* pr = app.add_subcommand("spanet-predict", "Predict PQI for every image with a trained checkpoint");
  add_common(pr, o);
  pr->add_option("--model", o.model, "Checkpoint written by spanet-train")->required()->check(CLI::ExistingFile);
  pr->add_option("--images", o.images, "Image directory (PNG/JPEG)")->required()->check(CLI::ExistingDirectory);
  pr->add_option("--compactness", o.compactness, "SLIC compactness");
  pr->add_option("--slic-iterations", o.slic_iterations, "SLIC iterations");
  cmds["spanet-predict"] = {pr, cmd_spanet_predict};
  return cmds;
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  return std::ranges::any_of(args, [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

std::string config_path(const std::vector<std::string>& args) {
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      return args[i + 1];
    }
    if (args[i].rfind("--config=", 0) == 0) {
      return args[i].substr(9);
    }
  }
  return {};
}

/// Appends "--key=value" for every config-file entry not already on the command line.
void merge_config(std::vector<std::string>& args, const CLI::App& sub) {
  const std::string path = config_path(args);
  if (path.empty()) {
    return;
  }
  std::ifstream in(path);
  if (!in) {
    throw InvalidArgument("cannot read config file " + path);
  }
  std::vector<std::string> extra;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') {
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const std::string flag = "--" + key;
    if (key == "config" || sub.get_option_no_throw(flag) == nullptr) {
      throw InvalidArgument(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "' for " +
                            sub.get_name());
    }
    if (!given_on_command_line(args, flag)) {
      extra.push_back(flag + "=" + value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
}

void write_resolved_config(const CLI::App& sub, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << "command=" << sub.get_name() << '\n';
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames()[0] == "help" || opt->get_lnames()[0] == "config") {
      continue;
    }
    const std::string value = opt->count() > 0 ? join(opt->results(), ",") : opt->get_default_str();
    out << opt->get_lnames()[0] << '=' << value << '\n';
  }
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
}

}  // namespace

int run(const std::vector<std::string>& args_in) {
  Options o;
  CLI::App app{"Perception quality index: saliency scoring, artifact sweeps, statistics and a learned regressor",
               "pqi"};
  const auto cmds = build(app, o);
  std::vector<std::string> args = args_in;
  try {
    if (args.size() > 1) {
      if (const auto it = cmds.find(args[1]); it != cmds.end()) {
        merge_config(args, *it->second.app);
      }
    }
    std::vector<const char*> argv;
    for (const auto& a : args) {
      argv.push_back(a.c_str());
    }
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    for (const auto& [name, cmd] : cmds) {
      if (cmd.app->parsed()) {
        fs::create_directories(o.out);
        write_resolved_config(*cmd.app, fs::path(o.out) / "run_config.txt");
        return cmd.handler(o);
      }
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace pqi::cli
