// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "plantmon/anomaly.hpp"
#include "plantmon/cli.hpp"
#include "plantmon/csv.hpp"
#include "plantmon/dataset.hpp"
#include "plantmon/energy.hpp"
#include "plantmon/estimator.hpp"
#include "plantmon/indices.hpp"
#include "plantmon/parallel.hpp"
#include "plantmon/raster.hpp"
#include "plantmon/stats.hpp"
#include "plantmon/svg.hpp"
#include "plantmon/synth.hpp"

namespace plantmon::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Context {
  json config = json::object();
  std::uint64_t seed = 0;
  std::string seed_source = "default";
  fs::path out = ".";
  bool quiet = false;
  bool timestamp = true;
  std::size_t threads = 0;
  std::ostream* log = &std::cerr;

  void info(const std::string& msg) const {
    if (!quiet) *log << msg << '\n';
  }
  void warn(const std::string& msg) const { *log << "warning: " << msg << '\n'; }

  json section(const char* name) const {
    if (!config.contains(name)) return json::object();
    const json& s = config[name];
    if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
    return s;
  }
};

std::uint64_t parse_seed(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw ConfigError(where + ": seed '" + s + "' is not an unsigned 64-bit integer");
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

fs::path prepare_out(const Context& ctx) {
  std::error_code ec;
  fs::create_directories(ctx.out, ec);
  if (ec) throw ConfigError("cannot create output directory " + ctx.out.string() + ": " + ec.message());
  return ctx.out;
}

json run_block(const Context& ctx, const std::string& command, const json& resolved,
               const json& inputs) {
  return {{"command", command},
          {"seed", ctx.seed},
          {"seed_source", ctx.seed_source},
          {"config", resolved},
          {"inputs", inputs}};
}

void write_run(const Context& ctx, const std::string& command, const json& resolved,
               const json& inputs) {
  write_json(ctx.out / (command + "_run.json"), run_block(ctx, command, resolved, inputs));
}

std::optional<std::string> timestamp_comment(const Context& ctx) {
  if (!ctx.timestamp) return std::nullopt;
  char buf[64];
  const std::time_t now = std::time(nullptr);
  std::strftime(buf, sizeof buf, "generated %Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return std::string(buf);
}

fs::path require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
  return path;
}

// "6..22", "6,8,10" or a mix such as "6..8,12".
std::vector<int> parse_lengths(const std::string& spec) {
  std::vector<int> out;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    try {
      if (dots == std::string::npos) {
        out.push_back(static_cast<int>(csv::parse_int(part)));
      } else {
        const int lo = static_cast<int>(csv::parse_int(part.substr(0, dots)));
        const int hi = static_cast<int>(csv::parse_int(part.substr(dots + 2)));
        if (hi < lo) throw ConfigError("empty length range '" + part + "'");
        for (int v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const DataError&) {
      throw ConfigError("bad window length list '" + spec + "'");
    }
  }
  if (out.empty()) throw ConfigError("no window lengths given");
  for (int v : out) (void)dataset::WindowSpec::of_length(v);
  std::set<int> unique(out.begin(), out.end());
  if (unique.size() != out.size()) throw ConfigError("duplicate window length in '" + spec + "'");
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  try {
    return j.value(key, fallback);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown setting '" + key + "' in " + where);
  }
}

// --- AE and RF settings ---

anomaly::AeTrainConfig ae_config(const Context& ctx, std::optional<int> epochs) {
  const json s = ctx.section("ae");
  reject_unknown(s, {"epochs", "learning_rate", "beta1", "beta2", "epsilon", "max_train_segments"},
                 "section 'ae'");
  anomaly::AeTrainConfig c;
  c.epochs = get_or(s, "epochs", c.epochs);
  c.learning_rate = get_or(s, "learning_rate", c.learning_rate);
  c.beta1 = get_or(s, "beta1", c.beta1);
  c.beta2 = get_or(s, "beta2", c.beta2);
  c.epsilon = get_or(s, "epsilon", c.epsilon);
  c.max_train_segments = get_or(s, "max_train_segments", c.max_train_segments);
  if (epochs) c.epochs = *epochs;
  c.seed = ctx.seed;
  anomaly::validate(c);
  return c;
}

json to_json(const anomaly::AeTrainConfig& c) {
  return {{"architecture", "L-64-32-64-L relu, linear output"},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"max_train_segments", c.max_train_segments},
          {"threshold_factor", anomaly::kThresholdFactor},
          {"seed", c.seed}};
}

estimator::CvConfig cv_config(const Context& ctx, std::optional<std::size_t> n_trees) {
  estimator::CvConfig c;
  const json rf = ctx.section("rf");
  reject_unknown(rf, {"n_trees", "max_depth", "min_samples_leaf", "mtry", "bootstrap"},
                 "section 'rf'");
  auto& f = c.selection.forest;
  f.n_trees = get_or(rf, "n_trees", f.n_trees);
  f.min_samples_leaf = get_or(rf, "min_samples_leaf", f.min_samples_leaf);
  f.bootstrap = get_or(rf, "bootstrap", f.bootstrap);
  if (rf.contains("max_depth") && !rf["max_depth"].is_null()) {
    f.max_depth = get_or<std::size_t>(rf, "max_depth", 0);
  }
  if (rf.contains("mtry") && !rf["mtry"].is_null()) f.mtry = get_or<std::size_t>(rf, "mtry", 0);
  if (n_trees) f.n_trees = *n_trees;
  const json sel = ctx.section("selection");
  reject_unknown(sel, {"rfe_target", "rfe_drop_fraction", "min_importance", "max_abs_corr", "final_count"},
                 "section 'selection'");
  auto& s = c.selection;
  s.rfe_target = get_or(sel, "rfe_target", s.rfe_target);
  s.rfe_drop_fraction = get_or(sel, "rfe_drop_fraction", s.rfe_drop_fraction);
  s.min_importance = get_or(sel, "min_importance", s.min_importance);
  s.max_abs_corr = get_or(sel, "max_abs_corr", s.max_abs_corr);
  s.final_count = get_or(sel, "final_count", s.final_count);
  const json cv = ctx.section("cv");
  reject_unknown(cv, {"leaf_grid", "train_fraction"}, "section 'cv'");
  c.leaf_grid = get_or(cv, "leaf_grid", c.leaf_grid);
  c.train_fraction = get_or(cv, "train_fraction", c.train_fraction);
  c.seed = ctx.seed;
  c.threads = ctx.threads;
  estimator::validate(c);
  if (f.n_trees < 1) throw ConfigError("rf n_trees must be >= 1");
  return c;
}

json to_json(const estimator::CvConfig& c) {
  const auto& f = c.selection.forest;
  const auto& s = c.selection;
  return {{"rf",
           {{"n_trees", f.n_trees},
            {"max_depth", f.max_depth ? json(*f.max_depth) : json(nullptr)},
            {"min_samples_leaf_grid", c.leaf_grid},
            {"mtry", f.mtry ? json(*f.mtry) : json("ceil(p/3)")},
            {"bootstrap", f.bootstrap}}},
          {"selection",
           {{"rfe_target", s.rfe_target},
            {"rfe_drop_fraction", s.rfe_drop_fraction},
            {"min_importance", s.min_importance},
            {"max_abs_corr", s.max_abs_corr},
            {"final_count", s.final_count}}},
          {"cv", {{"train_fraction", c.train_fraction}, {"folds", dataset::kFoldCount}}},
          {"seed", c.seed}};
}

std::vector<Response> parse_variables(const std::vector<std::string>& names) {
  if (names.empty()) return {kResponses.begin(), kResponses.end()};
  std::vector<Response> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_response(n));
    } catch (const Error&) {
      throw ConfigError("unknown response variable '" + n + "'");
    }
  }
  return out;
}

// Heat map rows "<series> T2" and "<series> T3" over the sweep lengths.
std::string sweep_svg(const Context& ctx, const std::string& title,
                      const std::vector<std::string>& series, const std::vector<int>& lengths,
                      const std::vector<anomaly::SweepCell>& cells) {
  svg::HeatMap map;
  map.title = title;
  for (int l : lengths) map.cols.push_back(std::to_string(l));
  for (const auto& s : series) {
    for (const char* t : {"T2", "T3"}) map.rows.push_back(s + " " + t);
  }
  map.values.assign(map.rows.size() * map.cols.size(), std::nan(""));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t per_series = lengths.size() * 2;
    const std::size_t s = i / per_series;
    const std::size_t l = (i % per_series) / 2;
    const std::size_t t = i % 2;
    map.values[(2 * s + t) * lengths.size() + l] = cells[i].net_detection;
  }
  return svg::heat_map(map, timestamp_comment(ctx));
}

void write_sweep(const fs::path& path, const char* series_column,
                 const std::vector<anomaly::SweepCell>& cells) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  csv::Writer w(f);
  w.field(series_column).field("length").field("target_treatment").field("net_detection");
  w.end_row();
  for (const auto& c : cells) {
    w.field(c.series).field(c.length).field(to_string(c.target)).field(c.net_detection);
    w.end_row();
  }
}

void write_sweep_detail(const fs::path& path, const char* series_column,
                        const std::vector<anomaly::SweepCell>& cells) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  csv::Writer w(f);
  w.field(series_column).field("length").field("target_treatment").field("true_rate");
  w.field("false_rate").field("net_detection").field("threshold").field("n_train");
  w.field("n_healthy_test").field("n_anomalous_test");
  w.end_row();
  for (const auto& c : cells) {
    w.field(c.series).field(c.length).field(to_string(c.target)).field(c.true_rate);
    w.field(c.false_rate).field(c.net_detection).field(c.threshold).field(c.n_train);
    w.field(c.n_healthy_test).field(c.n_anomalous_test);
    w.end_row();
  }
}

// --- commands ---

struct GenOptions {
  std::string preset;
};

int cmd_gen(const Context& ctx, const GenOptions& o) {
  json s = ctx.section("synth");
  if (!o.preset.empty()) s["preset"] = o.preset;
  s["seed"] = ctx.seed;
  const synth::SynthConfig cfg = synth::from_json(s);
  const fs::path out = prepare_out(ctx);
  const auto data = synth::generate(cfg);
  synth::write_dataset(cfg, data, out);
  ctx.info("gen: " + std::to_string(data.features.rows.size()) + " feature rows, " +
           std::to_string(data.ground_truth.size()) + " ground-truth rows -> " + out.string());
  json resolved = synth::to_json(cfg);
  if (s.contains("preset")) resolved["preset"] = s["preset"];
  write_run(ctx, "gen", resolved, json::object());
  return kExitOk;
}

struct ExtractOptions {
  std::string input;
};

int cmd_extract(const Context& ctx, const ExtractOptions& o) {
  const json s = ctx.section("extract");
  reject_unknown(s, {"feature_limit", "input"}, "section 'extract'");
  const std::string input = o.input.empty() ? get_or<std::string>(s, "input", "") : o.input;
  if (input.empty()) throw ConfigError("extract needs --input <dir>");
  if (!fs::is_directory(input)) throw ConfigError("input directory '" + input + "' does not exist");
  const fs::path manifest_path = fs::path(input) / "manifest.csv";
  if (!fs::exists(manifest_path)) {
    throw DataError("no manifest.csv in '" + input + "': nothing to extract");
  }
  const csv::Table manifest = csv::read(manifest_path);
  const std::size_t c_id = manifest.require("sample_id");
  const std::size_t c_tank = manifest.require("tank");
  const std::size_t c_trt = manifest.require("treatment");
  const std::size_t c_dat = manifest.require("dat");
  const std::size_t c_cube = manifest.require("cube");
  const std::size_t c_mask = manifest.require("mask");
  if (manifest.rows.empty()) throw DataError(manifest_path.string() + " lists no samples");

  std::optional<std::size_t> limit;
  if (s.contains("feature_limit")) limit = get_or<std::size_t>(s, "feature_limit", 0);
  const auto registry = indices::default_registry();
  {
    std::vector<std::string> universe;
    for (const auto& c : raster::default_channels()) universe.push_back(c.name);
    indices::validate_registry(registry, universe);
  }

  const std::size_t n = manifest.rows.size();
  std::vector<std::optional<indices::FeatureVector>> results(n);
  std::vector<std::string> errors(n);
  parallel_for(n, ctx.threads, [&](std::size_t i) {
    const auto& r = manifest.rows[i];
    try {
      const auto cube = raster::load_cube(fs::path(input) / r[c_cube]);
      const auto mask = raster::load_mask(fs::path(input) / r[c_mask]);
      const int dat = static_cast<int>(csv::parse_int(r[c_dat]));
      const auto sample = raster::apply_mask(cube, mask, r[c_id], dat);
      auto ex = indices::extract_features(sample, registry, limit);
      ex.features.tank = r[c_tank];
      ex.features.treatment = parse_treatment(r[c_trt]);
      results[i] = std::move(ex.features);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  indices::FeatureTable table;
  table.names = indices::feature_names(registry, limit);
  json skipped = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) {
      table.rows.push_back(std::move(*results[i]));
    } else {
      ctx.warn("skipping sample '" + manifest.rows[i][c_id] + "': " + errors[i]);
      skipped.push_back({{"sample_id", manifest.rows[i][c_id]}, {"reason", errors[i]}});
    }
  }
  if (table.rows.empty()) throw DataError("every sample failed to extract");
  const fs::path out = prepare_out(ctx);
  indices::write_feature_csv(table, out / "features.csv");
  ctx.info("extract: " + std::to_string(table.rows.size()) + " of " + std::to_string(n) +
           " samples, " + std::to_string(table.names.size()) + " features");
  json resolved = {{"feature_count", table.names.size()},
                   {"registry_size", registry.size()},
                   {"aggregators", {"mean", "median", "std"}}};
  write_run(ctx, "extract", resolved,
            {{"input", input}, {"samples", n}, {"extracted", table.rows.size()}, {"skipped", skipped}});
  return kExitOk;
}

struct SweepOptions {
  std::string input;
  std::string select;
  std::string lengths;
  std::optional<int> epochs;
};

int cmd_earlywarn(const Context& ctx, const SweepOptions& o) {
  const json s = ctx.section("earlywarn");
  reject_unknown(s, {"features", "lengths", "input"}, "section 'earlywarn'");
  const std::string input = o.input.empty() ? get_or<std::string>(s, "input", "") : o.input;
  const indices::FeatureTable table = indices::read_feature_csv(require_file(input, "--features"));
  if (table.rows.empty()) throw DataError(input + " holds no feature rows");
  std::vector<std::string> features =
      o.select.empty() ? get_or(s, "features", std::vector<std::string>{}) : split_list(o.select);
  if (features.empty()) features = table.names;
  const std::vector<int> lengths =
      parse_lengths(o.lengths.empty() ? get_or<std::string>(s, "lengths", "6..22") : o.lengths);
  const auto ae = ae_config(ctx, o.epochs);

  std::vector<anomaly::SweepSeries> series;
  for (const auto& f : features) {
    series.push_back({f, dataset::build_trajectories(table, f)});
  }
  const auto cells = anomaly::sweep(series, lengths, ae, ctx.threads);
  const fs::path out = prepare_out(ctx);
  write_sweep(out / "earlywarn.csv", "feature", cells);
  write_sweep_detail(out / "earlywarn_cells.csv", "feature", cells);
  write_text(out / "earlywarn.svg",
             sweep_svg(ctx, "Net detection rate (TPR - FPR), VI features", features, lengths, cells));
  ctx.info("earlywarn: " + std::to_string(cells.size()) + " cells");
  write_run(ctx, "earlywarn",
            {{"ae", to_json(ae)}, {"features", features}, {"lengths", lengths}},
            {{"features_csv", input}});
  return kExitOk;
}

struct EstimateOptions {
  std::string features;
  std::string labels;
  std::string variables;
  std::optional<std::size_t> n_trees;
};

int cmd_estimate(const Context& ctx, const EstimateOptions& o) {
  const json s = ctx.section("estimate");
  reject_unknown(s, {"features", "labels", "variables"}, "section 'estimate'");
  const std::string fpath = o.features.empty() ? get_or<std::string>(s, "features", "") : o.features;
  const std::string lpath = o.labels.empty() ? get_or<std::string>(s, "labels", "") : o.labels;
  require_file(fpath, "--features");
  require_file(lpath, "--labels");
  const auto variables = parse_variables(
      o.variables.empty() ? get_or(s, "variables", std::vector<std::string>{}) : split_list(o.variables));
  auto cv = cv_config(ctx, o.n_trees);
  cv.estimate_all_rows = true;

  const auto table = indices::read_feature_csv(fpath);
  const auto gt = dataset::read_ground_truth(lpath);
  if (table.rows.empty()) throw DataError(fpath + " holds no feature rows");
  if (gt.empty()) throw DataError(lpath + " holds no ground-truth rows");
  const auto folds = dataset::make_folds(dataset::tanks_of(table));
  const auto records = dataset::pseudo_label(table, gt);
  if (records.empty()) throw DataError("no feature row matches a ground-truth tank and day");
  ctx.info("estimate: " + std::to_string(records.size()) + " labeled records, " +
           std::to_string(folds.size()) + " folds");

  const fs::path out = prepare_out(ctx);
  {
    std::ofstream f(out / "labels.csv", std::ios::binary);
    dataset::write_label_csv(table, records, f);
  }
  std::vector<estimator::VariableReport> reports;
  for (Response r : variables) {
    reports.push_back(estimator::run_cv(table, records, folds, r, cv));
    const auto& rep = reports.back();
    ctx.info("  " + std::string(to_string(r)) + ": mean R2 " + std::to_string(rep.mean_r2) +
             " +- " + std::to_string(rep.sd_r2) + ", OOF R2 " + std::to_string(rep.oof.r2));
  }

  {
    std::ofstream f(out / "cv_metrics.csv", std::ios::binary);
    csv::Writer w(f);
    w.field("variable").field("fold").field("r2").field("rmse").end_row();
    for (const auto& rep : reports) {
      for (const auto& fr : rep.folds) {
        w.field(to_string(rep.variable)).field(fr.fold).field(fr.metrics.r2).field(fr.metrics.rmse);
        w.end_row();
      }
    }
  }
  {
    std::ofstream f(out / "oof_predictions.csv", std::ios::binary);
    csv::Writer w(f);
    w.field("variable").field("sample_id").field("tank").field("treatment").field("dat");
    w.field("label_kind").field("truth").field("prediction").field("n_predictions").end_row();
    for (const auto& rep : reports) {
      for (const auto& p : rep.oof_predictions) {
        const auto& rec = records[p.record];
        const auto& row = table.rows[rec.row];
        w.field(to_string(rep.variable)).field(row.sample_id).field(row.tank);
        w.field(to_string(row.treatment)).field(row.dat).field(dataset::to_string(rec.kind));
        w.field(p.truth).field(p.prediction).field(p.n_predictions).end_row();
      }
    }
  }
  {
    std::ofstream f(out / "estimated_trajectories.csv", std::ios::binary);
    csv::Writer w(f);
    w.field("sample_id").field("tank").field("treatment").field("dat");
    for (const auto& rep : reports) w.field(to_string(rep.variable));
    w.end_row();
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      w.field(row.sample_id).field(row.tank).field(to_string(row.treatment)).field(row.dat);
      for (const auto& rep : reports) w.field(rep.row_estimates[i]);
      w.end_row();
    }
  }
  json summary = json::array();
  for (const auto& rep : reports) {
    json ranking = json::array();
    for (const auto& e : rep.aggregated.ranking) {
      ranking.push_back({{"feature", e.name},
                         {"frequency", e.frequency},
                         {"median_importance", e.median_importance}});
    }
    json leaves = json::array();
    for (const auto& fr : rep.folds) leaves.push_back(fr.min_samples_leaf);
    summary.push_back({{"variable", to_string(rep.variable)},
                       {"mean_r2", rep.mean_r2},
                       {"sd_r2", rep.sd_r2},
                       {"mean_rmse", rep.mean_rmse},
                       {"sd_rmse", rep.sd_rmse},
                       {"oof_r2", rep.oof.r2},
                       {"oof_rmse", rep.oof.rmse},
                       {"fold_count", rep.folds.size()},
                       {"top_features", rep.aggregated.top},
                       {"final_features", rep.aggregated.final_features},
                       {"final_pruning_log", rep.aggregated.pruning_log},
                       {"selection_ranking", ranking},
                       {"min_samples_leaf_per_fold", leaves}});
  }
  const json inputs = {{"features_csv", fpath}, {"labels_csv", lpath}, {"labeled_records", records.size()}};
  json resolved = to_json(cv);
  json doc = {{"variables", summary}, {"run", run_block(ctx, "estimate", resolved, inputs)}};
  write_json(out / "cv_summary.json", doc);
  write_run(ctx, "estimate", resolved, inputs);
  return kExitOk;
}

int cmd_rfae(const Context& ctx, const SweepOptions& o, const std::string& variables_opt) {
  const json s = ctx.section("rfae");
  reject_unknown(s, {"input", "lengths", "variables"}, "section 'rfae'");
  const std::string input = o.input.empty() ? get_or<std::string>(s, "input", "") : o.input;
  const auto table = indices::read_feature_csv(require_file(input, "--estimates"));
  if (table.rows.empty()) throw DataError(input + " holds no estimated rows");
  const auto variables = parse_variables(variables_opt.empty()
                                             ? get_or(s, "variables", std::vector<std::string>{})
                                             : split_list(variables_opt));
  const std::vector<int> lengths =
      parse_lengths(o.lengths.empty() ? get_or<std::string>(s, "lengths", "6..22") : o.lengths);
  const auto ae = ae_config(ctx, o.epochs);
  std::vector<anomaly::SweepSeries> series;
  std::vector<std::string> names;
  for (Response r : variables) {
    const std::string name(to_string(r));
    names.push_back(name);
    series.push_back({name, dataset::build_trajectories(table, name)});
  }
  const auto cells = anomaly::sweep(series, lengths, ae, ctx.threads);
  const fs::path out = prepare_out(ctx);
  write_sweep(out / "rfae.csv", "variable", cells);
  write_sweep_detail(out / "rfae_cells.csv", "variable", cells);
  write_text(out / "rfae.svg",
             sweep_svg(ctx, "Net detection rate (TPR - FPR), RF-estimated responses", names, lengths, cells));
  ctx.info("rfae: " + std::to_string(cells.size()) + " cells");
  write_run(ctx, "rfae", {{"ae", to_json(ae)}, {"variables", names}, {"lengths", lengths}},
            {{"estimates_csv", input}});
  return kExitOk;
}

struct MemOptions {
  std::string labels;
  std::string estimated;
};

int cmd_mem(const Context& ctx, const MemOptions& o) {
  const json s = ctx.section("mem");
  reject_unknown(s, {"labels", "estimated"}, "section 'mem'");
  const std::string lpath = o.labels.empty() ? get_or<std::string>(s, "labels", "") : o.labels;
  const std::string epath = o.estimated.empty() ? get_or<std::string>(s, "estimated", "") : o.estimated;
  const auto gt = dataset::read_ground_truth(require_file(lpath, "--labels"));
  if (gt.empty()) throw DataError(lpath + " holds no ground-truth rows");
  const fs::path out = prepare_out(ctx);
  const auto results = stats::fit_by_day(gt);
  {
    std::ofstream f(out / "mem.csv", std::ios::binary);
    stats::write_report_csv(results, f);
  }
  json inputs = {{"labels_csv", lpath}};
  if (!epath.empty()) {
    const auto est = indices::read_feature_csv(require_file(epath, "--estimated"));
    std::map<std::pair<std::string, int>, const indices::FeatureVector*> by_key;
    for (const auto& row : est.rows) by_key[{row.sample_id, row.dat}] = &row;
    // Only the variables the estimate file carries are refit.
    std::vector<std::pair<Response, std::size_t>> cols;
    for (Response r : kResponses) {
      if (auto c = est.find(to_string(r))) cols.push_back({r, *c});
    }
    if (cols.empty()) throw DataError(epath + " holds no response variable columns");
    std::vector<dataset::GroundTruth> replaced = gt;
    for (auto& g : replaced) {
      auto it = by_key.find({g.sample_id, g.dat});
      if (it == by_key.end()) {
        throw DataError("no estimate for ground-truth sample '" + g.sample_id + "' day " +
                        std::to_string(g.dat));
      }
      for (const auto& [r, c] : cols) g.values[index_of(r)] = it->second->values[c];
    }
    std::vector<stats::DayResult> kept;
    for (auto& d : stats::fit_by_day(replaced)) {
      const bool estimated = std::any_of(cols.begin(), cols.end(),
                                         [&](const auto& rc) { return rc.first == d.variable; });
      if (estimated) kept.push_back(std::move(d));
    }
    std::ofstream f(out / "mem_estimated.csv", std::ios::binary);
    stats::write_report_csv(kept, f);
    inputs["estimated_csv"] = epath;
  }
  std::size_t sig = 0;
  for (const auto& r : results) sig += stats::significant(r.components) ? 1 : 0;
  ctx.info("mem: " + std::to_string(results.size()) + " fits, " + std::to_string(sig) +
           " with p <= 0.05");
  write_run(ctx, "mem", {{"method", "balanced nested ANOVA, method of moments"}, {"alpha", 0.05}},
            inputs);
  return kExitOk;
}

struct EnergyOptions {
  std::string ledger;
};

int cmd_energy(const Context& ctx, const EnergyOptions& o) {
  const json s = ctx.section("energy");
  reject_unknown(s, {"ledger"}, "section 'energy'");
  const std::string path = o.ledger.empty() ? get_or<std::string>(s, "ledger", "") : o.ledger;
  const auto input = energy::read_ledger(require_file(path, "--ledger").string());
  const auto report = energy::build_report(input);
  const fs::path out = prepare_out(ctx);
  json doc = energy::to_json(report);
  const json inputs = {{"ledger", path}};
  std::ifstream raw(path);
  json resolved = json::parse(raw);
  doc["run"] = run_block(ctx, "energy", resolved, inputs);
  write_json(out / "energy_report.json", doc);
  {
    std::ofstream f(out / "energy_tables.md", std::ios::binary);
    energy::write_markdown(report, f);
  }
  write_text(out / "energy.svg", energy::render_svg(report, ctx.timestamp));
  for (const auto& c : report.claims) {
    if (!c.derivable) {
      ctx.warn("claimed ratio " + std::to_string(c.claimed) +
               " lies outside the derivable range " + std::to_string(report.envelope.min) + ".." +
               std::to_string(report.envelope.max));
    }
  }
  ctx.info("energy: report written to " + out.string());
  write_run(ctx, "energy", resolved, inputs);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& log) {
  CLI::App app{"plantmon: tiered plant-nutrient monitoring pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::string seed_flag;
  std::string out = ".";
  bool quiet = false;
  bool no_timestamp = false;
  std::size_t threads = 0;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed_flag, "random seed (u64), overrides config and PLANTMON_SEED");
  app.add_option("--out", out, "output directory (created if missing)");
  app.add_flag("--quiet", quiet, "suppress progress messages");
  app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp comment from SVG output");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  GenOptions gen;
  auto* c_gen = app.add_subcommand("gen", "generate a synthetic depletion experiment");
  c_gen->add_option("--preset", gen.preset, "default, separated or null");

  ExtractOptions extract;
  auto* c_extract = app.add_subcommand("extract", "extract VI features from cubes and masks");
  c_extract->add_option("--input", extract.input, "directory with manifest.csv");

  SweepOptions early;
  auto* c_early = app.add_subcommand("earlywarn", "autoencoder sweep on VI feature trajectories");
  c_early->add_option("--features", early.input, "feature CSV");
  c_early->add_option("--select", early.select, "comma-separated feature names");
  c_early->add_option("--lengths", early.lengths, "window lengths, e.g. 6..22");
  c_early->add_option("--epochs", early.epochs, "autoencoder training epochs");

  EstimateOptions est;
  auto* c_est = app.add_subcommand("estimate", "random-forest estimation with 27-fold CV");
  c_est->add_option("--features", est.features, "feature CSV");
  c_est->add_option("--labels", est.labels, "ground-truth CSV");
  c_est->add_option("--variables", est.variables, "comma-separated response variables");
  c_est->add_option("--n-trees", est.n_trees, "trees per forest");

  SweepOptions rfae;
  std::string rfae_vars;
  auto* c_rfae = app.add_subcommand("rfae", "autoencoder sweep on estimated response trajectories");
  c_rfae->add_option("--estimates", rfae.input, "estimated_trajectories.csv");
  c_rfae->add_option("--lengths", rfae.lengths, "window lengths, e.g. 6..22");
  c_rfae->add_option("--variables", rfae_vars, "comma-separated response variables");
  c_rfae->add_option("--epochs", rfae.epochs, "autoencoder training epochs");

  MemOptions mem;
  auto* c_mem = app.add_subcommand("mem", "nested variance components per variable and day");
  c_mem->add_option("--labels", mem.labels, "ground-truth CSV");
  c_mem->add_option("--estimated", mem.estimated, "estimated_trajectories.csv (optional)");

  EnergyOptions en;
  auto* c_energy = app.add_subcommand("energy", "energy ledger report");
  c_energy->add_option("--ledger", en.ledger, "measurement JSON");

  for (auto* sub : {c_gen, c_extract, c_early, c_est, c_rfae, c_mem, c_energy}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, std::cout, log);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, std::cout, log);
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, log);
    return kExitConfig;
  }

  Context ctx;
  ctx.out = out;
  ctx.quiet = quiet;
  ctx.timestamp = !no_timestamp;
  ctx.threads = threads;
  ctx.log = &log;
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot open config '" + config_path + "'");
      try {
        ctx.config = json::parse(f);
      } catch (const json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
      if (!ctx.config.is_object()) throw ConfigError("config must be a JSON object");
      if (ctx.config.contains("seed")) {
        try {
          ctx.seed = ctx.config["seed"].get<std::uint64_t>();
        } catch (const json::exception&) {
          throw ConfigError("config seed must be an unsigned integer");
        }
        ctx.seed_source = "config";
      }
    }
    if (const char* env = std::getenv("PLANTMON_SEED"); env && *env) {
      ctx.seed = parse_seed(env, "PLANTMON_SEED");
      ctx.seed_source = "environment";
    }
    if (!seed_flag.empty()) {
      ctx.seed = parse_seed(seed_flag, "--seed");
      ctx.seed_source = "flag";
    }
    if (c_gen->parsed()) return cmd_gen(ctx, gen);
    if (c_extract->parsed()) return cmd_extract(ctx, extract);
    if (c_early->parsed()) return cmd_earlywarn(ctx, early);
    if (c_est->parsed()) return cmd_estimate(ctx, est);
    if (c_rfae->parsed()) return cmd_rfae(ctx, rfae, rfae_vars);
    if (c_mem->parsed()) return cmd_mem(ctx, mem);
    if (c_energy->parsed()) return cmd_energy(ctx, en);
    throw ConfigError("no subcommand");
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitData;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cerr);
}

}  // namespace plantmon::cli
