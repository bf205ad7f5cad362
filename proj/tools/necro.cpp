// Copyright 2026 The necro Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// necro: command-line driver for dataset synthesis, whole-slide segmentation,
// necrosis quantification, report comparison and survival stratification.
//
// Exit codes: 0 success, 1 I/O or unexpected failure, 2 validation error,
// 3 segmentation backend error. Progress goes to stderr; results only to files.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "necro/pipeline.hpp"
#include "necro/report.hpp"
#include "necro/synth_lab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Resolved settings of one invocation. Values come from defaults, then the
/// optional JSON config file, then command-line flags.
struct RunConfig {
  std::string command;
  fs::path dataset;
  fs::path out = "out";
  std::optional<fs::path> pred;
  std::optional<fs::path> spec;
  std::string backend = "chromatic";
  std::string external_cmd;
  int batch_size = 16;
  int timeout_ms = 600000;
  double mislabel_rate = 0.0;
  int workers = 1;
  std::string endpoint;  // empty = both (sweep) / os (survival)
  std::vector<double> thresholds = necro::default_thresholds();
  double cutoff = 0.9;
  std::string by = "dl";
  double alpha = 0.5;
  int level = 4;
  std::uint64_t seed = 0;
  bool truth = false;

  json to_json() const {
    json j = {{"command", command},       {"dataset", dataset.string()}, {"out", out.string()},
              {"backend", backend},       {"external_cmd", external_cmd}, {"batch_size", batch_size},
              {"timeout_ms", timeout_ms}, {"mislabel_rate", mislabel_rate}, {"workers", workers},
              {"endpoint", endpoint},     {"thresholds", thresholds},   {"cutoff", cutoff},
              {"by", by},                 {"alpha", alpha},             {"level", level},
              {"seed", seed},             {"truth", truth}};
    j["pred"] = pred ? json(pred->string()) : json(nullptr);
    j["spec"] = spec ? json(spec->string()) : json(nullptr);
    return j;
  }
};

/// Flag values captured from the command line; unset means "not given".
struct Flags {
  std::optional<std::string> config, dataset, out, pred, spec, backend, external_cmd, endpoint, by;
  std::optional<int> batch_size, timeout_ms, workers, level;
  std::optional<double> mislabel_rate, cutoff, alpha;
  std::optional<std::uint64_t> seed;
  std::vector<double> thresholds;
  bool truth = false;
};

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) dst = it->get<T>();
}

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig c;
  c.command = command;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw necro::ValidationError("config file not found: " + *f.config);
    json j;
    try {
      j = json::parse(in);
      static const std::set<std::string> known = {
          "dataset", "out",    "pred",  "spec",  "backend", "external_cmd", "batch_size", "timeout_ms",
          "mislabel_rate", "workers", "endpoint", "thresholds", "cutoff", "by", "alpha", "level", "seed", "truth"};
      for (const auto& [k, _] : j.items()) {
        if (!known.contains(k)) throw necro::ValidationError("config: unknown key '" + k + "'");
      }
      std::string s;
      if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
      if (j.contains("out")) c.out = j["out"].get<std::string>();
      if (j.contains("pred") && !j["pred"].is_null()) c.pred = j["pred"].get<std::string>();
      if (j.contains("spec") && !j["spec"].is_null()) c.spec = j["spec"].get<std::string>();
      take(j, "backend", c.backend);
      take(j, "external_cmd", c.external_cmd);
      take(j, "batch_size", c.batch_size);
      take(j, "timeout_ms", c.timeout_ms);
      take(j, "mislabel_rate", c.mislabel_rate);
      take(j, "workers", c.workers);
      take(j, "endpoint", c.endpoint);
      take(j, "thresholds", c.thresholds);
      take(j, "cutoff", c.cutoff);
      take(j, "by", c.by);
      take(j, "alpha", c.alpha);
      take(j, "level", c.level);
      take(j, "seed", c.seed);
      take(j, "truth", c.truth);
    } catch (const json::exception& e) {
      throw necro::ValidationError(std::string("config: ") + e.what());
    }
  }
  if (f.dataset) c.dataset = *f.dataset;
  if (f.out) c.out = *f.out;
  if (f.pred) c.pred = *f.pred;
  if (f.spec) c.spec = *f.spec;
  if (f.backend) c.backend = *f.backend;
  if (f.external_cmd) c.external_cmd = *f.external_cmd;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.timeout_ms) c.timeout_ms = *f.timeout_ms;
  if (f.mislabel_rate) c.mislabel_rate = *f.mislabel_rate;
  if (f.workers) c.workers = *f.workers;
  if (f.endpoint) c.endpoint = *f.endpoint;
  if (!f.thresholds.empty()) c.thresholds = f.thresholds;
  if (f.cutoff) c.cutoff = *f.cutoff;
  if (f.by) c.by = *f.by;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.level) c.level = *f.level;
  if (f.seed) c.seed = *f.seed;
  if (f.truth) c.truth = true;

  if (c.workers < 1) throw necro::ValidationError("--workers must be >= 1");
  if (c.by != "dl" && c.by != "pr") throw necro::ValidationError("--by must be dl or pr");
  for (double t : c.thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw necro::ValidationError("thresholds must lie in [0,1]");
  }
  return c;
}

void write_config(const RunConfig& c) {
  fs::create_directories(c.out);
  std::ofstream(c.out / "config.json") << c.to_json().dump(2) << '\n';
}

void progress(const std::string& msg) { std::cerr << "[necro] " << msg << std::endl; }

fs::path masks_dir(const RunConfig& c) { return c.pred ? *c.pred : c.out / "masks"; }

std::optional<fs::path> count_source(const RunConfig& c) {
  if (c.truth) return std::nullopt;
  return masks_dir(c);
}

necro::Dataset need_dataset(const RunConfig& c) {
  if (c.dataset.empty()) throw necro::ValidationError("--dataset is required");
  return necro::load_manifest(c.dataset);
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig& c) {
  if (!c.spec) throw necro::ValidationError("--spec is required");
  std::ifstream in(*c.spec);
  if (!in) throw necro::ValidationError("spec file not found: " + c.spec->string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw necro::ValidationError(c.spec->string() + ": " + e.what());
  }

  necro::SynthCohort cohort;
  if (j.contains("fractions")) {
    necro::SynthSpec s = necro::synth_spec_from_json(j);
    necro::SlideInfo info{"slide_000", s.width, s.height, s.levels};
    necro::CaseRecord rec;
    rec.id = "case_000";
    rec.slide_ids = {info.id};
    cohort.dataset.slides = {info};
    cohort.dataset.cases = {rec};
    cohort.slide_specs = {s};
    cohort.slide_truth = {necro::class_quotas(s.fractions, std::uint64_t(s.width) * s.height)};
  } else {
    cohort = necro::generate_cohort(necro::cohort_spec_from_json(j));
  }
  progress("writing " + std::to_string(cohort.dataset.slides.size()) + " slides to " + c.out.string());
  necro::materialize(cohort, c.out, c.workers);

  std::ofstream truth(c.out / "truth.csv");
  truth << "slide_id";
  for (int k = 0; k < necro::kNumClasses; ++k) truth << ',' << necro::class_name(static_cast<necro::TissueClass>(k));
  truth << '\n';
  for (std::size_t i = 0; i < cohort.dataset.slides.size(); ++i) {
    truth << cohort.dataset.slides[i].id;
    for (auto n : cohort.slide_truth[i].n) truth << ',' << n;
    truth << '\n';
  }
  write_config(c);
  return 0;
}

int cmd_segment(const RunConfig& c) {
  const necro::Dataset ds = need_dataset(c);
  necro::BackendConfig bc;
  bc.kind = necro::backend_kind_from_name(c.backend);
  bc.command = c.external_cmd;
  bc.mislabel_rate = c.mislabel_rate;
  bc.seed = c.seed;
  bc.batch_size = c.batch_size;
  bc.timeout = std::chrono::milliseconds(c.timeout_ms);
  if (bc.kind == necro::BackendKind::kExternal && bc.command.empty()) {
    throw necro::ValidationError("--external-cmd is required for the external backend");
  }
  write_config(c);
  necro::RunOptions opt{c.workers, c.batch_size};
  const auto log = necro::segment_dataset(ds, bc, masks_dir(c), opt, progress);

  json slides = json::array();
  for (const auto& r : log) {
    slides.push_back({{"slide_id", r.slide_id}, {"tiles", r.stats.tiles}, {"seconds", r.stats.seconds}});
  }
  std::ofstream(c.out / "run_log.json") << json{{"backend", c.backend}, {"workers", c.workers}, {"slides", slides}}.dump(2)
                                        << '\n';
  return 0;
}

std::vector<necro::CaseQuantification> quantify_all(const RunConfig& c, const necro::Dataset& ds) {
  return necro::quantify_cases(ds, necro::count_dataset(ds, count_source(c), c.workers));
}

int cmd_quantify(const RunConfig& c) {
  const necro::Dataset ds = need_dataset(c);
  write_config(c);
  const auto quant = quantify_all(c, ds);
  necro::write_cases_csv(c.out / "cases.csv", quant);
  progress("quantified " + std::to_string(quant.size()) + " cases");
  return 0;
}

int cmd_evaluate(const RunConfig& c) {
  const necro::Dataset ds = need_dataset(c);
  write_config(c);
  const auto quant = quantify_all(c, ds);
  std::vector<necro::CaseQuantification> evaluable;
  for (const auto& q : quant) {
    for (const auto& rec : ds.cases) {
      if (rec.id == q.case_id && necro::admitted(rec, necro::Stage::kRatio)) evaluable.push_back(q);
    }
  }
  const auto rep = necro::report_comparison(evaluable);
  necro::write_report_csv(c.out / "stats.csv", rep);
  necro::write_report_json(c.out / "stats.json", rep);
  necro::write_scatter_csv(c.out / "scatter.csv", rep);
  necro::write_scatter_svg(c.out / "scatter.svg", rep);

  if (!c.truth) {
    std::vector<std::pair<std::string, double>> miou;
    for (const auto& info : ds.slides) {
      if (!fs::exists(ds.mask_path(info.id))) continue;
      auto pred = necro::read_mask(necro::predicted_mask_path(masks_dir(c), info.id), info);
      auto truth = necro::read_mask(ds.mask_path(info.id), info);
      miou.emplace_back(info.id, necro::mean_iou(pred, truth));
    }
    if (!miou.empty()) necro::write_miou_csv(c.out / "miou.csv", miou);
  }
  progress("evaluated " + std::to_string(rep.rows[4].count) + " cases");
  return 0;
}

int cmd_survival(const RunConfig& c) {
  const necro::Dataset ds = need_dataset(c);
  write_config(c);
  const auto entries = necro::cohort_entries(ds, quantify_all(c, ds));
  const auto endpoint = necro::endpoint_from_name(c.endpoint.empty() ? "os" : c.endpoint);
  const auto source = c.by == "pr" ? necro::RatioSource::kReport : necro::RatioSource::kModel;
  const auto res = necro::stratify(entries, endpoint, c.cutoff, source);
  const std::string stem = "km_" + std::string(necro::endpoint_name(endpoint)) + "_" + c.by;
  necro::write_km_csv(c.out / (stem + ".csv"), res);
  necro::write_km_svg(c.out / (stem + ".svg"), res);
  std::ofstream(c.out / (stem + ".json")) << necro::stratification_json(res).dump(2) << '\n';
  progress(res.evaluable() ? "log-rank p = " + necro::format_p(res.test->p) : "unevaluable: " + res.unevaluable_reason);
  return 0;
}

int cmd_sweep(const RunConfig& c) {
  const necro::Dataset ds = need_dataset(c);
  write_config(c);
  const auto entries = necro::cohort_entries(ds, quantify_all(c, ds));
  std::vector<necro::Endpoint> endpoints;
  if (c.endpoint.empty()) {
    endpoints = {necro::Endpoint::kOverallSurvival, necro::Endpoint::kProgressionFree};
  } else {
    endpoints = {necro::endpoint_from_name(c.endpoint)};
  }
  std::vector<necro::SweepResult> sweeps;
  for (auto e : endpoints) sweeps.push_back(necro::sweep(entries, e, c.thresholds));
  necro::write_sweep_csv(c.out / "sweep.csv", sweeps);
  necro::write_sweep_json(c.out / "sweep.json", sweeps);
  for (const auto& s : sweeps) {
    progress(std::string(necro::endpoint_name(s.endpoint)) + " argmin cutoff " + necro::format_fixed(s.argmin, 2));
  }
  return 0;
}

int cmd_overlay(const RunConfig& c) {
  const necro::Dataset ds = need_dataset(c);
  write_config(c);
  for (const auto& info : ds.slides) {
    necro::SlideReader reader(ds.slide_dir(info.id), info);
    if (!reader.has_level(c.level)) throw necro::ValidationError("slide '" + info.id + "' has no level " + std::to_string(c.level));
    const fs::path mp = c.truth ? ds.mask_path(info.id) : necro::predicted_mask_path(masks_dir(c), info.id);
    const auto mask = necro::read_mask(mp, info);
    const auto img = necro::render_overlay(reader, mask, c.alpha, c.level);
    fs::create_directories(c.out / "overlays");
    necro::png::write_rgb(c.out / "overlays" / (info.id + ".png"), img);
  }
  progress("rendered " + std::to_string(ds.slides.size()) + " overlays");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Necrosis ratio quantification and survival stratification for whole-slide images"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON file supplying any flag (flags override it)");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--workers", f.workers, "Worker threads");
  };
  auto dataset_opts = [&](CLI::App* sub) {
    common(sub);
    sub->add_option("--dataset", f.dataset, "Dataset root (directory holding manifest.json)");
    sub->add_option("--pred", f.pred, "Predicted mask directory (default <out>/masks)");
    sub->add_flag("--truth", f.truth, "Use the dataset's ground-truth masks instead of predictions");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a JSON spec");
  common(synth);
  synth->add_option("--spec", f.spec, "Cohort or slide spec (JSON)");

  auto* segment = app.add_subcommand("segment", "Segment every slide of a dataset");
  dataset_opts(segment);
  segment->add_option("--backend", f.backend, "oracle | chromatic | external")
      ->check(CLI::IsMember({"oracle", "chromatic", "external"}));
  segment->add_option("--external-cmd", f.external_cmd, "Command run once per batch directory");
  segment->add_option("--batch-size", f.batch_size, "Tiles per backend call");
  segment->add_option("--timeout-ms", f.timeout_ms, "External backend timeout per batch");
  segment->add_option("--mislabel-rate", f.mislabel_rate, "Chromatic fault-injection rate");
  segment->add_option("--seed", f.seed, "Fault-injection seed");

  auto* quantify = app.add_subcommand("quantify", "Per-case necrosis ratios");
  dataset_opts(quantify);
  auto* evaluate = app.add_subcommand("evaluate", "Compare model ratios with reported ratios");
  dataset_opts(evaluate);

  auto* survival = app.add_subcommand("survival", "Kaplan-Meier curves and log-rank test at one cutoff");
  dataset_opts(survival);
  survival->add_option("--endpoint", f.endpoint)->check(CLI::IsMember({"os", "pfs"}));
  survival->add_option("--cutoff", f.cutoff, "Responder threshold on the ratio");
  survival->add_option("--by", f.by, "Ratio used for arms: dl (model) or pr (report)")->check(CLI::IsMember({"dl", "pr"}));

  auto* sweep = app.add_subcommand("sweep", "Log-rank p-values over a grid of cutoffs");
  dataset_opts(sweep);
  sweep->add_option("--endpoint", f.endpoint)->check(CLI::IsMember({"os", "pfs"}));
  sweep->add_option("--thresholds", f.thresholds, "Comma-separated cutoffs")->delimiter(',');

  auto* overlay = app.add_subcommand("overlay", "Render segmentation overlays");
  dataset_opts(overlay);
  overlay->add_option("--alpha", f.alpha, "Overlay opacity in [0,1]");
  overlay->add_option("--level", f.level, "Pyramid level factor to render at");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    const RunConfig cfg = resolve(name, f);
    if (name == "synth") return cmd_synth(cfg);
    if (name == "segment") return cmd_segment(cfg);
    if (name == "quantify") return cmd_quantify(cfg);
    if (name == "evaluate") return cmd_evaluate(cfg);
    if (name == "survival") return cmd_survival(cfg);
    if (name == "sweep") return cmd_sweep(cfg);
    if (name == "overlay") return cmd_overlay(cfg);
  } catch (const necro::BackendError& e) {
    std::cerr << "backend error: " << e.what() << std::endl;
    return 3;
  } catch (const necro::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return 2;
  } catch (const necro::UntestableError& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return 2;
  } catch (const necro::NoTumorError& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
