#pragma once

// Command-line front end. Every subcommand resolves the run configuration,
// writes it next to its outputs and reports failures through exit codes:
// 0 success, 2 configuration or usage error, 1 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nowcast/container_io.hpp"
#include "nowcast/explainability.hpp"
#include "nowcast/image_io.hpp"
#include "nowcast/run_config.hpp"
#include "nowcast/synthetic_storms.hpp"
#include "nowcast/training.hpp"
#include "nowcast/uncertainty.hpp"
#include "nowcast/verification.hpp"

namespace nowcast::cli {

namespace fs = std::filesystem;

inline const std::vector<std::string>& train_variants() {
  static const std::vector<std::string> v{"unet", "gnet", "gan", "aleatoric"};
  return v;
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  std::string checkpoint;
  std::vector<std::string> layers;
  std::optional<int> sample;
  std::vector<std::string> inputs;
  std::string variant;
  std::string kind;
};

inline RunConfig resolve(const Options& o) {
  auto overrides = env_overrides();
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects section.key=value, got '" + s + "'", s);
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.seed) overrides.emplace_back("seed", std::to_string(*o.seed));
  auto cfg = load_run_config_file(o.config, overrides);
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (!o.checkpoint.empty()) cfg.checkpoint = o.checkpoint;
  if (!o.layers.empty()) cfg.gradcam.layers = o.layers;
  if (o.sample) cfg.gradcam.sample = *o.sample;
  return cfg;
}

inline fs::path stage_dir(const RunConfig& cfg, const std::string& stage) {
  const fs::path dir = fs::path(cfg.output_dir) / stage;
  write_resolved_config(dir, cfg);
  std::ofstream(dir / "code_version.txt") << code_version() << "\n";
  return dir;
}

inline fs::path archive_path(const RunConfig& cfg) {
  return cfg.data.archive.empty() ? fs::path(cfg.output_dir) / "synth" / "archive.h5" : fs::path(cfg.data.archive);
}

inline fs::path container_path(const RunConfig& cfg) {
  return cfg.data.container.empty() ? fs::path(cfg.output_dir) / "prepare" / "dataset.h5" : fs::path(cfg.data.container);
}

inline DatasetContainer load_container(const RunConfig& cfg) {
  const auto path = container_path(cfg);
  if (!fs::exists(path)) throw ConfigError("dataset container not found: " + path.string() + " (run prepare-data first)", "data.container");
  return read_container(path);
}

struct LoadedModel {
  std::string variant;
  SmaAtNet<float> net;
};

inline LoadedModel load_model(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("a generator checkpoint is required (--checkpoint)", "checkpoint");
  const fs::path blob = cfg.checkpoint;
  if (!fs::exists(blob) || !fs::exists(sidecar_path(blob)))
    throw ConfigError("checkpoint or its metadata not found: " + blob.string(), "checkpoint");
  const auto meta = read_json(sidecar_path(blob));
  const auto& c = meta.at("config");
  LoadedModel m{c.value("variant", std::string("gnet")), SmaAtNet<float>(generator_config_from_json(c.at("generator")))};
  auto st = m.net.state();
  load_state(blob, st);
  return m;
}

inline const Sample& pick_sample(const std::vector<Sample>& test, int index) {
  if (test.empty()) throw ConfigError("the test split is empty", "data.container");
  if (index < 0 || std::size_t(index) >= test.size())
    throw ConfigError("sample index " + std::to_string(index) + " outside the test split (" + std::to_string(test.size()) + ")",
                      "gradcam.sample");
  return test[std::size_t(index)];
}

inline std::vector<double> flat(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

inline std::vector<double> plane(const Tensor<float>& maps, std::int64_t f) {
  const std::int64_t n = maps.dim(1) * maps.dim(2);
  return std::vector<double>(maps.data() + f * n, maps.data() + (f + 1) * n);
}

/// One row per sample, one column per lead time, shared colour scale.
inline Image lead_time_grid(const std::vector<Tensor<float>>& maps, const std::vector<std::string>& row_labels) {
  double hi = 0;
  for (const auto& m : maps)
    for (float v : m.values()) hi = std::max(hi, double(v));
  std::vector<std::vector<Image>> rows;
  std::vector<std::vector<std::string>> caps;
  for (std::size_t s = 0; s < maps.size(); ++s) {
    rows.emplace_back();
    caps.emplace_back();
    for (std::int64_t f = 0; f < maps[s].dim(0); ++f) {
      rows.back().push_back(render_field(plane(maps[s], f), int(maps[s].dim(1)), int(maps[s].dim(2)), 0.0, hi > 0 ? hi : 1.0));
      caps.back().push_back(f == 0 ? row_labels[s] + " +5" : "+" + std::to_string(5 * (f + 1)));
    }
  }
  return tile_grid(rows, caps);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline int cmd_synth(const RunConfig& cfg, std::ostream& log) {
  const auto dir = stage_dir(cfg, "synth");
  const auto archive = gen_storm_archive(cfg.synth);
  const auto path = archive_path(cfg);
  write_archive(path, archive.frames, archive.landmask);
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : archive.cells)
    cells.push_back({{"row", c.row}, {"col", c.col}, {"amplitude", c.amplitude}, {"sigma", c.sigma}});
  write_json(dir / "synth_summary.json", {{"archive", path.string()},
                                          {"frames", archive.frames.size()},
                                          {"first", format_timestamp(archive.frames.front().timestamp)},
                                          {"last", format_timestamp(archive.frames.back().timestamp)},
                                          {"cells", cells}});
  log << "synth: " << archive.frames.size() << " frames -> " << path.string() << "\n";
  return 0;
}

inline int cmd_prepare(const RunConfig& cfg, std::ostream& log) {
  const auto dir = stage_dir(cfg, "prepare");
  const auto src = archive_path(cfg);
  auto archive = ingest_archive(src, cfg.data.schema);
  const auto gaps = count_gaps(archive.frames);
  auto prepared = prepare_dataset(std::move(archive.frames), archive.landmask, cfg.prepare.to_prepare_config());
  prepared.container.metadata["source"] = src.string();
  prepared.container.metadata["code_version"] = code_version();
  const auto out = container_path(cfg);
  write_container(out, prepared.container);
  write_json(dir / "qc_report.json", to_json(prepared.qc));
  const auto& c = prepared.container;
  const auto candidates = prepared.candidate_windows_train + prepared.candidate_windows_test;
  const auto kept = c.train.size() + c.test.size();
  write_json(dir / "dataset_summary.json",
             {{"container", out.string()},
              {"train_samples", c.train.size()},
              {"test_samples", c.test.size()},
              {"candidate_windows_train", prepared.candidate_windows_train},
              {"candidate_windows_test", prepared.candidate_windows_test},
              {"selected_percent", candidates ? 100.0 * double(kept) / double(candidates) : 0.0},
              {"norm_max", c.norm_max},
              {"gaps", gaps},
              {"metadata", c.metadata}});
  log << "prepare-data: " << c.train.size() << " train / " << c.test.size() << " test samples -> " << out.string() << "\n";
  return 0;
}

inline int cmd_train(RunConfig cfg, const std::string& variant, std::ostream& log) {
  if (std::find(train_variants().begin(), train_variants().end(), variant) == train_variants().end())
    throw ConfigError("unknown training variant '" + variant + "'", "variant");
  auto& g = cfg.generator;
  if (variant == "unet") g.dual_encoder = false, g.aleatoric_head = false;
  if (variant == "gnet" || variant == "gan") g.dual_encoder = true, g.aleatoric_head = false;
  if (variant == "aleatoric") g.dual_encoder = true, g.aleatoric_head = true;
  const auto dir = stage_dir(cfg, "train_" + variant);
  const auto data = load_container(cfg);
  auto [train, val] = split_validation(data.train, cfg.data.validation_fraction);

  SmaAtNet<float> model(g);
  TrainRun run;
  run.checkpoint_dir = dir / "checkpoints";
  run.resume = cfg.train.resume;
  run.model_config = {{"variant", variant}, {"generator", to_json(g)}};
  run.norm_max = data.norm_max;
  run.on_epoch = [&](const EpochRow& r) {
    log << "epoch " << r.epoch << "  val_loss " << r.val_loss << "  val_mse " << r.val_mse << "  lr_g " << r.lr_g
        << (r.lr_g_reduced ? " (reduced)" : "") << "\n";
  };
  TrainResult result;
  if (variant == "gan") {
    PatchDiscriminator<float> disc(cfg.discriminator);
    result = train_gan(model, disc, train, val, cfg.train.cfg, run);
  } else {
    result = train_supervised(model, train, val, cfg.train.cfg, run);
  }
  write_json(dir / "train_summary.json", {{"variant", variant},
                                          {"train_samples", train.size()},
                                          {"validation_samples", val.size()},
                                          {"epochs_run", result.log.rows.empty() ? 0 : result.log.rows.back().epoch},
                                          {"best_epoch", result.best_epoch},
                                          {"best_val_loss", result.best_val_loss},
                                          {"best_checkpoint", result.best_checkpoint.string()},
                                          {"discriminator_checkpoint", result.discriminator_checkpoint.string()},
                                          {"d_updates", result.d_updates}});
  log << "train " << variant << ": best epoch " << result.best_epoch << " -> " << result.best_checkpoint.string() << "\n";
  return 0;
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  auto model = load_model(cfg);
  const auto data = load_container(cfg);
  const auto dir = stage_dir(cfg, "evaluate");
  const auto report = evaluate_model(model.net, data.test, data.norm_max, data.landmask64, cfg.evaluate.opts, model.variant);
  write_metrics(dir / model.variant, report);
  log << "evaluate " << model.variant << ": mse " << report.overall.mse << " (mm/5min)^2 over " << report.overall.samples
      << " samples\n";
  if (cfg.evaluate.persistence_baseline) {
    const auto base = evaluate_persistence(data.test, data.norm_max, data.landmask64, cfg.evaluate.opts);
    write_metrics(dir / "persistence", base);
    log << "evaluate persistence: mse " << base.overall.mse << "\n";
  }
  return 0;
}

inline int cmd_predict(const RunConfig& cfg, std::ostream& log) {
  auto model = load_model(cfg);
  const auto data = load_container(cfg);
  if (data.test.empty()) throw ConfigError("the test split is empty", "data.container");
  const auto dir = stage_dir(cfg, "predict");
  const auto preds = predict_split(model.net, data.test, cfg.evaluate.opts);
  Tensor<float> all({std::int64_t(preds.size()), kOutputFrames, kCropSize, kCropSize});
  std::vector<Timestamp> t0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::copy(preds[i].data(), preds[i].data() + preds[i].size(), all.data() + i * preds[i].size());
    t0.push_back(data.test[i].t0);
  }
  write_arrays(dir / "predictions.h5", {{"prediction", all}}, t0);
  write_json(dir / "predictions.json", {{"samples", preds.size()},
                                        {"units", "normalised; multiply by norm_max for stored units (0.01 mm)"},
                                        {"norm_max", data.norm_max},
                                        {"runs", cfg.evaluate.opts.runs},
                                        {"variant", model.variant}});
  const auto& s = data.test.front();
  const auto in = accumulate_hour(s.x, data.norm_max), truth = accumulate_hour(s.y, data.norm_max),
             pred = accumulate_hour(preds.front(), data.norm_max);
  double hi = 1e-9;
  for (const auto* t : {&in, &truth, &pred})
    for (double v : t->values()) hi = std::max(hi, v);
  write_png(dir / "first_sample.png",
            tile_grid({{render_field(flat(in), 64, 64, 0, hi, 2), render_field(flat(truth), 64, 64, 0, hi, 2),
                        render_field(flat(pred), 64, 64, 0, hi, 2)}},
                      {{"input hour (mm)", "truth hour (mm)", "prediction hour (mm)"}}));
  log << "predict: " << preds.size() << " samples -> " << (dir / "predictions.h5").string() << "\n";
  return 0;
}

inline int cmd_uncertainty(const RunConfig& cfg, const std::string& kind, std::ostream& log) {
  if (kind != "epistemic" && kind != "aleatoric") throw ConfigError("unknown uncertainty kind '" + kind + "'", "kind");
  auto model = load_model(cfg);
  const auto data = load_container(cfg);
  if (data.test.empty()) throw ConfigError("the test split is empty", "data.container");
  const auto& u = cfg.uncertainty;
  const auto dir = stage_dir(cfg, "uncertainty_" + kind);
  const std::size_t n_export = std::min<std::size_t>(std::size_t(std::max(0, u.export_samples)), data.test.size());
  std::vector<Tensor<float>> means, maps;
  std::vector<Timestamp> t0;
  std::vector<std::string> labels;

  if (kind == "epistemic") {
    const auto summary = epistemic_summary(model.net, data.test, u.k, cfg.seed, u.batch_size, u.stochastic);
    write_json(dir / "epistemic_summary.json", to_json(summary));
    std::ofstream csv(dir / "epistemic_by_leadtime.csv");
    csv.precision(10);
    csv << "lead_minutes,variance\n";
    for (int f = 0; f < kOutputFrames; ++f) csv << 5 * (f + 1) << ',' << summary.by_leadtime[f] << '\n';
    for (std::size_t i = 0; i < n_export; ++i) {
      auto r = ttd_predict(model.net, data.test[i], u.k, cfg.seed + i, u.stochastic);
      means.push_back(r.mean);
      maps.push_back(r.uncertainty.maps);
    }
    log << "uncertainty epistemic: mean variance " << summary.overall << " over " << summary.samples << " samples\n";
  } else {
    if (!model.net.has_log_var())
      throw ConfigError("the checkpoint has no log-variance head (train the aleatoric variant)", "checkpoint");
    std::array<double, kOutputFrames> lead{};
    std::map<std::string, double> season_sum;
    std::map<std::string, std::size_t> season_n;
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      auto r = aleatoric_infer(model.net, data.test[i]);
      const std::int64_t pl = r.uncertainty.maps.dim(1) * r.uncertainty.maps.dim(2);
      double sample_mean = 0;
      for (int f = 0; f < kOutputFrames; ++f) {
        double sum = 0;
        for (std::int64_t q = 0; q < pl; ++q) sum += r.uncertainty.maps[f * pl + q];
        lead[f] += sum / double(pl);
        sample_mean += sum / double(pl) / kOutputFrames;
      }
      const std::string season = season_name(season_of(data.test[i]));
      season_sum[season] += sample_mean;
      ++season_n[season];
      if (i < n_export) means.push_back(r.prediction), maps.push_back(r.uncertainty.maps);
    }
    nlohmann::json j{{"samples", data.test.size()}, {"units", "normalised^2"}};
    double overall = 0;
    for (auto& v : lead) overall += (v /= double(data.test.size())) / kOutputFrames;
    j["overall"] = overall;
    j["by_leadtime"] = lead;
    for (const auto& [s, sum] : season_sum) j["by_season"][s] = sum / double(season_n[s]);
    j["season_samples"] = season_n;
    write_json(dir / "aleatoric_summary.json", j);
    log << "uncertainty aleatoric: mean variance " << overall << "\n";
  }
  if (n_export) {
    Tensor<float> m({std::int64_t(n_export), kOutputFrames, kCropSize, kCropSize}), v(m.shape());
    for (std::size_t i = 0; i < n_export; ++i) {
      std::copy(means[i].data(), means[i].data() + means[i].size(), m.data() + i * means[i].size());
      std::copy(maps[i].data(), maps[i].data() + maps[i].size(), v.data() + i * maps[i].size());
      t0.push_back(data.test[i].t0);
      labels.push_back("#" + std::to_string(i));
    }
    write_arrays(dir / "maps.h5", {{"mean", m}, {"variance", v}}, t0);
    write_png(dir / "variance_maps.png", lead_time_grid(maps, labels));
  }
  return 0;
}

inline std::string site_file_name(std::string site) {
  std::replace(site.begin(), site.end(), '/', '.');
  return site;
}

inline int cmd_gradcam(const RunConfig& cfg, std::ostream& log) {
  auto model = load_model(cfg);
  const auto data = load_container(cfg);
  const auto& s = pick_sample(data.test, cfg.gradcam.sample);
  const auto dir = stage_dir(cfg, "gradcam");
  std::vector<GradCamResult> maps;
  if (cfg.gradcam.layers.empty()) {
    auto grid = heatmap_grid(model.net, s, data.norm_max, cfg.gradcam.threshold_mm);
    write_png(dir / "gradcam_grid.png", grid.figure);
    maps = std::move(grid.heatmaps);
  } else {
    maps = gradcam_layers(model.net, s, data.norm_max, cfg.gradcam.layers, cfg.gradcam.threshold_mm);
    for (const auto& m : maps) write_png(dir / (site_file_name(m.layer) + ".png"), render_field(flat(m.heatmap), 64, 64, 0, 1, 4));
  }
  std::vector<std::pair<std::string, Tensor<float>>> arrays;
  nlohmann::json j{{"sample", cfg.gradcam.sample}, {"t0", format_timestamp(s.t0)}, {"heatmaps", nlohmann::json::array()}};
  for (const auto& m : maps) {
    arrays.emplace_back(site_file_name(m.layer), detail::to_float(m.heatmap));
    j["heatmaps"].push_back(to_json(m));
  }
  write_arrays(dir / "heatmaps.h5", arrays);
  write_json(dir / "gradcam.json", j);
  if (!maps.empty() && maps.front().no_rain) log << "gradcam: no pixel predicted rainy; heatmaps are all zero\n";
  log << "gradcam: " << maps.size() << " heatmaps -> " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

inline std::vector<fs::path> find_files(const std::vector<fs::path>& roots, const std::string& name) {
  std::set<fs::path> found;
  for (const auto& r : roots) {
    if (fs::is_regular_file(r) && r.filename() == name) found.insert(r);
    if (!fs::is_directory(r)) continue;
    for (const auto& e : fs::recursive_directory_iterator(r))
      if (e.is_regular_file() && e.path().filename() == name) found.insert(e.path());
  }
  return {found.begin(), found.end()};
}

inline const std::vector<std::string>& season_order() {
  static const std::vector<std::string> s{"winter", "spring", "summer", "autumn"};
  return s;
}

inline std::vector<std::string> lead_labels() {
  std::vector<std::string> l;
  for (int f = 1; f <= kOutputFrames; ++f) l.push_back(std::to_string(5 * f));
  return l;
}

inline int cmd_report(const RunConfig& cfg, const std::vector<std::string>& inputs, std::ostream& log) {
  std::vector<fs::path> roots(inputs.begin(), inputs.end());
  if (roots.empty()) roots.push_back(cfg.output_dir);
  const auto metric_files = find_files(roots, "metrics.json");
  const auto log_files = find_files(roots, "train_log.json");
  const auto epi_files = find_files(roots, "epistemic_summary.json");
  if (metric_files.empty() && log_files.empty() && epi_files.empty())
    throw ConfigError("no metrics, training logs or uncertainty summaries found under the inputs", "input");
  const auto dir = stage_dir(cfg, "report");
  std::size_t artifacts = 0;

  std::vector<MetricsReport> reports;
  for (const auto& f : metric_files) reports.push_back(metrics_report_from_json(read_json(f)));
  if (!reports.empty()) {
    // Summary table: one row per model, MSE then each skill score per threshold.
    std::vector<double> thresholds;
    for (const auto& t : reports.front().overall.thresholds) thresholds.push_back(t.threshold_mm);
    std::ofstream csv(dir / "summary_table.csv"), md(dir / "summary_table.md");
    csv.precision(6);
    md.precision(5);
    csv << "model,mse";
    md << "| model | MSE |";
    for (const char* score : {"f1", "csi", "hss", "mcc"})
      for (double t : thresholds) {
        csv << ',' << score << '@' << t << "mm";
        md << ' ' << score << '@' << t << "mm |";
      }
    csv << '\n';
    md << "\n|---|---|";
    for (std::size_t k = 0; k < 4 * thresholds.size(); ++k) md << "---|";
    md << '\n';
    for (const auto& r : reports) {
      csv << r.model << ',' << r.overall.mse;
      md << "| " << r.model << " | " << r.overall.mse << " |";
      for (auto pick : {&ThresholdScores::f1, &ThresholdScores::csi, &ThresholdScores::hss, &ThresholdScores::mcc})
        for (std::size_t k = 0; k < thresholds.size(); ++k) {
          const auto* ts = k < r.overall.thresholds.size() ? &r.overall.thresholds[k] : nullptr;
          const double v = ts ? (ts->*pick).value : NAN;
          csv << ',' << v;
          md << ' ' << v << ((ts && (ts->*pick).undefined) ? "*" : "") << " |";
        }
      csv << '\n';
      md << '\n';
    }
    md << "\n`*` marks a zero denominator (reported as 0).\n";

    std::vector<Series> lead;
    for (const auto& r : reports)
      lead.push_back({r.model, std::vector<double>(r.overall.per_leadtime_mse.begin(), r.overall.per_leadtime_mse.end())});
    write_png(dir / "mse_by_leadtime.png", line_chart(lead, lead_labels(), {720, 420, "MSE per lead time", "lead time (min)", "MSE (mm/5min)^2"}));

    std::vector<std::string> seasons;
    for (const auto& s : season_order())
      for (const auto& r : reports)
        if (r.seasons.count(s)) {
          seasons.push_back(s);
          break;
        }
    if (!seasons.empty()) {
      auto by_season = [&](auto value) {
        std::vector<Series> out;
        for (const auto& r : reports) {
          Series s{r.model, {}};
          for (const auto& name : seasons) s.values.push_back(r.seasons.count(name) ? value(r.seasons.at(name)) : NAN);
          out.push_back(std::move(s));
        }
        return out;
      };
      write_png(dir / "mse_by_season.png", bar_chart(by_season([](const MetricsBlock& b) { return b.mse; }), seasons,
                                                     {720, 420, "MSE per season", "season", "MSE (mm/5min)^2"}));
      for (std::size_t k = 0; k < thresholds.size(); ++k) {
        std::ostringstream thr;
        thr << thresholds[k];
        const auto series = by_season([k](const MetricsBlock& b) { return k < b.thresholds.size() ? b.thresholds[k].f1.value : NAN; });
        write_png(dir / ("f1_by_season_" + thr.str() + "mm.png"),
                  bar_chart(series, seasons, {720, 420, "F1 per season at " + thr.str() + " mm/h", "season", "F1"}));
      }
    }
    artifacts += reports.size();
  }

  if (!log_files.empty()) {
    std::vector<Series> curves;
    std::size_t longest = 0;
    for (const auto& f : log_files) {
      const auto tl = TrainLog::from_json(read_json(f));
      Series s{f.parent_path().parent_path().filename().string(), {}};
      for (const auto& row : tl.rows) s.values.push_back(row.val_loss);
      longest = std::max(longest, s.values.size());
      curves.push_back(std::move(s));
    }
    std::vector<std::string> epochs;
    for (std::size_t e = 0; e < longest; ++e) epochs.push_back(longest <= 25 || e % (longest / 10 + 1) == 0 ? std::to_string(e) : "");
    write_png(dir / "validation_loss.png", line_chart(curves, epochs, {720, 420, "validation loss", "epoch", "loss"}));
    artifacts += log_files.size();
  }

  if (!epi_files.empty()) {
    std::vector<Series> lead, season;
    for (const auto& f : epi_files) {
      const auto j = read_json(f);
      const auto label = f.parent_path().parent_path().filename().string();
      lead.push_back({label, j.at("by_leadtime").get<std::vector<double>>()});
      Series s{label, {}};
      for (const auto& name : season_order()) s.values.push_back(j["by_season"].value(name, NAN));
      season.push_back(std::move(s));
    }
    write_png(dir / "epistemic_by_leadtime.png",
              line_chart(lead, lead_labels(), {720, 420, "epistemic variance per lead time", "lead time (min)", "variance"}));
    write_png(dir / "epistemic_by_season.png",
              bar_chart(season, season_order(), {720, 420, "epistemic variance per season", "season", "variance"}));
    artifacts += epi_files.size();
  }
  log << "report: " << artifacts << " inputs -> " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Radar precipitation nowcasting: data preparation, training, verification, uncertainty and explanation"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* c) {
    c->add_option("-c,--config", o.config, "YAML configuration file");
    c->add_option("--set", o.sets, "override as section.key=value (repeatable)");
    c->add_option("--seed", o.seed, "top-level seed");
    c->add_option("-o,--output-dir", o.output_dir, "run directory");
  };
  auto with_checkpoint = [&](CLI::App* c) { c->add_option("--checkpoint", o.checkpoint, "generator checkpoint (.bin)"); };

  auto* synth = app.add_subcommand("synth", "generate a synthetic radar archive");
  auto* prepare = app.add_subcommand("prepare-data", "clutter filter, crop, normalise, select windows and build masks");
  auto* train = app.add_subcommand("train", "train a model variant");
  train->add_option("variant", o.variant, "unet | gnet | gan | aleatoric")->required()->check(CLI::IsMember(train_variants()));
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  auto* predict = app.add_subcommand("predict", "write test-split predictions");
  auto* unc = app.add_subcommand("uncertainty", "epistemic (test-time dropout) or aleatoric uncertainty maps");
  unc->add_option("kind", o.kind, "epistemic | aleatoric")->required()->check(CLI::IsMember({"epistemic", "aleatoric"}));
  auto* gradcam_cmd = app.add_subcommand("gradcam", "activation heatmaps for one test sample");
  gradcam_cmd->add_option("--layer", o.layers, "activation site such as enc_map/d1/cbam (repeatable; default: all)");
  gradcam_cmd->add_option("--sample", o.sample, "test-split index");
  auto* report = app.add_subcommand("report", "tables and charts from stored results");
  report->add_option("-i,--input", o.inputs, "result directories to scan (default: the run directory)");
  for (auto* c : {synth, prepare, train, evaluate, predict, unc, gradcam_cmd, report}) common(c);
  for (auto* c : {evaluate, predict, unc, gradcam_cmd}) with_checkpoint(c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  try {
    const auto cfg = resolve(o);
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (prepare->parsed()) return cmd_prepare(cfg, out);
    if (train->parsed()) return cmd_train(cfg, o.variant, out);
    if (evaluate->parsed()) return cmd_evaluate(cfg, out);
    if (predict->parsed()) return cmd_predict(cfg, out);
    if (unc->parsed()) return cmd_uncertainty(cfg, o.kind, out);
    if (gradcam_cmd->parsed()) return cmd_gradcam(cfg, out);
    if (report->parsed()) return cmd_report(cfg, o.inputs, out);
  } catch (const ConfigError& e) {
    err << "configuration error [" << e.key() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace nowcast::cli
