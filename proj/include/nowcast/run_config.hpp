#pragma once

// Declarative run configuration: a YAML file with one section per component,
// overridden by NOWCAST_<SECTION>__<KEY> environment variables and then by
// command-line `section.key=value` assignments. Unknown keys are rejected.

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nowcast/checkpoint.hpp"
#include "nowcast/discriminator.hpp"
#include "nowcast/generator.hpp"
#include "nowcast/synthetic_storms.hpp"
#include "nowcast/training.hpp"
#include "nowcast/verification.hpp"

extern char** environ;

namespace nowcast {

inline constexpr const char* kEnvPrefix = "NOWCAST_";

struct DataSection {
  std::string archive;             // raw archive (written by synth, read by prepare-data)
  std::string schema = "generic-h5";
  std::string container;           // prepared dataset
  double validation_fraction = 0.1;
};

struct PrepareSection {
  std::optional<int> crop_row, crop_col;
  std::optional<Timestamp> test_start;
  double test_fraction = 0.25;
  double rain_fraction_threshold = 0.5;
  RainyCriterion rainy_criterion = RainyCriterion::mean_over_outputs;
  bool clutter_filter = true;
  std::int64_t year_sum = 130000;
  std::int64_t day_sum = 17400;
  Exceedance mask_rule = Exceedance::strict;

  PrepareConfig to_prepare_config() const {
    PrepareConfig p;
    if (crop_row || crop_col) {
      if (!crop_row || !crop_col) throw ConfigError("crop_row and crop_col must be given together", "prepare.crop_row");
      p.crop = CropSpec{*crop_row, *crop_col};
    }
    p.test_start = test_start;
    p.test_fraction = test_fraction;
    p.selection.rain_fraction_threshold = rain_fraction_threshold;
    p.selection.criterion = rainy_criterion;
    p.clutter_filter = clutter_filter;
    p.clutter.year_sum = year_sum;
    p.clutter.day_sum = day_sum;
    p.mask_rule = mask_rule;
    return p;
  }
};

struct TrainSection {
  TrainConfig cfg;
  bool resume = false;
};

struct EvaluateSection {
  EvalOptions opts;
  bool persistence_baseline = true;
};

struct UncertaintySection {
  int k = 10;
  int batch_size = 8;
  bool stochastic = true;
  int export_samples = 4;  // maps written as PNG/arrays for the first n test samples
};

struct GradcamSection {
  std::vector<std::string> layers;  // empty: every registered site
  double threshold_mm = 0.5;
  int sample = 0;                   // test-split index
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::string checkpoint;
  DataSection data;
  StormConfig synth;
  PrepareSection prepare;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  TrainSection train;
  EvaluateSection evaluate;
  UncertaintySection uncertainty;
  GradcamSection gradcam;
};

// ---------------------------------------------------------------------------
// Scalar conversion
// ---------------------------------------------------------------------------

inline Timestamp parse_timestamp(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char tail = 0;
  const int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &sec, &tail);
  if (!(n == 3 || (n == 7 && tail == 'Z') || n == 6))
    throw ArgumentError("expected an ISO-8601 UTC timestamp (YYYY-MM-DD[THH:MM:SSZ]), got '" + s + "'");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)}, std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 || sec < 0)
    throw ArgumentError("invalid date or time in '" + s + "'");
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{sec};
}

namespace detail {

template <class V>
struct YamlValue {
  static V read(const YAML::Node& n) { return n.as<V>(); }
  static YAML::Node write(const V& v) { return YAML::Node(v); }
};

// Shortest representation that reads back to the same double.
template <>
struct YamlValue<double> {
  static double read(const YAML::Node& n) { return n.as<double>(); }
  static YAML::Node write(const double& v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return YAML::Node(std::string(buf, r.ptr));
  }
};

template <>
struct YamlValue<Timestamp> {
  static Timestamp read(const YAML::Node& n) { return parse_timestamp(n.as<std::string>()); }
  static YAML::Node write(const Timestamp& t) { return YAML::Node(format_timestamp(t)); }
};

template <class V>
struct YamlValue<std::optional<V>> {
  static std::optional<V> read(const YAML::Node& n) {
    if (n.IsNull()) return std::nullopt;
    return YamlValue<V>::read(n);
  }
  static YAML::Node write(const std::optional<V>& v) { return v ? YamlValue<V>::write(*v) : YAML::Node(YAML::NodeType::Null); }
};

template <>
struct YamlValue<std::pair<double, double>> {
  static std::pair<double, double> read(const YAML::Node& n) {
    if (!n.IsSequence() || n.size() != 2) throw ArgumentError("expected a two-element list");
    return {n[0].as<double>(), n[1].as<double>()};
  }
  static YAML::Node write(const std::pair<double, double>& p) {
    YAML::Node n(YAML::NodeType::Sequence);
    n.push_back(YamlValue<double>::write(p.first));
    n.push_back(YamlValue<double>::write(p.second));
    n.SetStyle(YAML::EmitterStyle::Flow);
    return n;
  }
};

template <class V>
struct YamlValue<std::vector<V>> {
  static std::vector<V> read(const YAML::Node& n) {
    if (!n.IsSequence()) throw ArgumentError("expected a list");
    std::vector<V> out;
    for (const auto& e : n) out.push_back(YamlValue<V>::read(e));
    return out;
  }
  static YAML::Node write(const std::vector<V>& v) {
    YAML::Node n(YAML::NodeType::Sequence);
    for (const auto& e : v) n.push_back(YamlValue<V>::write(e));
    n.SetStyle(YAML::EmitterStyle::Flow);
    return n;
  }
};

template <class E>
struct EnumNames;

template <>
struct EnumNames<RainyCriterion> {
  static constexpr std::pair<RainyCriterion, const char*> values[] = {{RainyCriterion::mean_over_outputs, "mean_over_outputs"},
                                                                      {RainyCriterion::every_output, "every_output"}};
};

template <>
struct EnumNames<Exceedance> {
  static constexpr std::pair<Exceedance, const char*> values[] = {{Exceedance::strict, "strict"},
                                                                  {Exceedance::inclusive, "inclusive"}};
};

template <class E>
  requires std::is_enum_v<E>
struct YamlValue<E> {
  static E read(const YAML::Node& n) {
    const auto s = n.as<std::string>();
    std::string names;
    for (const auto& [v, name] : EnumNames<E>::values) {
      if (s == name) return v;
      names += std::string(names.empty() ? "" : ", ") + name;
    }
    throw ArgumentError("expected one of " + names + ", got '" + s + "'");
  }
  static YAML::Node write(const E& e) {
    for (const auto& [v, name] : EnumNames<E>::values)
      if (v == e) return YAML::Node(std::string(name));
    return YAML::Node("?");
  }
};

/// Reads known keys from one mapping and remembers which were consumed.
class Reader {
 public:
  Reader(std::string section, YAML::Node node) : section_(std::move(section)), node_(std::move(node)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError("section must be a mapping", section_);
  }

  template <class V>
  void operator()(const char* key, V& v) {
    seen_.insert(key);
    if (!node_ || node_.IsNull()) return;
    const YAML::Node n = node_[key];
    if (!n.IsDefined()) return;
    try {
      v = YamlValue<V>::read(n);
    } catch (const std::exception& e) {
      throw ConfigError("bad value for " + qualified(key) + ": " + e.what(), qualified(key));
    }
  }

  bool has(const char* key) const { return node_ && node_.IsMap() && node_[key].IsDefined(); }

  void reject_unknown() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ConfigError("unknown configuration key " + qualified(key), qualified(key));
    }
  }

 private:
  std::string qualified(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }

  std::string section_;
  YAML::Node node_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  template <class V>
  void operator()(const char* key, V& v) {
    node_[key] = YamlValue<V>::write(v);
  }
  YAML::Node node() const { return node_; }

 private:
  YAML::Node node_{YAML::NodeType::Map};
};

// One field list per section serves both reading and writing.

template <class F>
void visit(DataSection& s, F& f) {
  f("archive", s.archive);
  f("schema", s.schema);
  f("container", s.container);
  f("validation_fraction", s.validation_fraction);
}

template <class F>
void visit(StormConfig& s, F& f) {
  f("seed", s.seed);
  f("n_frames", s.n_frames);
  f("n_cells", s.n_cells);
  f("amplitude_range", s.amplitude_range);
  f("cell_sigma_range", s.cell_sigma_range);
  f("velocity", s.velocity);
  f("growth_rate", s.growth_rate);
  f("noise_sigma", s.noise_sigma);
  f("rows", s.rows);
  f("cols", s.cols);
  f("start", s.start);
  f("land_radius", s.land_radius);
}

template <class F>
void visit(PrepareSection& s, F& f) {
  f("crop_row", s.crop_row);
  f("crop_col", s.crop_col);
  f("test_start", s.test_start);
  f("test_fraction", s.test_fraction);
  f("rain_fraction_threshold", s.rain_fraction_threshold);
  f("rainy_criterion", s.rainy_criterion);
  f("clutter_filter", s.clutter_filter);
  f("year_sum", s.year_sum);
  f("day_sum", s.day_sum);
  f("mask_rule", s.mask_rule);
}

template <class F>
void visit(GeneratorConfig& s, F& f) {
  f("in_frames", s.in_frames);
  f("mask_channels", s.mask_channels);
  f("out_frames", s.out_frames);
  f("encoder_widths", s.encoder_widths);
  f("decoder_widths", s.decoder_widths);
  f("dropout_p", s.dropout_p);
  f("dual_encoder", s.dual_encoder);
  f("aleatoric_head", s.aleatoric_head);
  f("width_scale", s.width_scale);
  f("cbam_reduction", s.cbam_reduction);
  f("cbam_spatial_kernel", s.cbam_spatial_kernel);
  f("seed", s.seed);
}

template <class F>
void visit(DiscriminatorConfig& s, F& f) {
  f("in_channels", s.in_channels);
  f("stage_widths", s.stage_widths);
  f("leaky_slope", s.leaky_slope);
  f("cbam_reduction", s.cbam_reduction);
  f("cbam_spatial_kernel", s.cbam_spatial_kernel);
  f("input_size", s.input_size);
  f("width_scale", s.width_scale);
  f("seed", s.seed);
}

template <class F>
void visit(TrainSection& s, F& f) {
  auto& c = s.cfg;
  f("max_epochs", c.max_epochs);
  f("batch_size", c.batch_size);
  f("lr_generator", c.lr_generator);
  f("lr_discriminator", c.lr_discriminator);
  f("beta1", c.beta1);
  f("beta2", c.beta2);
  f("early_stop_patience", c.early_stop_patience);
  f("plateau_patience", c.plateau_patience);
  f("plateau_factor", c.plateau_factor);
  f("lambda", c.lambda);
  f("d_update_every", c.d_update_every);
  f("seed", c.seed);
  f("epsilon_log", c.epsilon_log);
  f("non_saturating", c.non_saturating);
  f("max_iterations", c.max_iterations);
  f("shuffle", c.shuffle);
  f("resume", s.resume);
}

template <class F>
void visit(EvaluateSection& s, F& f) {
  auto& o = s.opts;
  f("runs", o.runs);
  f("stochastic", o.stochastic);
  f("thresholds", o.thresholds);
  f("by_season", o.by_season);
  f("batch_size", o.batch_size);
  f("seed", o.seed);
  f("rule", o.rule);
  f("persistence_baseline", s.persistence_baseline);
}

template <class F>
void visit(UncertaintySection& s, F& f) {
  f("k", s.k);
  f("batch_size", s.batch_size);
  f("stochastic", s.stochastic);
  f("export_samples", s.export_samples);
}

template <class F>
void visit(GradcamSection& s, F& f) {
  f("layers", s.layers);
  f("threshold_mm", s.threshold_mm);
  f("sample", s.sample);
}

template <class F>
void visit_sections(RunConfig& c, F&& f) {
  f("data", c.data);
  f("synth", c.synth);
  f("prepare", c.prepare);
  f("generator", c.generator);
  f("discriminator", c.discriminator);
  f("train", c.train);
  f("evaluate", c.evaluate);
  f("uncertainty", c.uncertainty);
  f("gradcam", c.gradcam);
}

inline std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

/// Parses `text` as a YAML scalar or flow collection so overrides like "[1, 2]" become lists.
inline YAML::Node parse_override(const std::string& key, const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot parse override for " + key + ": " + e.what(), key);
  }
}

inline void assign_dotted(YAML::Node& root, const std::string& dotted, const YAML::Node& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) {
    root[dotted] = value;
    return;
  }
  const auto section = dotted.substr(0, dot), key = dotted.substr(dot + 1);
  if (section.empty() || key.empty() || key.find('.') != std::string::npos)
    throw ConfigError("override keys look like section.key, got '" + dotted + "'", dotted);
  if (root[section].IsDefined() && !root[section].IsMap()) throw ConfigError("section must be a mapping", section);
  YAML::Node sec = root[section];
  sec[key] = value;
  root[section] = sec;
}

}  // namespace detail

/// Environment overrides: NOWCAST_SEED, NOWCAST_OUTPUT_DIR, NOWCAST_TRAIN__BATCH_SIZE, ...
inline std::vector<std::pair<std::string, std::string>> env_overrides(char** env = environ) {
  std::vector<std::pair<std::string, std::string>> out;
  const std::string prefix = kEnvPrefix;
  for (char** e = env; e && *e; ++e) {
    const std::string entry = *e;
    const auto eq = entry.find('=');
    if (eq == std::string::npos || entry.compare(0, prefix.size(), prefix) != 0) continue;
    std::string name = detail::lower(entry.substr(prefix.size(), eq - prefix.size()));
    const auto sep = name.find("__");
    if (sep != std::string::npos) name = name.substr(0, sep) + "." + name.substr(sep + 2);
    out.emplace_back(name, entry.substr(eq + 1));
  }
  return out;
}

/// Builds the configuration from a YAML tree plus dotted overrides (applied in order).
inline RunConfig load_run_config(YAML::Node root, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("configuration root must be a mapping", "<root>");
  for (const auto& [key, text] : overrides) detail::assign_dotted(root, key, detail::parse_override(key, text));

  RunConfig c;
  std::set<std::string> known{"seed", "output_dir", "checkpoint", "code_version"};
  detail::Reader top("", root);
  top("seed", c.seed);
  top("output_dir", c.output_dir);
  top("checkpoint", c.checkpoint);
  // The top-level seed is the default for every component seed that is not set explicitly.
  c.synth.seed = c.generator.seed = c.train.cfg.seed = c.evaluate.opts.seed = c.seed;
  c.discriminator.seed = c.seed + 1;
  detail::visit_sections(c, [&](const char* name, auto& section) {
    known.insert(name);
    detail::Reader r(name, root[name]);
    detail::visit(section, r);
    r.reject_unknown();
  });
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!known.count(key)) throw ConfigError("unknown configuration key " + key, key);
  }
  return c;
}

inline RunConfig load_run_config_file(const std::filesystem::path& path,
                                      const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  YAML::Node root;
  if (!path.empty()) {
    if (!std::filesystem::exists(path)) throw ConfigError("configuration file not found: " + path.string(), "config");
    try {
      root = YAML::LoadFile(path.string());
    } catch (const YAML::Exception& e) {
      throw ConfigError("cannot parse " + path.string() + ": " + e.what(), "config");
    }
  }
  return load_run_config(root, overrides);
}

inline YAML::Node to_yaml(RunConfig c) {
  YAML::Node root(YAML::NodeType::Map);
  root["code_version"] = std::string(code_version());
  root["seed"] = c.seed;
  root["output_dir"] = c.output_dir;
  root["checkpoint"] = c.checkpoint;
  detail::visit_sections(c, [&](const char* name, auto& section) {
    detail::Writer w;
    detail::visit(section, w);
    root[name] = w.node();
  });
  return root;
}

inline std::string to_yaml_string(const RunConfig& c) {
  YAML::Emitter out;
  out << to_yaml(c);
  return std::string(out.c_str()) + "\n";
}

/// Writes resolved_config.yaml (which reloads to the same configuration) into `dir`.
inline void write_resolved_config(const std::filesystem::path& dir, const RunConfig& c) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "resolved_config.yaml");
  if (!out) throw Error("cannot write " + (dir / "resolved_config.yaml").string());
  out << to_yaml_string(c);
}

inline nlohmann::json to_json(const GeneratorConfig& g) {
  return {{"in_frames", g.in_frames},           {"mask_channels", g.mask_channels},
          {"out_frames", g.out_frames},         {"encoder_widths", g.encoder_widths},
          {"decoder_widths", g.decoder_widths}, {"dropout_p", g.dropout_p},
          {"dual_encoder", g.dual_encoder},     {"aleatoric_head", g.aleatoric_head},
          {"width_scale", g.width_scale},       {"cbam_reduction", g.cbam_reduction},
          {"cbam_spatial_kernel", g.cbam_spatial_kernel}, {"seed", g.seed}};
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
  GeneratorConfig g;
  g.in_frames = j.value("in_frames", g.in_frames);
  g.mask_channels = j.value("mask_channels", g.mask_channels);
  g.out_frames = j.value("out_frames", g.out_frames);
  g.encoder_widths = j.value("encoder_widths", g.encoder_widths);
  g.decoder_widths = j.value("decoder_widths", g.decoder_widths);
  g.dropout_p = j.value("dropout_p", g.dropout_p);
  g.dual_encoder = j.value("dual_encoder", g.dual_encoder);
  g.aleatoric_head = j.value("aleatoric_head", g.aleatoric_head);
  g.width_scale = j.value("width_scale", g.width_scale);
  g.cbam_reduction = j.value("cbam_reduction", g.cbam_reduction);
  g.cbam_spatial_kernel = j.value("cbam_spatial_kernel", g.cbam_spatial_kernel);
  g.seed = j.value("seed", g.seed);
  return g;
}

}  // namespace nowcast
