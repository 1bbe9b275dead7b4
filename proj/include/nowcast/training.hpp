#pragma once

// Supervised and adversarial training loops with plateau scheduling, early stopping,
// per-epoch checkpoints and resume.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nowcast/checkpoint.hpp"
#include "nowcast/dataset_pipeline.hpp"
#include "nowcast/discriminator.hpp"
#include "nowcast/generator.hpp"
#include "nowcast/losses.hpp"
#include "nowcast/optim.hpp"

namespace nowcast {

struct TrainConfig {
  int max_epochs = 200;
  int batch_size = 32;
  double lr_generator = 1e-3;
  double lr_discriminator = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int early_stop_patience = 15;
  int plateau_patience = 4;
  double plateau_factor = 0.1;
  double lambda = 1e6;
  int d_update_every = 2;
  std::uint64_t seed = 0;
  double epsilon_log = kLogEpsilon;
  bool non_saturating = false;  // -log D(x, G) instead of log(1 - D(x, G)) for the generator
  long max_iterations = 0;      // 0 = no cap; otherwise stop after this many generator steps
  bool shuffle = true;

  void validate() const {
    auto positive = [](double v, const char* key) {
      if (!(v > 0)) throw ConfigError(std::string(key) + " must be positive", key);
    };
    positive(max_epochs, "max_epochs");
    positive(batch_size, "batch_size");
    positive(lr_generator, "lr_generator");
    positive(lr_discriminator, "lr_discriminator");
    positive(early_stop_patience, "early_stop_patience");
    positive(plateau_patience, "plateau_patience");
    positive(plateau_factor, "plateau_factor");
    positive(epsilon_log, "epsilon_log");
    if (lambda < 0) throw ConfigError("lambda must be non-negative", "lambda");
    if (d_update_every < 1) throw ConfigError("d_update_every must be >= 1", "d_update_every");
    if (beta1 < 0 || beta1 >= 1) throw ConfigError("beta1 must lie in [0,1)", "beta1");
    if (beta2 < 0 || beta2 >= 1) throw ConfigError("beta2 must lie in [0,1)", "beta2");
    if (max_iterations < 0) throw ConfigError("max_iterations must be >= 0", "max_iterations");
  }
};

// ---------------------------------------------------------------------------
// Log
// ---------------------------------------------------------------------------

struct EpochRow {
  int epoch = 0;                       // 0 = evaluation before any update
  std::map<std::string, double> train;  // mean training loss per term
  double val_loss = 0;                 // monitored generator loss (selection, early stopping)
  double val_mse = 0;                  // normalised units
  double val_g_loss = std::numeric_limits<double>::quiet_NaN();
  double val_d_loss = std::numeric_limits<double>::quiet_NaN();
  double lr_g = 0, lr_d = std::numeric_limits<double>::quiet_NaN();
  bool lr_g_reduced = false, lr_d_reduced = false;
  long d_updates = 0;
  long iterations = 0;  // cumulative generator steps
  double wall_time_s = 0;
};

inline nlohmann::json to_json(const EpochRow& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json train = nlohmann::json::object();
  for (const auto& [k, v] : r.train) train[k] = num(v);
  return {{"epoch", r.epoch},           {"train", train},
          {"val_loss", num(r.val_loss)}, {"val_mse", num(r.val_mse)},
          {"val_g_loss", num(r.val_g_loss)}, {"val_d_loss", num(r.val_d_loss)},
          {"lr_g", num(r.lr_g)},         {"lr_d", num(r.lr_d)},
          {"lr_g_reduced", r.lr_g_reduced}, {"lr_d_reduced", r.lr_d_reduced},
          {"d_updates", r.d_updates},    {"iterations", r.iterations},
          {"wall_time_s", r.wall_time_s}};
}

inline EpochRow epoch_row_from_json(const nlohmann::json& j) {
  auto num = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  EpochRow r;
  r.epoch = j.at("epoch").get<int>();
  for (const auto& [k, v] : j.at("train").items()) r.train[k] = num(v);
  r.val_loss = num(j.at("val_loss"));
  r.val_mse = num(j.at("val_mse"));
  r.val_g_loss = num(j.at("val_g_loss"));
  r.val_d_loss = num(j.at("val_d_loss"));
  r.lr_g = num(j.at("lr_g"));
  r.lr_d = num(j.at("lr_d"));
  r.lr_g_reduced = j.at("lr_g_reduced").get<bool>();
  r.lr_d_reduced = j.at("lr_d_reduced").get<bool>();
  r.d_updates = j.at("d_updates").get<long>();
  r.iterations = j.at("iterations").get<long>();
  r.wall_time_s = j.at("wall_time_s").get<double>();
  return r;
}

struct TrainLog {
  std::vector<EpochRow> rows;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(nowcast::to_json(r));
    return j;
  }
  static TrainLog from_json(const nlohmann::json& j) {
    TrainLog log;
    for (const auto& r : j) log.rows.push_back(epoch_row_from_json(r));
    return log;
  }

  void write_csv(const std::filesystem::path& path) const {
    std::set<std::string> terms;
    for (const auto& r : rows)
      for (const auto& [k, v] : r.train) terms.insert(k);
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "epoch";
    for (const auto& t : terms) out << ",train_" << t;
    out << ",val_loss,val_mse,val_g_loss,val_d_loss,lr_g,lr_d,lr_g_reduced,lr_d_reduced,d_updates,iterations,wall_time_s\n";
    out.precision(10);
    auto cell = [&](double v) {
      out << ',';
      if (std::isfinite(v)) out << v;
    };
    for (const auto& r : rows) {
      out << r.epoch;
      for (const auto& t : terms) {
        auto it = r.train.find(t);
        cell(it == r.train.end() ? std::numeric_limits<double>::quiet_NaN() : it->second);
      }
      cell(r.val_loss), cell(r.val_mse), cell(r.val_g_loss), cell(r.val_d_loss), cell(r.lr_g), cell(r.lr_d);
      out << ',' << int(r.lr_g_reduced) << ',' << int(r.lr_d_reduced) << ',' << r.d_updates << ',' << r.iterations
          << ',' << r.wall_time_s << '\n';
    }
  }

  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_csv(dir / "train_log.csv");
    write_json(dir / "train_log.json", to_json());
  }
};

// ---------------------------------------------------------------------------
// Batching and model interface
// ---------------------------------------------------------------------------

struct Batch {
  Tensor<float> x, m, y;
};

/// Stacks the selected samples into (B,12,64,64) / (B,25,64,64) / (B,12,64,64) tensors.
inline Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ArgumentError("make_batch: empty index list");
  const auto& first = samples.at(idx.front());
  auto shape_of = [&](const Shape& s) {
    Shape out{static_cast<std::int64_t>(idx.size())};
    out.insert(out.end(), s.begin(), s.end());
    return out;
  };
  Batch b{Tensor<float>(shape_of(first.x.shape())), Tensor<float>(shape_of(first.m.shape())),
          Tensor<float>(shape_of(first.y.shape()))};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& s = samples.at(idx[k]);
    std::copy(s.x.values().begin(), s.x.values().end(), b.x.data() + k * s.x.size());
    std::copy(s.y.values().begin(), s.y.values().end(), b.y.data() + k * s.y.size());
    std::transform(s.m.values().begin(), s.m.values().end(), b.m.data() + k * s.m.size(),
                   [](std::uint8_t v) { return static_cast<float>(v); });
  }
  return b;
}

/// Any nowcasting network the training loops can drive.
template <class M>
concept NowcastModel = requires(M& model, const Tensor<float>& t, const ForwardContext<float>& ctx) {
  { model.forward(t, &t, ctx) } -> std::same_as<GeneratorOutput<float>>;
  { model.state() } -> std::same_as<ModuleState<float>>;
  { model.uses_masks() } -> std::convertible_to<bool>;
  { model.has_log_var() } -> std::convertible_to<bool>;
};

template <NowcastModel M>
GeneratorOutput<float> run_model(M& model, const Batch& b, const ForwardContext<float>& ctx) {
  return model.forward(b.x, model.uses_masks() ? &b.m : nullptr, ctx);
}

/// Consecutive batches over `order`; the final partial batch is kept.
inline std::vector<std::vector<std::size_t>> batch_indices(const std::vector<std::size_t>& order, int batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(batch_size))
    out.emplace_back(order.begin() + std::ptrdiff_t(s),
                     order.begin() + std::ptrdiff_t(std::min(order.size(), s + static_cast<std::size_t>(batch_size))));
  return out;
}

inline std::size_t batch_count(std::size_t n, int batch_size) {
  return (n + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size);
}

// ---------------------------------------------------------------------------
// Run bookkeeping
// ---------------------------------------------------------------------------

/// Where and how a training run persists itself. An empty checkpoint_dir keeps everything in memory.
struct TrainRun {
  std::filesystem::path checkpoint_dir;
  bool resume = false;
  nlohmann::json model_config = nlohmann::json::object();  // stored in every sidecar
  double norm_max = 0;
  std::function<void(const EpochRow&)> on_epoch;
};

struct TrainResult {
  TrainLog log;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::filesystem::path best_checkpoint;           // generator
  std::filesystem::path discriminator_checkpoint;  // GAN only, last epoch
  long d_updates = 0;
};

namespace detail {

inline std::string rng_state(Rng& rng) {
  std::ostringstream s;
  s << rng.engine();
  return s.str();
}
inline void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream s(state);
  s >> rng.engine();
  if (!s) throw FormatError("bad random-stream state", "rng");
}

inline void save_adam(const std::filesystem::path& path, Adam<float>& opt) {
  std::vector<std::pair<std::string, const Tensor<float>*>> named;
  const auto& params = opt.state().params;
  for (std::size_t k = 0; k < params.size(); ++k) {
    named.emplace_back("m." + params[k].name, &opt.first_moments()[k]);
    named.emplace_back("v." + params[k].name, &opt.second_moments()[k]);
  }
  save_tensors<float>(path, named);
}

inline void load_adam(const std::filesystem::path& path, Adam<float>& opt) {
  auto stored = load_tensors<float>(path);
  const auto& params = opt.state().params;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (auto [prefix, dst] : {std::pair{"m.", &opt.first_moments()[k]}, std::pair{"v.", &opt.second_moments()[k]}}) {
      auto it = stored.find(prefix + params[k].name);
      if (it == stored.end() || it->second.shape() != dst->shape())
        throw FormatError("optimizer state mismatch", prefix + params[k].name);
      *dst = it->second;
    }
}

inline nlohmann::json sidecar(const TrainRun& run, const TrainConfig& cfg, int epoch, double val_loss) {
  return {{"config", run.model_config}, {"epoch", epoch},          {"validation_loss", val_loss},
          {"norm_max", run.norm_max},   {"seed", cfg.seed},         {"git_hash", code_version()}};
}

inline void save_checkpoint(const std::filesystem::path& blob, ModuleState<float> st, const nlohmann::json& meta) {
  save_state(blob, st);
  write_json(sidecar_path(blob), meta);
}

inline void require_splits(const std::vector<Sample>& train, const std::vector<Sample>& val) {
  if (train.empty()) throw ConfigError("training split is empty", "train");
  if (val.empty()) throw ConfigError("validation split is empty", "validation");
}

inline std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) std::shuffle(order.begin(), order.end(), rng.engine());
  return order;
}

/// Snapshot of a model loaded from a checkpoint blob, without disturbing the live weights.
inline StateSnapshot<float> snapshot_from(const std::filesystem::path& blob, ModuleState<float> st) {
  auto live = StateSnapshot<float>::capture(st);
  load_state(blob, st);
  auto loaded = StateSnapshot<float>::capture(st);
  live.restore(st);
  return loaded;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation passes
// ---------------------------------------------------------------------------

struct SupervisedEval {
  double loss = 0;  // objective (MSE, or the aleatoric loss for log-variance models)
  double mse = 0;
};

/// Deterministic (eval-mode) pass over a split.
template <NowcastModel M>
SupervisedEval evaluate_supervised(M& model, const std::vector<Sample>& split, int batch_size) {
  NoGradGuard no_grad;
  ForwardContext<float> ctx;
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double loss = 0, mse = 0;
  for (const auto& idx : batch_indices(order, batch_size)) {
    auto b = make_batch(split, idx);
    auto out = run_model(model, b, ctx);
    const double w = static_cast<double>(idx.size());
    const double batch_mse = loss_mse(b.y, out.y_hat).value()[0];
    mse += w * batch_mse;
    loss += w * (model.has_log_var() ? loss_aleatoric(b.y, out.y_hat, out.log_var).value()[0] : batch_mse);
  }
  const double n = static_cast<double>(split.size());
  return {loss / n, mse / n};
}

struct GanEval {
  double mse = 0;
  double g_loss = 0;  // adversarial + lambda * L2
  double d_loss = 0;  // negated conditional-GAN objective
};

template <NowcastModel M>
GanEval evaluate_gan(M& gen, PatchDiscriminator<float>& disc, const std::vector<Sample>& split, const TrainConfig& cfg) {
  NoGradGuard no_grad;
  ForwardContext<float> ctx;
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  GanEval acc;
  for (const auto& idx : batch_indices(order, cfg.batch_size)) {
    auto b = make_batch(split, idx);
    auto fake = run_model(gen, b, ctx).y_hat;
    auto xv = leaf(b.x);
    auto real_scores = disc.forward(xv, leaf(b.y), ctx);
    auto fake_scores = disc.forward(xv, fake, ctx);
    const double w = static_cast<double>(idx.size());
    acc.mse += w * loss_mse(b.y, fake).value()[0];
    acc.g_loss += w * loss_generator_total(fake_scores, b.y, fake, cfg.lambda, cfg.non_saturating, cfg.epsilon_log).value()[0];
    acc.d_loss -= w * loss_cgan(real_scores, fake_scores, cfg.epsilon_log).value()[0];
  }
  const double n = static_cast<double>(split.size());
  return {acc.mse / n, acc.g_loss / n, acc.d_loss / n};
}

// ---------------------------------------------------------------------------
// Supervised training
// ---------------------------------------------------------------------------

/// Trains with MSE (or the aleatoric loss when the model has a log-variance head).
/// On return the model holds the weights of the best validation epoch.
template <NowcastModel M>
TrainResult train_supervised(M& model, const std::vector<Sample>& train, const std::vector<Sample>& val,
                             const TrainConfig& cfg, const TrainRun& run = {}) {
  cfg.validate();
  detail::require_splits(train, val);
  const auto wall0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count(); };

  Rng rng(cfg.seed);
  Adam<float> opt(model.state(), cfg.lr_generator, cfg.beta1, cfg.beta2);
  PlateauScheduler sched(cfg.plateau_patience, cfg.plateau_factor);
  EarlyStopping stopper(cfg.early_stop_patience);
  TrainResult result;
  StateSnapshot<float> best;
  long iterations = 0;
  int start_epoch = 1;

  const auto& dir = run.checkpoint_dir;
  const bool persist = !dir.empty();
  const auto state_file = dir / "train_state.json";
  if (persist && run.resume && std::filesystem::exists(state_file)) {
    auto st = read_json(state_file);
    auto ms = model.state();
    load_state(dir / "generator_last.bin", ms);
    detail::load_adam(dir / "optim_g_last.bin", opt);
    opt.set_lr(st.at("lr_g").get<double>());
    opt.set_steps(st.at("adam_steps_g").get<long>());
    sched.restore(st.at("sched_g_best").get<double>(), st.at("sched_g_bad").get<int>());
    stopper.restore(st.at("stop_best").get<double>(), st.at("stop_bad").get<int>());
    detail::set_rng_state(rng, st.at("rng").get<std::string>());
    result.log = TrainLog::from_json(st.at("log"));
    result.best_epoch = st.at("best_epoch").get<int>();
    result.best_val_loss = st.at("best_val_loss").get<double>();
    iterations = st.at("iterations").get<long>();
    start_epoch = st.at("epoch").get<int>() + 1;
    best = detail::snapshot_from(dir / "generator_best.bin", model.state());
    if (st.value("finished", false)) start_epoch = cfg.max_epochs + 1;
  } else {
    auto e0 = evaluate_supervised(model, val, cfg.batch_size);
    EpochRow row;
    row.epoch = 0;
    row.val_loss = e0.loss;
    row.val_mse = e0.mse;
    row.lr_g = opt.lr();
    row.wall_time_s = elapsed();
    result.log.rows.push_back(row);
    result.best_epoch = 0;
    result.best_val_loss = e0.loss;
    best = StateSnapshot<float>::capture(model.state());
    if (persist) detail::save_checkpoint(dir / "generator_best.bin", model.state(), detail::sidecar(run, cfg, 0, e0.loss));
    if (run.on_epoch) run.on_epoch(row);
  }

  const std::string term = model.has_log_var() ? "aleatoric" : "mse";
  bool finished = false;
  for (int epoch = start_epoch; epoch <= cfg.max_epochs && !finished; ++epoch) {
    EpochRow row;
    row.epoch = epoch;
    row.lr_g = opt.lr();
    double loss_sum = 0;
    long steps = 0;
    ForwardContext<float> ctx{true, true, &rng, nullptr};
    for (const auto& idx : batch_indices(detail::epoch_order(train.size(), cfg.shuffle, rng), cfg.batch_size)) {
      auto b = make_batch(train, idx);
      auto out = run_model(model, b, ctx);
      auto loss = model.has_log_var() ? loss_aleatoric(b.y, out.y_hat, out.log_var) : loss_mse(b.y, out.y_hat);
      opt.zero_grad();
      backward(loss);
      opt.step();
      loss_sum += loss.value()[0];
      ++steps;
      ++iterations;
      if (cfg.max_iterations && iterations >= cfg.max_iterations) {
        finished = true;
        break;
      }
    }
    row.train[term] = loss_sum / static_cast<double>(std::max<long>(steps, 1));
    row.iterations = iterations;

    auto ev = evaluate_supervised(model, val, cfg.batch_size);
    row.val_loss = ev.loss;
    row.val_mse = ev.mse;
    if (ev.loss < result.best_val_loss) {
      result.best_val_loss = ev.loss;
      result.best_epoch = epoch;
      best = StateSnapshot<float>::capture(model.state());
      if (persist)
        detail::save_checkpoint(dir / "generator_best.bin", model.state(), detail::sidecar(run, cfg, epoch, ev.loss));
    }
    if (sched.observe(ev.loss)) {
      opt.set_lr(sched.apply(opt.lr()));
      row.lr_g_reduced = true;
    }
    stopper.observe(ev.loss);
    if (stopper.should_stop()) finished = true;
    row.wall_time_s = elapsed();
    result.log.rows.push_back(row);

    if (persist) {
      detail::save_checkpoint(dir / "generator_last.bin", model.state(), detail::sidecar(run, cfg, epoch, ev.loss));
      detail::save_adam(dir / "optim_g_last.bin", opt);
      write_json(state_file, {{"epoch", epoch},
                              {"finished", finished},  // early stop or iteration cap; a larger max_epochs may still resume
                              {"lr_g", opt.lr()},
                              {"adam_steps_g", opt.steps()},
                              {"sched_g_best", sched.best()},
                              {"sched_g_bad", sched.bad_epochs()},
                              {"stop_best", stopper.best()},
                              {"stop_bad", stopper.bad_epochs()},
                              {"rng", detail::rng_state(rng)},
                              {"iterations", iterations},
                              {"best_epoch", result.best_epoch},
                              {"best_val_loss", result.best_val_loss},
                              {"log", result.log.to_json()}});
      result.log.write(dir);
    }
    if (run.on_epoch) run.on_epoch(row);
  }

  auto ms = model.state();
  best.restore(ms);
  if (persist) {
    result.best_checkpoint = dir / "generator_best.bin";
    result.log.write(dir);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Adversarial training
// ---------------------------------------------------------------------------

struct GeneratorStepLosses {
  double total = 0, adv = 0, l2 = 0;
};

/// One generator update on adversarial + lambda * L2. Discriminator weights are not touched.
template <NowcastModel M>
GeneratorStepLosses generator_step(M& gen, PatchDiscriminator<float>& disc, Adam<float>& opt_g, const Batch& b,
                                   const ForwardContext<float>& ctx, const TrainConfig& cfg) {
  auto fake = run_model(gen, b, ctx).y_hat;
  auto adv = loss_generator_adversarial(disc.forward(leaf(b.x), fake, ctx), cfg.non_saturating, cfg.epsilon_log);
  auto l2 = loss_l2(b.y, fake);
  auto total = ops::linear_combination<float>({adv, l2}, {1.0f, static_cast<float>(cfg.lambda)});
  opt_g.zero_grad();
  backward(total);
  opt_g.step();
  return {total.value()[0], adv.value()[0], l2.value()[0]};
}

/// One discriminator update minimising the negated cGAN objective on fresh fakes, which are
/// produced without recording generator gradients. Returns the minimised loss.
template <NowcastModel M>
double discriminator_step(M& gen, PatchDiscriminator<float>& disc, Adam<float>& opt_d, const Batch& b,
                          const ForwardContext<float>& ctx, const TrainConfig& cfg) {
  Tensor<float> fresh;
  {
    NoGradGuard no_grad;
    fresh = run_model(gen, b, ctx).y_hat.value();
  }
  auto xv = leaf(b.x);
  auto real_scores = disc.forward(xv, leaf(b.y), ctx);
  auto fake_scores = disc.forward(xv, leaf(fresh), ctx);
  auto neg = ops::linear_combination<float>({loss_cgan(real_scores, fake_scores, cfg.epsilon_log)}, {-1.0f});
  opt_d.zero_grad();
  backward(neg);
  opt_d.step();
  return neg.value()[0];
}

/// Conditional-GAN training: a generator step on every iteration (adversarial + lambda * L2),
/// and a discriminator step every `d_update_every`-th iteration on fresh fakes produced
/// without generator gradients. Dropout stays active in both passes.
template <NowcastModel M>
TrainResult train_gan(M& gen, PatchDiscriminator<float>& disc, const std::vector<Sample>& train,
                      const std::vector<Sample>& val, const TrainConfig& cfg, const TrainRun& run = {}) {
  cfg.validate();
  detail::require_splits(train, val);
  if (!gen.uses_masks()) throw ConfigError("adversarial training expects the dual-encoder generator", "dual_encoder");
  if (gen.has_log_var()) throw ConfigError("the log-variance variant is trained supervised", "aleatoric_head");
  const auto wall0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count(); };

  Rng rng(cfg.seed);
  Adam<float> opt_g(gen.state(), cfg.lr_generator, cfg.beta1, cfg.beta2);
  Adam<float> opt_d(disc.state(), cfg.lr_discriminator, cfg.beta1, cfg.beta2);
  PlateauScheduler sched_g(cfg.plateau_patience, cfg.plateau_factor);
  PlateauScheduler sched_d(cfg.plateau_patience, cfg.plateau_factor);
  EarlyStopping stopper(cfg.early_stop_patience);
  TrainResult result;
  StateSnapshot<float> best;
  long iterations = 0;
  int start_epoch = 1;

  const auto& dir = run.checkpoint_dir;
  const bool persist = !dir.empty();
  const auto state_file = dir / "train_state.json";
  if (persist && run.resume && std::filesystem::exists(state_file)) {
    auto st = read_json(state_file);
    auto gs = gen.state();
    auto ds = disc.state();
    load_state(dir / "generator_last.bin", gs);
    load_state(dir / "discriminator_last.bin", ds);
    detail::load_adam(dir / "optim_g_last.bin", opt_g);
    detail::load_adam(dir / "optim_d_last.bin", opt_d);
    opt_g.set_lr(st.at("lr_g").get<double>());
    opt_d.set_lr(st.at("lr_d").get<double>());
    opt_g.set_steps(st.at("adam_steps_g").get<long>());
    opt_d.set_steps(st.at("adam_steps_d").get<long>());
    sched_g.restore(st.at("sched_g_best").get<double>(), st.at("sched_g_bad").get<int>());
    sched_d.restore(st.at("sched_d_best").get<double>(), st.at("sched_d_bad").get<int>());
    stopper.restore(st.at("stop_best").get<double>(), st.at("stop_bad").get<int>());
    detail::set_rng_state(rng, st.at("rng").get<std::string>());
    result.log = TrainLog::from_json(st.at("log"));
    result.best_epoch = st.at("best_epoch").get<int>();
    result.best_val_loss = st.at("best_val_loss").get<double>();
    result.d_updates = st.at("d_updates").get<long>();
    iterations = st.at("iterations").get<long>();
    start_epoch = st.at("epoch").get<int>() + 1;
    best = detail::snapshot_from(dir / "generator_best.bin", gen.state());
    if (st.value("finished", false)) start_epoch = cfg.max_epochs + 1;
  } else {
    auto e0 = evaluate_gan(gen, disc, val, cfg);
    EpochRow row;
    row.epoch = 0;
    row.val_loss = row.val_mse = e0.mse;
    row.val_g_loss = e0.g_loss;
    row.val_d_loss = e0.d_loss;
    row.lr_g = opt_g.lr();
    row.lr_d = opt_d.lr();
    row.wall_time_s = elapsed();
    result.log.rows.push_back(row);
    result.best_epoch = 0;
    result.best_val_loss = e0.mse;
    best = StateSnapshot<float>::capture(gen.state());
    if (persist) detail::save_checkpoint(dir / "generator_best.bin", gen.state(), detail::sidecar(run, cfg, 0, e0.mse));
    if (run.on_epoch) run.on_epoch(row);
  }

  bool finished = false;
  for (int epoch = start_epoch; epoch <= cfg.max_epochs && !finished; ++epoch) {
    EpochRow row;
    row.epoch = epoch;
    row.lr_g = opt_g.lr();
    row.lr_d = opt_d.lr();
    double g_total = 0, g_adv = 0, g_l2 = 0, d_loss = 0;
    long g_steps = 0, d_steps = 0;
    ForwardContext<float> ctx{true, true, &rng, nullptr};
    long iter_in_epoch = 0;
    for (const auto& idx : batch_indices(detail::epoch_order(train.size(), cfg.shuffle, rng), cfg.batch_size)) {
      auto b = make_batch(train, idx);
      const auto g = generator_step(gen, disc, opt_g, b, ctx, cfg);
      g_total += g.total;
      g_adv += g.adv;
      g_l2 += g.l2;
      ++g_steps;
      ++iter_in_epoch;
      if (iter_in_epoch % cfg.d_update_every == 0) {
        d_loss += discriminator_step(gen, disc, opt_d, b, ctx, cfg);
        ++d_steps;
      }
      ++iterations;
      if (cfg.max_iterations && iterations >= cfg.max_iterations) {
        finished = true;
        break;
      }
    }
    const double gs = static_cast<double>(std::max<long>(g_steps, 1));
    row.train = {{"g_total", g_total / gs}, {"g_adv", g_adv / gs}, {"g_l2", g_l2 / gs}};
    row.train["d_loss"] = d_steps ? d_loss / static_cast<double>(d_steps) : std::numeric_limits<double>::quiet_NaN();
    row.d_updates = d_steps;
    result.d_updates += d_steps;
    row.iterations = iterations;

    auto ev = evaluate_gan(gen, disc, val, cfg);
    row.val_loss = row.val_mse = ev.mse;
    row.val_g_loss = ev.g_loss;
    row.val_d_loss = ev.d_loss;
    if (ev.mse < result.best_val_loss) {
      result.best_val_loss = ev.mse;
      result.best_epoch = epoch;
      best = StateSnapshot<float>::capture(gen.state());
      if (persist)
        detail::save_checkpoint(dir / "generator_best.bin", gen.state(), detail::sidecar(run, cfg, epoch, ev.mse));
    }
    if (sched_g.observe(ev.g_loss)) {
      opt_g.set_lr(sched_g.apply(opt_g.lr()));
      row.lr_g_reduced = true;
    }
    if (sched_d.observe(ev.d_loss)) {
      opt_d.set_lr(sched_d.apply(opt_d.lr()));
      row.lr_d_reduced = true;
    }
    stopper.observe(ev.mse);
    if (stopper.should_stop()) finished = true;
    row.wall_time_s = elapsed();
    result.log.rows.push_back(row);

    if (persist) {
      detail::save_checkpoint(dir / "generator_last.bin", gen.state(), detail::sidecar(run, cfg, epoch, ev.mse));
      detail::save_checkpoint(dir / "discriminator_last.bin", disc.state(), detail::sidecar(run, cfg, epoch, ev.d_loss));
      detail::save_adam(dir / "optim_g_last.bin", opt_g);
      detail::save_adam(dir / "optim_d_last.bin", opt_d);
      write_json(state_file, {{"epoch", epoch},
                              {"finished", finished},
                              {"lr_g", opt_g.lr()},
                              {"lr_d", opt_d.lr()},
                              {"adam_steps_g", opt_g.steps()},
                              {"adam_steps_d", opt_d.steps()},
                              {"sched_g_best", sched_g.best()},
                              {"sched_g_bad", sched_g.bad_epochs()},
                              {"sched_d_best", sched_d.best()},
                              {"sched_d_bad", sched_d.bad_epochs()},
                              {"stop_best", stopper.best()},
                              {"stop_bad", stopper.bad_epochs()},
                              {"rng", detail::rng_state(rng)},
                              {"iterations", iterations},
                              {"d_updates", result.d_updates},
                              {"best_epoch", result.best_epoch},
                              {"best_val_loss", result.best_val_loss},
                              {"log", result.log.to_json()}});
      result.log.write(dir);
    }
    if (run.on_epoch) run.on_epoch(row);
  }

  auto gs = gen.state();
  best.restore(gs);
  if (persist) {
    result.best_checkpoint = dir / "generator_best.bin";
    result.discriminator_checkpoint = dir / "discriminator_last.bin";
    result.log.write(dir);
  }
  return result;
}

}  // namespace nowcast
