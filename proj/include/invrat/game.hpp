//
// Copyright 2026 The invrat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// The three-player game: predictor and generator objectives, one alternating
// update per batch, and the epoch loop.

#ifndef INVRAT_GAME_HPP_
#define INVRAT_GAME_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "invrat/attributes.hpp"
#include "invrat/corpus.hpp"
#include "invrat/error.hpp"
#include "invrat/eval.hpp"
#include "invrat/models.hpp"
#include "invrat/optim.hpp"
#include "invrat/players.hpp"
#include "invrat/rationale.hpp"
#include "json.hpp"

namespace invrat {

// lexical-removal trains a vanilla classifier on lexicon-filtered text.
enum class RunMode { kVanilla, kInvrat, kLexicalRemoval };

inline const char* run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::kVanilla: return "vanilla";
    case RunMode::kInvrat: return "invrat";
    case RunMode::kLexicalRemoval: return "lexical-removal";
  }
  return "?";
}

inline std::optional<RunMode> parse_run_mode(std::string_view s) {
  if (s == "vanilla") return RunMode::kVanilla;
  if (s == "invrat") return RunMode::kInvrat;
  if (s == "lexical-removal") return RunMode::kLexicalRemoval;
  return std::nullopt;
}

enum class TemperatureSchedule { kConstant, kLinear };

struct TrainConfig {
  RunMode mode = RunMode::kInvrat;
  EnvironmentKind environment_kind = EnvironmentKind::kLexical;

  double alpha = 0.2;
  double lambda1 = 1.0;
  double lambda2 = 5.0;
  double lambda_diff = 10.0;
  bool per_example_sparsity = false;

  std::string optimizer = "adamw";
  double learning_rate = 1e-3;
  double adam_epsilon = 1e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double max_grad_norm = 1.0;
  int epochs = 10;
  int batch_size = 8;

  double temperature = 1.0;
  double temperature_final = 0.1;
  TemperatureSchedule temperature_schedule = TemperatureSchedule::kConstant;

  std::uint64_t seed = 1;
  int embed_dim = 32;
  int hidden_dim = 32;
  int window = 3;
  int min_count = 1;
  std::array<double, 3> split_fractions{0.8, 0.1, 0.1};

  // Forward pass sees all-keep masks; the generator still gets gradients.
  bool force_keep_all = false;

  double selection_window = 3.0;
  bool selection_relative = false;
  std::string selection_target = "mean";

  TrainMode player_mode() const {
    return mode == RunMode::kInvrat ? TrainMode::kInvrat : TrainMode::kVanilla;
  }

  RegWeights reg_weights() const {
    return {alpha, lambda1, lambda2, per_example_sparsity};
  }

  AdamWOptions adamw() const {
    return {learning_rate, beta1, beta2, adam_epsilon, weight_decay};
  }

  ModelShape shape(int vocab_size) const {
    return {vocab_size, embed_dim, hidden_dim, window};
  }

  SelectionOptions selection() const {
    SelectionOptions s;
    s.window = selection_window;
    s.relative = selection_relative;
    if (selection_target != "mean") s.target = parse_eval_attribute(selection_target);
    return s;
  }

  // Temperature used during epoch `epoch` (0-based).
  double temperature_at(int epoch) const {
    if (temperature_schedule == TemperatureSchedule::kConstant || epochs <= 1) {
      return temperature;
    }
    const double frac = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
    return temperature + (temperature_final - temperature) * frac;
  }

  void validate() const {
    auto bad = [](const std::string& what) {
      throw Error(ErrorKind::kInvalidArgument, "config: " + what);
    };
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda_diff >= 0.0)) {
      bad("lambda values must be >= 0");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) bad("alpha must lie in (0, 1]");
    if (batch_size < 1) bad("batch_size must be >= 1");
    if (epochs < 1) bad("epochs must be >= 1");
    if (!(learning_rate > 0.0)) bad("learning_rate must be > 0");
    if (!(adam_epsilon > 0.0)) bad("adam_epsilon must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      bad("betas must lie in [0, 1)");
    }
    if (!(weight_decay >= 0.0)) bad("weight_decay must be >= 0");
    if (!(max_grad_norm > 0.0)) bad("max_grad_norm must be > 0");
    if (!(temperature > 0.0) || !(temperature_final > 0.0)) bad("temperatures must be > 0");
    if (optimizer != "adamw") bad("unsupported optimizer '" + optimizer + "'");
    if (min_count < 1) bad("min_count must be >= 1");
    if (!(selection_window >= 0.0)) bad("selection_window must be >= 0");
    if (selection_target != "mean" && !parse_eval_attribute(selection_target)) {
      bad("selection_target must be mean, noi, oi, oni or aae");
    }
    double sum = 0.0;
    for (double f : split_fractions) {
      if (!(f > 0.0)) bad("split_fractions must be > 0");
      sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("split_fractions must sum to 1");
    ModelShape{Vocabulary::kNumReserved + 1, embed_dim, hidden_dim, window}.validate();
  }

  // Values of the original fine-tuning setup.
  static TrainConfig paper_preset() {
    TrainConfig c;
    c.learning_rate = 1e-5;
    return c;
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"mode", run_mode_name(c.mode)},
      {"environment_kind", environment_kind_name(c.environment_kind)},
      {"alpha", c.alpha},
      {"lambda1", c.lambda1},
      {"lambda2", c.lambda2},
      {"lambda_diff", c.lambda_diff},
      {"per_example_sparsity", c.per_example_sparsity},
      {"optimizer", c.optimizer},
      {"learning_rate", c.learning_rate},
      {"adam_epsilon", c.adam_epsilon},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"weight_decay", c.weight_decay},
      {"max_grad_norm", c.max_grad_norm},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"temperature", c.temperature},
      {"temperature_final", c.temperature_final},
      {"temperature_schedule",
       c.temperature_schedule == TemperatureSchedule::kConstant ? "constant" : "linear"},
      {"seed", c.seed},
      {"embed_dim", c.embed_dim},
      {"hidden_dim", c.hidden_dim},
      {"window", c.window},
      {"min_count", c.min_count},
      {"split_fractions", c.split_fractions},
      {"force_keep_all", c.force_keep_all},
      {"selection_window", c.selection_window},
      {"selection_relative", c.selection_relative},
      {"selection_target", c.selection_target},
  };
}

// Missing keys keep their current value; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) {
    throw Error(ErrorKind::kInvalidArgument, "config must be a JSON object");
  }
  const nlohmann::json known = c;
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw Error(ErrorKind::kInvalidArgument, "config: unknown key '" + key + "'");
    }
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  if (j.contains("mode")) {
    const auto m = parse_run_mode(j.at("mode").get<std::string>());
    if (!m) throw Error(ErrorKind::kInvalidArgument, "config: unknown mode");
    c.mode = *m;
  }
  if (j.contains("environment_kind")) {
    const auto k = parse_environment_kind(j.at("environment_kind").get<std::string>());
    if (!k) throw Error(ErrorKind::kInvalidArgument, "config: unknown environment_kind");
    c.environment_kind = *k;
  }
  if (j.contains("temperature_schedule")) {
    const auto s = j.at("temperature_schedule").get<std::string>();
    if (s == "constant") c.temperature_schedule = TemperatureSchedule::kConstant;
    else if (s == "linear") c.temperature_schedule = TemperatureSchedule::kLinear;
    else throw Error(ErrorKind::kInvalidArgument, "config: unknown temperature_schedule");
  }
  get("alpha", c.alpha);
  get("lambda1", c.lambda1);
  get("lambda2", c.lambda2);
  get("lambda_diff", c.lambda_diff);
  get("per_example_sparsity", c.per_example_sparsity);
  get("optimizer", c.optimizer);
  get("learning_rate", c.learning_rate);
  get("adam_epsilon", c.adam_epsilon);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("weight_decay", c.weight_decay);
  get("max_grad_norm", c.max_grad_norm);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("temperature", c.temperature);
  get("temperature_final", c.temperature_final);
  get("seed", c.seed);
  get("embed_dim", c.embed_dim);
  get("hidden_dim", c.hidden_dim);
  get("window", c.window);
  get("min_count", c.min_count);
  get("split_fractions", c.split_fractions);
  get("force_keep_all", c.force_keep_all);
  get("selection_window", c.selection_window);
  get("selection_relative", c.selection_relative);
  get("selection_target", c.selection_target);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double l_i = 0.0;
  double l_e = 0.0;
  double l_reg = 0.0;
  double gap = 0.0;
  double total = 0.0;
  double mask_density = 1.0;
  // Pre-clip global gradient norms of this step.
  double grad_norm_invariant = 0.0;
  double grad_norm_env_aware = 0.0;
  double grad_norm_generator = 0.0;

  bool finite() const {
    return std::isfinite(l_i) && std::isfinite(l_e) && std::isfinite(l_reg) &&
           std::isfinite(gap) && std::isfinite(total);
  }
  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

inline double predictor_loss(const Matrix& logits, int label) {
  Tape tape(false);
  return ad::cross_entropy(tape.constant(logits), label).scalar();
}

// Batch mean of the per-example cross-entropies.
inline double predictor_loss(std::span<const Matrix> logits, std::span<const int> labels) {
  if (logits.empty() || logits.size() != labels.size()) {
    throw Error(ErrorKind::kInvalidArgument, "predictor_loss needs matching, non-empty inputs");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += predictor_loss(logits[i], labels[i]);
  return sum / static_cast<double>(logits.size());
}

inline double generator_loss(double l_i, double l_e, double l_reg, double lambda_diff) {
  if (!std::isfinite(l_i) || !std::isfinite(l_e) || !std::isfinite(l_reg) ||
      !std::isfinite(lambda_diff)) {
    throw Error(ErrorKind::kNonFinite, "generator_loss: non-finite input");
  }
  if (l_reg < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "generator_loss: L_reg must be >= 0");
  }
  return l_i + l_reg + lambda_diff * std::max(0.0, l_i - l_e);
}

namespace detail {

inline Var batch_mean(Tape& tape, const std::vector<Var>& xs) {
  Var sum = xs.front();
  for (std::size_t i = 1; i < xs.size(); ++i) sum = ad::add(sum, xs[i]);
  (void)tape;
  return ad::affine(sum, 1.0 / static_cast<double>(xs.size()));
}

inline Matrix column_of(const std::vector<int>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

inline std::vector<int> all_keep(std::size_t n) { return std::vector<int>(n, 1); }

inline std::string batch_ids(std::span<const Document* const> batch) {
  std::string ids;
  for (const Document* d : batch) {
    if (!ids.empty()) ids += ',';
    ids += d->id;
  }
  return ids;
}

[[noreturn]] inline void non_finite(std::span<const Document* const> batch,
                                    const LossBreakdown& b, const char* phase) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "non-finite loss in " << phase << " (batch ids: " << batch_ids(batch)
      << "; L_i=" << b.l_i << " L_e=" << b.l_e << " L_reg=" << b.l_reg
      << " gap=" << b.gap << " total=" << b.total << ")";
  throw Error(ErrorKind::kNonFinite, msg.str());
}

// f_i (and f_e) logits of one masked document. `mask` is N x 1.
inline Var invariant_logits(Tape& tape, PlayerSet& p, const Document& d, Var mask) {
  return classify(tape, p.invariant, embed_masked(tape, p.invariant, d.tokens, mask),
                  d.tokens);
}

inline Var env_aware_logits(Tape& tape, PlayerSet& p, const Document& d, Var mask) {
  Var x = embed_masked(tape, *p.env_aware, d.tokens, mask);
  return classify(tape, *p.env_aware, add_env(tape, x, *d.environment, *p.env_table),
                  d.tokens);
}

struct GeneratorPass {
  Var l_i;
  Var l_e;
  Var l_reg;
  Var gap;
  Var total;
  double density = 0.0;
};

// Full generator forward on a tape: masks sampled from the generator with the
// given noise, predictors applied to the masked input.
inline GeneratorPass generator_pass(Tape& tape, PlayerSet& p,
                                    std::span<const Document* const> batch,
                                    const std::vector<std::vector<double>>& noise,
                                    const TrainConfig& cfg, double temperature) {
  std::vector<Var> ce_i, ce_e, softs;
  double kept = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Document& d = *batch[b];
    Var logits = token_logits(tape, *p.generator, embed(tape, *p.generator, d.tokens));
    MaskVars mv = sample_mask_var(tape, logits, d.tokens, noise[b], temperature,
                                  MaskMode::kStraightThrough);
    Var mask = mv.mask;
    if (cfg.force_keep_all) {
      mask = ad::straight_through(column_of(all_keep(d.tokens.size())), mv.soft);
      kept += 1.0;
    } else {
      kept += mv.values.density();
    }
    softs.push_back(mv.soft);
    ce_i.push_back(ad::cross_entropy(invariant_logits(tape, p, d, mask), d.label));
    ce_e.push_back(ad::cross_entropy(env_aware_logits(tape, p, d, mask), d.label));
  }
  GeneratorPass out;
  out.l_i = batch_mean(tape, ce_i);
  out.l_e = batch_mean(tape, ce_e);
  out.l_reg = reg_loss_var(tape, softs, cfg.reg_weights());
  out.gap = ad::relu(ad::sub(out.l_i, out.l_e));
  out.total = ad::add(ad::add(out.l_i, out.l_reg), ad::affine(out.gap, cfg.lambda_diff));
  out.density = kept / static_cast<double>(batch.size());
  return out;
}

inline LossBreakdown breakdown_of(const GeneratorPass& g) {
  LossBreakdown b;
  b.l_i = g.l_i.scalar();
  b.l_e = g.l_e.scalar();
  b.l_reg = g.l_reg.scalar();
  b.gap = g.gap.scalar();
  b.total = g.total.scalar();
  b.mask_density = g.density;
  return b;
}

inline Var vanilla_loss(Tape& tape, PlayerSet& p, std::span<const Document* const> batch) {
  std::vector<Var> ce;
  for (const Document* d : batch) {
    ce.push_back(ad::cross_entropy(
        classify(tape, p.invariant, embed(tape, p.invariant, d->tokens), d->tokens),
        d->label));
  }
  return batch_mean(tape, ce);
}

inline double clipped_step(AdamW& opt, const std::vector<Param*>& params, double max_norm) {
  const double norm = clip_grad_norm(params, max_norm);
  opt.step(params);
  return norm;
}

inline void zero(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace detail

inline void check_batch(std::span<const Document* const> batch, TrainMode mode) {
  if (batch.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "train_step needs a non-empty batch");
  }
  for (const Document* d : batch) {
    if (d->tokens.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "document " + d->id + " has no tokens");
    }
    if (mode == TrainMode::kInvrat) {
      if (!d->environment) {
        throw Error(ErrorKind::kMissingEnvironment,
                    "document " + d->id + " has no environment");
      }
      check_env_index(*d->environment);
    }
  }
}

// One alternating update. Invrat: (1) sample masks, (2) update f_i and f_e on
// the fixed hard masks, (3) resample and update g on the compound objective
// with the predictors frozen. Returns the losses on the same batch after the
// update, reusing the step-(3) noise.
inline LossBreakdown train_step(std::span<const Document* const> batch, PlayerSet& players,
                                const TrainConfig& cfg, std::mt19937_64& mask_rng,
                                double temperature) {
  check_batch(batch, players.mode);
  const double clip = cfg.max_grad_norm;
  LossBreakdown out;

  if (players.mode == TrainMode::kVanilla) {
    const auto params = players.invariant_params();
    {
      Tape tape(true);
      Var loss = detail::vanilla_loss(tape, players, batch);
      out.l_i = out.total = loss.scalar();
      if (!out.finite()) detail::non_finite(batch, out, "predictor update");
      detail::zero(params);
      gradients(tape, loss);
      out.grad_norm_invariant = detail::clipped_step(players.invariant_opt, params, clip);
    }
    Tape tape(false);
    out.l_i = out.total = detail::vanilla_loss(tape, players, batch).scalar();
    if (!out.finite()) detail::non_finite(batch, out, "post-update evaluation");
    return out;
  }

  // (1) masks from the current generator, no gradient.
  std::vector<Matrix> hard;
  {
    Tape tape(false);
    for (const Document* d : batch) {
      const auto noise = gumbel_noise_difference(d->tokens.size(), mask_rng);
      if (cfg.force_keep_all) {
        hard.push_back(detail::column_of(detail::all_keep(d->tokens.size())));
        continue;
      }
      Var logits =
          token_logits(tape, *players.generator, embed(tape, *players.generator, d->tokens));
      MaskVars mv = sample_mask_var(tape, logits, d->tokens, noise, temperature,
                                    MaskMode::kStraightThrough);
      hard.push_back(detail::column_of(mv.values.hard));
    }
  }

  // (2) predictors on fixed masks.
  {
    Tape tape(true);
    std::vector<Var> ce_i, ce_e;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const Document& d = *batch[b];
      Var mask = tape.constant(hard[b]);
      ce_i.push_back(ad::cross_entropy(detail::invariant_logits(tape, players, d, mask), d.label));
      ce_e.push_back(ad::cross_entropy(detail::env_aware_logits(tape, players, d, mask), d.label));
    }
    Var l_i = detail::batch_mean(tape, ce_i);
    Var l_e = detail::batch_mean(tape, ce_e);
    LossBreakdown pre;
    pre.l_i = l_i.scalar();
    pre.l_e = l_e.scalar();
    if (!pre.finite()) detail::non_finite(batch, pre, "predictor update");
    const auto inv = players.invariant_params();
    const auto env = players.env_aware_params();
    detail::zero(inv);
    detail::zero(env);
    // Parameter sets are disjoint, so each player only sees its own loss.
    gradients(tape, ad::add(l_i, l_e));
    out.grad_norm_invariant = detail::clipped_step(players.invariant_opt, inv, clip);
    out.grad_norm_env_aware = detail::clipped_step(players.env_aware_opt, env, clip);
  }

  // (3) generator on fresh masks, predictors frozen.
  std::vector<std::vector<double>> noise;
  for (const Document* d : batch) {
    noise.push_back(gumbel_noise_difference(d->tokens.size(), mask_rng));
  }
  {
    Tape tape(true);
    detail::GeneratorPass g = detail::generator_pass(tape, players, batch, noise, cfg, temperature);
    const LossBreakdown pre = detail::breakdown_of(g);
    if (!pre.finite()) detail::non_finite(batch, pre, "generator update");
    const auto gen = players.generator_params();
    detail::zero(gen);
    gradients(tape, g.total);
    out.grad_norm_generator = detail::clipped_step(players.generator_opt, gen, clip);
    detail::zero(players.invariant_params());
    detail::zero(players.env_aware_params());
  }

  // Post-update losses.
  Tape tape(false);
  const LossBreakdown post = detail::breakdown_of(
      detail::generator_pass(tape, players, batch, noise, cfg, temperature));
  if (!post.finite()) detail::non_finite(batch, post, "post-update evaluation");
  out.l_i = post.l_i;
  out.l_e = post.l_e;
  out.l_reg = post.l_reg;
  out.gap = post.gap;
  out.total = post.total;
  out.mask_density = post.mask_density;
  return out;
}

// ---------------------------------------------------------------------------
// Epoch loop
// ---------------------------------------------------------------------------

struct StepLog {
  int epoch = 0;  // 1-based
  long long step = 0;
  LossBreakdown losses;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},       {"step", step},
            {"L_i", losses.l_i},    {"L_e", losses.l_e},
            {"L_reg", losses.l_reg}, {"gap", losses.gap},
            {"total", losses.total}, {"mask_density", losses.mask_density}};
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based; also the checkpoint id
  MetricsReport dev;
  std::optional<PlayerSet> players;
};

struct TrainState {
  PlayerSet players;
  std::mt19937_64 order_rng;
  std::mt19937_64 mask_rng;
  int epoch = 0;
  long long step = 0;
};

struct TrainHooks {
  std::function<void(const StepLog&, const PlayerSet&)> on_step;
  std::function<void(const EpochRecord&, const TrainState&)> on_epoch;
  bool keep_checkpoints = false;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<StepLog> steps;
  TrainState state;

  // Mean of a per-step quantity over one epoch.
  double epoch_mean(int epoch, double LossBreakdown::*field) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& s : steps) {
      if (s.epoch != epoch) continue;
      sum += s.losses.*field;
      ++n;
    }
    return n == 0 ? 0.0 : sum / n;
  }
};

inline TrainState make_train_state(const TrainConfig& cfg, int vocab_size) {
  TrainState s;
  s.players = PlayerSet::create(cfg.shape(vocab_size), cfg.player_mode(), cfg.seed, cfg.adamw());
  s.order_rng.seed(derive_seed(cfg.seed, kSeedOrder));
  s.mask_rng.seed(derive_seed(cfg.seed, kSeedMask));
  return s;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
}

inline TrainResult train(const DatasetSplit& split, int vocab_size, const TrainConfig& cfg,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (split.train.empty()) {
    throw Error(ErrorKind::kEmptySplit, "training split is empty");
  }
  if (split.dev.empty()) {
    throw Error(ErrorKind::kEmptySplit, "dev split is empty");
  }
  TrainResult result;
  result.state = make_train_state(cfg, vocab_size);
  TrainState& st = result.state;
  {
    std::vector<const Document*> all;
    for (const auto& d : split.train) all.push_back(&d);
    check_batch(all, st.players.mode);
  }
  std::vector<std::size_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int e = 0; e < cfg.epochs; ++e) {
    st.epoch = e + 1;
    const double temperature = cfg.temperature_at(e);
    shuffle_indices(order, st.order_rng);
    std::vector<const Document*> batch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(&split.train[order[i]]);
      StepLog log;
      log.epoch = st.epoch;
      log.step = ++st.step;
      log.losses = train_step(batch, st.players, cfg, st.mask_rng, temperature);
      if (hooks.on_step) hooks.on_step(log, st.players);
      result.steps.push_back(log);
    }
    EpochRecord rec;
    rec.epoch = st.epoch;
    rec.dev = evaluate(st.players, split.dev, cfg.seed, st.epoch);
    rec.dev.diagnostics["L_i"] = result.epoch_mean(st.epoch, &LossBreakdown::l_i);
    rec.dev.diagnostics["L_e"] = result.epoch_mean(st.epoch, &LossBreakdown::l_e);
    rec.dev.diagnostics["L_reg"] = result.epoch_mean(st.epoch, &LossBreakdown::l_reg);
    rec.dev.diagnostics["gap"] = result.epoch_mean(st.epoch, &LossBreakdown::gap);
    rec.dev.diagnostics["mask_density"] =
        result.epoch_mean(st.epoch, &LossBreakdown::mask_density);
    if (hooks.keep_checkpoints) rec.players = st.players;
    if (hooks.on_epoch) hooks.on_epoch(rec, st);
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

// Invrat runs use the windowed FPR rule, the others max dev F1.
inline Selection select_for_mode(const TrainConfig& cfg,
                                 std::span<const MetricsReport> dev_reports) {
  if (cfg.mode == RunMode::kInvrat) return select_checkpoint(dev_reports, cfg.selection());
  return select_max_f1(dev_reports);
}

}  // namespace invrat

#endif  // INVRAT_GAME_HPP_
