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

// The three players (rationale generator, environment-agnostic predictor,
// environment-aware predictor), their optimizers, and inference.

#ifndef INVRAT_PLAYERS_HPP_
#define INVRAT_PLAYERS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "invrat/models.hpp"
#include "invrat/optim.hpp"
#include "invrat/rationale.hpp"

namespace invrat {

enum class TrainMode { kVanilla, kInvrat };

inline const char* train_mode_name(TrainMode m) {
  return m == TrainMode::kVanilla ? "vanilla" : "invrat";
}

inline std::optional<TrainMode> parse_train_mode(std::string_view s) {
  if (s == "vanilla") return TrainMode::kVanilla;
  if (s == "invrat") return TrainMode::kInvrat;
  return std::nullopt;
}

// Seed tags for the independent random streams of a run.
enum SeedTag : std::uint64_t {
  kSeedInvariant = 1,
  kSeedGenerator = 2,
  kSeedEnvAware = 3,
  kSeedEnvTable = 4,
  kSeedOrder = 5,
  kSeedMask = 6,
};

// Parameter sets are disjoint: the env table belongs to the environment-aware
// predictor only. A vanilla set has no generator and no env-aware predictor.
struct PlayerSet {
  TrainMode mode = TrainMode::kVanilla;
  ModelShape shape;
  EncoderParams invariant;
  std::optional<EncoderParams> generator;
  std::optional<EncoderParams> env_aware;
  std::optional<EnvEmbedding> env_table;

  AdamW invariant_opt;
  AdamW generator_opt;
  AdamW env_aware_opt;

  static PlayerSet create(const ModelShape& shape, TrainMode mode,
                          std::uint64_t seed, const AdamWOptions& opt) {
    PlayerSet p;
    p.mode = mode;
    p.shape = shape;
    p.invariant = EncoderParams(shape, derive_seed(seed, kSeedInvariant));
    if (mode == TrainMode::kInvrat) {
      p.generator = EncoderParams(shape, derive_seed(seed, kSeedGenerator));
      p.env_aware = EncoderParams(shape, derive_seed(seed, kSeedEnvAware));
      p.env_table = EnvEmbedding(shape.embed_dim, derive_seed(seed, kSeedEnvTable));
    }
    p.reset_optimizers(opt);
    return p;
  }

  void reset_optimizers(const AdamWOptions& opt) {
    invariant_opt = AdamW(invariant_params(), opt);
    if (has_generator()) {
      generator_opt = AdamW(generator_params(), opt);
      env_aware_opt = AdamW(env_aware_params(), opt);
    }
  }

  bool has_generator() const { return generator.has_value(); }

  std::vector<Param*> invariant_params() { return invariant.params(); }
  std::vector<Param*> generator_params() {
    return generator ? generator->params() : std::vector<Param*>{};
  }
  std::vector<Param*> env_aware_params() {
    if (!env_aware) return {};
    auto ps = env_aware->params();
    ps.push_back(&env_table->table);
    return ps;
  }
  std::vector<Param*> all_params() {
    auto ps = invariant_params();
    for (Param* p : generator_params()) ps.push_back(p);
    for (Param* p : env_aware_params()) ps.push_back(p);
    return ps;
  }
  void zero_grads() {
    for (Param* p : all_params()) p->zero_grad();
  }
  bool all_finite() {
    for (Param* p : all_params()) {
      if (!p->value.allFinite()) return false;
    }
    return true;
  }
};

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

inline Matrix generator_token_logits(PlayerSet& players, std::span<const int> tokens) {
  if (!players.has_generator()) {
    throw Error(ErrorKind::kNoGenerator, "player set has no rationale generator");
  }
  Tape tape(false);
  return token_logits(tape, *players.generator, embed(tape, *players.generator, tokens))
      .value();
}

// Deterministic (argmax) rationale of a document.
inline RationaleMask inference_mask(PlayerSet& players, const Document& doc) {
  return argmax_mask(generator_token_logits(players, doc.tokens), doc.tokens);
}

struct Prediction {
  int label = 0;
  Matrix logits;
  std::optional<RationaleMask> mask;
};

// f_i on the document (vanilla) or on its argmax rationale (invrat).
inline Prediction predict(PlayerSet& players, const Document& doc) {
  Prediction out;
  Tape tape(false);
  if (players.has_generator()) {
    out.mask = inference_mask(players, doc);
    const auto z = apply_mask(doc, *out.mask);
    out.logits =
        classify(tape, players.invariant, embed(tape, players.invariant, z), z).value();
  } else {
    out.logits = classify(tape, players.invariant,
                          embed(tape, players.invariant, doc.tokens), doc.tokens)
                     .value();
  }
  out.label = out.logits(0, 1) > out.logits(0, 0) ? 1 : 0;
  return out;
}

inline std::vector<int> predict_labels(PlayerSet& players, std::span<const Document> docs) {
  std::vector<int> labels;
  labels.reserve(docs.size());
  for (const auto& d : docs) labels.push_back(predict(players, d).label);
  return labels;
}

}  // namespace invrat

#endif  // INVRAT_PLAYERS_HPP_
