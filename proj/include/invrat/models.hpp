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

// Small text networks shared by the three players.
//
// Encoder: token embedding (vocab x n) -> windowed convolution over the
// sequence (window w, width h, tanh) -> either mean pooling over non-PAD
// positions and a 2-logit head (predictors) or a per-position 2-logit head
// (generator). PAD embeds to the zero vector and is never trained, so padding
// a sequence cannot change what the convolution sees at real positions.

#ifndef INVRAT_MODELS_HPP_
#define INVRAT_MODELS_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "invrat/attributes.hpp"
#include "invrat/autodiff.hpp"
#include "invrat/corpus.hpp"
#include "invrat/error.hpp"

namespace invrat {

struct ModelShape {
  int vocab_size = 0;
  int embed_dim = 32;
  int hidden_dim = 32;
  int window = 3;

  void validate() const {
    if (vocab_size <= Vocabulary::kNumReserved) {
      throw Error(ErrorKind::kInvalidArgument, "vocabulary has no regular tokens");
    }
    if (embed_dim < 1 || hidden_dim < 1) {
      throw Error(ErrorKind::kInvalidArgument, "model dimensions must be >= 1");
    }
    if (window < 1 || window % 2 == 0) {
      throw Error(ErrorKind::kInvalidArgument, "window must be odd and >= 1");
    }
  }
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream seed for (run seed, purpose tag).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x51ed2701ULL));
}

inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols,
                             std::mt19937_64& rng, double bound = 0.1) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

// Predictor heads emit 2 logits per document, the generator head 2 logits per
// token (column 1 = keep / toxic).
struct EncoderParams {
  ModelShape shape;
  Param embedding;
  Param conv_weight;
  Param conv_bias;
  Param head_weight;
  Param head_bias;

  EncoderParams() = default;

  EncoderParams(const ModelShape& s, std::uint64_t seed) : shape(s) {
    s.validate();
    std::mt19937_64 rng(seed);
    Matrix emb = uniform_matrix(s.vocab_size, s.embed_dim, rng);
    emb.row(Vocabulary::kPad).setZero();
    embedding = Param("embedding", std::move(emb));
    conv_weight = Param("conv_weight",
                        uniform_matrix(s.window * s.embed_dim, s.hidden_dim, rng));
    conv_bias = Param("conv_bias", uniform_matrix(1, s.hidden_dim, rng));
    head_weight = Param("head_weight", uniform_matrix(s.hidden_dim, 2, rng));
    head_bias = Param("head_bias", uniform_matrix(1, 2, rng));
  }

  std::vector<Param*> params() {
    return {&embedding, &conv_weight, &conv_bias, &head_weight, &head_bias};
  }
  std::vector<const Param*> params() const {
    return {&embedding, &conv_weight, &conv_bias, &head_weight, &head_bias};
  }
};

struct EnvEmbedding {
  Param table;

  EnvEmbedding() = default;
  EnvEmbedding(int embed_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    table = Param("env_embedding",
                  uniform_matrix(EnvironmentId::kNumEnvironments, embed_dim, rng));
  }
};

inline std::vector<bool> non_pad_positions(std::span<const int> tokens) {
  std::vector<bool> keep(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    keep[i] = tokens[i] != Vocabulary::kPad;
  }
  return keep;
}

// L x n token embeddings.
inline Var embed(Tape& tape, EncoderParams& params, std::span<const int> tokens) {
  if (tokens.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "cannot embed an empty sequence");
  }
  return ad::embedding(tape, params.embedding, tokens, Vocabulary::kPad);
}

// Embeddings with a keep mask: row t is m_t * E[x_t] + (1 - m_t) * E[MASKED],
// and stays zero at PAD. With a hard 0/1 mask this is exactly the embedding
// of the masked sequence.
inline Var embed_masked(Tape& tape, EncoderParams& params,
                        std::span<const int> tokens, Var mask) {
  Var words = embed(tape, params, tokens);
  const int masked_id = Vocabulary::kMasked;
  Var masked_row = ad::embedding(tape, params.embedding,
                                 std::span<const int>(&masked_id, 1));
  Matrix real(static_cast<Eigen::Index>(tokens.size()), 1);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    real(static_cast<Eigen::Index>(t), 0) = tokens[t] == Vocabulary::kPad ? 0.0 : 1.0;
  }
  Var drop = ad::mul(ad::affine(mask, -1.0, 1.0), tape.constant(std::move(real)));
  return ad::add(ad::scale_rows(words, mask), ad::outer(drop, masked_row));
}

inline void check_env_index(int env) {
  if (env < 0 || env >= EnvironmentId::kNumEnvironments) {
    throw Error(ErrorKind::kOutOfRange,
                "environment index " + std::to_string(env) + " not in 0..3");
  }
}

// Adds Emb_env(env) to every position.
inline Var add_env(Tape& tape, Var vectors, int env, EnvEmbedding& env_table) {
  check_env_index(env);
  Var row = ad::embedding(tape, env_table.table, std::span<const int>(&env, 1));
  return ad::add_row(vectors, row);
}

inline Var embed_with_env(Tape& tape, EncoderParams& params,
                          std::span<const int> tokens, int env,
                          EnvEmbedding& env_table) {
  check_env_index(env);
  return add_env(tape, embed(tape, params, tokens), env, env_table);
}

// L x h hidden states.
inline Var encode(Tape& tape, EncoderParams& params, Var vectors) {
  Var windows = ad::unfold(vectors, params.shape.window);
  Var pre = ad::add_row(ad::matmul(windows, tape.param(params.conv_weight)),
                        tape.param(params.conv_bias));
  return ad::tanh(pre);
}

// 1 x 2 document logits. `tokens` marks which positions are PAD.
inline Var classify(Tape& tape, EncoderParams& params, Var vectors,
                    std::span<const int> tokens) {
  if (vectors.rows() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "cannot classify an empty sequence");
  }
  const auto keep = non_pad_positions(tokens);
  bool any = false;
  for (bool k : keep) any = any || k;
  if (!any) {
    throw Error(ErrorKind::kInvalidArgument, "input is all PAD");
  }
  Var pooled = ad::masked_mean_rows(encode(tape, params, vectors), keep);
  return ad::add_row(ad::matmul(pooled, tape.param(params.head_weight)),
                     tape.param(params.head_bias));
}

// L x 2 per-token logits for the generator.
inline Var token_logits(Tape& tape, EncoderParams& params, Var vectors) {
  if (vectors.rows() == 0) {
    throw Error(ErrorKind::kInvalidArgument, "cannot score an empty sequence");
  }
  return ad::add_row(
      ad::matmul(encode(tape, params, vectors), tape.param(params.head_weight)),
      tape.param(params.head_bias));
}

}  // namespace invrat

#endif  // INVRAT_MODELS_HPP_
