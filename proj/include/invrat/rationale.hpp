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

// Rationale masks: straight-through Gumbel-softmax sampling, masking and the
// sparsity/continuity regularizer.

#ifndef INVRAT_RATIONALE_HPP_
#define INVRAT_RATIONALE_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "invrat/autodiff.hpp"
#include "invrat/corpus.hpp"
#include "invrat/error.hpp"

namespace invrat {

struct RationaleMask {
  std::vector<int> hard;     // 1 = keep
  std::vector<double> soft;  // relaxed keep probability
  double temperature = 1.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return hard.size(); }
  double density() const {
    if (hard.empty()) return 0.0;
    double kept = 0.0;
    for (int h : hard) kept += h;
    return kept / static_cast<double>(hard.size());
  }
};

// How the mask enters the predictors' forward pass during training.
enum class MaskMode {
  kStraightThrough,  // forward hard, backward through soft
  kRelaxed,          // forward soft; fully differentiable, used by gradient checks
};

// Gumbel(0, 1) noise for the (drop, keep) pair of every position; the keep
// decision only depends on the difference keep - drop.
inline std::vector<double> gumbel_noise_difference(std::size_t n,
                                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(
      std::numeric_limits<double>::min(), 1.0);
  auto gumbel = [&] { return -std::log(-std::log(unit(rng))); };
  std::vector<double> diff(n);
  for (auto& d : diff) {
    const double drop = gumbel();
    const double keep = gumbel();
    d = keep - drop;
  }
  return diff;
}

inline void check_temperature(double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "temperature must be > 0");
  }
}

inline void check_token_logits(const Matrix& logits, std::span<const int> tokens) {
  if (logits.cols() != 2 || logits.rows() != static_cast<Eigen::Index>(tokens.size())) {
    throw Error(ErrorKind::kInvalidArgument, "token logits must be N x 2");
  }
}

// Value-level sampler. `tokens` marks PAD positions, which are forced to 0.
inline RationaleMask sample_mask(const Matrix& token_logits,
                                 std::span<const int> tokens, double temperature,
                                 std::uint64_t seed) {
  check_temperature(temperature);
  check_token_logits(token_logits, tokens);
  std::mt19937_64 rng(seed);
  const auto noise = gumbel_noise_difference(tokens.size(), rng);
  RationaleMask m;
  m.temperature = temperature;
  m.seed = seed;
  m.hard.resize(tokens.size());
  m.soft.resize(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    const double z = token_logits(r, 1) - token_logits(r, 0) + noise[t];
    if (tokens[t] == Vocabulary::kPad) {
      m.soft[t] = 0.0;
      m.hard[t] = 0;
      continue;
    }
    m.soft[t] = ad::stable_sigmoid(z / temperature);
    m.hard[t] = z > 0.0 ? 1 : 0;
  }
  return m;
}

// Inference mask: keep iff the keep logit beats the drop logit. No sampling.
inline RationaleMask argmax_mask(const Matrix& token_logits,
                                 std::span<const int> tokens) {
  check_token_logits(token_logits, tokens);
  RationaleMask m;
  m.hard.resize(tokens.size());
  m.soft.resize(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    const double z = token_logits(r, 1) - token_logits(r, 0);
    const bool pad = tokens[t] == Vocabulary::kPad;
    m.soft[t] = pad ? 0.0 : ad::stable_sigmoid(z);
    m.hard[t] = (!pad && z > 0.0) ? 1 : 0;
  }
  return m;
}

struct MaskVars {
  Var mask;  // N x 1, what the predictors see
  Var soft;  // N x 1 relaxed keep probabilities, what the regularizer sees
  RationaleMask values;
};

// Differentiable sampler on a tape; `noise` comes from
// gumbel_noise_difference so the same draw can be replayed.
inline MaskVars sample_mask_var(Tape& tape, Var logits, std::span<const int> tokens,
                                const std::vector<double>& noise,
                                double temperature, MaskMode mode) {
  check_temperature(temperature);
  check_token_logits(logits.value(), tokens);
  if (noise.size() != tokens.size()) {
    throw Error(ErrorKind::kInvalidArgument, "noise length differs from sequence");
  }
  const auto n = static_cast<Eigen::Index>(tokens.size());
  Matrix shift(n, 1);
  Matrix pad_keep(n, 1);
  for (Eigen::Index t = 0; t < n; ++t) {
    shift(t, 0) = noise[static_cast<std::size_t>(t)];
    pad_keep(t, 0) = tokens[static_cast<std::size_t>(t)] == Vocabulary::kPad ? 0.0 : 1.0;
  }
  Var z = ad::add(ad::sub(ad::column(logits, 1), ad::column(logits, 0)),
                  tape.constant(shift));
  Var soft = ad::mul(ad::sigmoid(ad::affine(z, 1.0 / temperature)),
                     tape.constant(pad_keep));
  MaskVars out;
  out.values.temperature = temperature;
  out.values.hard.resize(tokens.size());
  out.values.soft.resize(tokens.size());
  Matrix hard(n, 1);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto i = static_cast<std::size_t>(t);
    const bool keep = pad_keep(t, 0) > 0.0 && z.value()(t, 0) > 0.0;
    hard(t, 0) = keep ? 1.0 : 0.0;
    out.values.hard[i] = keep ? 1 : 0;
    out.values.soft[i] = soft.value()(t, 0);
  }
  out.soft = soft;
  out.mask = mode == MaskMode::kStraightThrough
                 ? ad::straight_through(std::move(hard), soft)
                 : soft;
  return out;
}

// Z = m (.) X: dropped positions become MASKED; PAD stays PAD.
inline std::vector<int> apply_mask(const Document& doc, const RationaleMask& mask) {
  if (mask.size() != doc.tokens.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "mask length " + std::to_string(mask.size()) +
                    " differs from document length " +
                    std::to_string(doc.tokens.size()));
  }
  std::vector<int> z = doc.tokens;
  for (std::size_t t = 0; t < z.size(); ++t) {
    if (mask.hard[t] == 0 && z[t] != Vocabulary::kPad) z[t] = Vocabulary::kMasked;
  }
  return z;
}

struct RegWeights {
  double alpha = 0.2;
  double lambda1 = 1.0;
  double lambda2 = 5.0;
  // Penalize each mask's density separately instead of the batch mean.
  bool per_example = false;
};

// lambda1 * | mean_i(|m_i|_1 / N_i) - alpha | + lambda2 * mean_i sum_n |m_n - m_{n-1}|
inline Var reg_loss_var(Tape& tape, std::span<const Var> masks, const RegWeights& w) {
  if (masks.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "reg_loss needs at least one mask");
  }
  const double inv_batch = 1.0 / static_cast<double>(masks.size());
  Var density_sum = tape.scalar(0.0);
  Var sparsity_sum = tape.scalar(0.0);
  Var continuity_sum = tape.scalar(0.0);
  for (const Var& m : masks) {
    if (m.rows() < 1 || m.cols() != 1) {
      throw Error(ErrorKind::kInvalidArgument, "masks must be N x 1 with N >= 1");
    }
    Var density = ad::affine(ad::sum(m), 1.0 / static_cast<double>(m.rows()));
    if (w.per_example) {
      sparsity_sum = ad::add(sparsity_sum, ad::abs(ad::affine(density, 1.0, -w.alpha)));
    } else {
      density_sum = ad::add(density_sum, density);
    }
    if (m.rows() > 1) {
      continuity_sum = ad::add(continuity_sum, ad::sum(ad::abs(ad::row_diff(m))));
    }
  }
  Var sparsity =
      w.per_example
          ? ad::affine(sparsity_sum, inv_batch)
          : ad::abs(ad::affine(density_sum, inv_batch, -w.alpha));
  return ad::add(ad::affine(sparsity, w.lambda1),
                 ad::affine(continuity_sum, w.lambda2 * inv_batch));
}

inline double reg_loss(std::span<const std::vector<double>> masks, const RegWeights& w) {
  Tape tape(false);
  std::vector<Var> vars;
  for (const auto& m : masks) {
    Matrix col(static_cast<Eigen::Index>(m.size()), 1);
    for (std::size_t i = 0; i < m.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = m[i];
    vars.push_back(tape.constant(std::move(col)));
  }
  return reg_loss_var(tape, vars, w).scalar();
}

inline double reg_loss(const RationaleMask& mask, const RegWeights& w) {
  std::vector<std::vector<double>> one = {mask.soft};
  return reg_loss(one, w);
}

}  // namespace invrat

#endif  // INVRAT_RATIONALE_HPP_
