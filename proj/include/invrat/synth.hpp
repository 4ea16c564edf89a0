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

// Synthetic biased corpora. Each document carries an invariant toxic-signal
// token (label-dependent, optionally noisy) and, with an environment-specific
// rate, a spurious token whose association with the label differs between
// environments.

#ifndef INVRAT_SYNTH_HPP_
#define INVRAT_SYNTH_HPP_

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "invrat/corpus.hpp"
#include "invrat/error.hpp"
#include "json.hpp"

namespace invrat {

struct SynthSpec {
  int n_train = 2000;
  int n_dev = 500;
  int n_test = 500;
  int min_length = 6;
  int max_length = 10;
  int base_vocab_size = 200;
  std::vector<std::string> toxic_tokens = {"tox0", "tox1", "tox2", "tox3",
                                           "tox4"};
  std::vector<std::string> spurious_tokens = {"spur0", "spur1", "spur2"};
  // Target P(label = 1 | spurious token present) per environment.
  std::vector<double> env_correlations = {0.9, 0.5};
  // P(spurious token present) per environment. 0.5 with a 0.5 prior gives the
  // symmetric scheme P(S | y=1) = c, P(S | y=0) = 1 - c.
  std::vector<double> spurious_rates = {0.5, 0.5};
  double label_prior = 0.5;
  // Probability that the toxic-signal insertion decision is flipped.
  double noise_rate = 0.0;
  std::uint64_t seed = 13;

  int num_environments() const {
    return static_cast<int>(env_correlations.size());
  }

  // P(S present | label, env) implied by the target correlation and rate.
  double spurious_given_label(int env, int label) const {
    const auto e = static_cast<std::size_t>(env);
    const double c = env_correlations[e];
    const double s = spurious_rates[e];
    return label == 1 ? c * s / label_prior
                      : (1.0 - c) * s / (1.0 - label_prior);
  }

  void validate() const {
    auto fail = [](const std::string& msg) {
      throw Error(ErrorKind::kInvalidArgument, "synth spec: " + msg);
    };
    auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (n_train < 1 || n_dev < 1 || n_test < 1) fail("every split needs >= 1 doc");
    if (min_length < 2 || max_length < min_length) {
      fail("need 2 <= min_length <= max_length");
    }
    if (base_vocab_size < 1) fail("base_vocab_size must be >= 1");
    if (toxic_tokens.empty() || spurious_tokens.empty()) {
      fail("toxic and spurious token sets must be non-empty");
    }
    if (!is_prob(label_prior) || label_prior <= 0.0 || label_prior >= 1.0) {
      fail("label_prior must lie strictly inside (0, 1)");
    }
    if (!is_prob(noise_rate)) fail("noise_rate must lie in [0, 1]");
    if (env_correlations.size() < 2 || env_correlations.size() > 4) {
      fail("need between 2 and 4 environments");
    }
    if (spurious_rates.size() != env_correlations.size()) {
      fail("spurious_rates must have one entry per environment");
    }
    std::set<double> distinct;
    for (int e = 0; e < num_environments(); ++e) {
      const auto i = static_cast<std::size_t>(e);
      if (!is_prob(env_correlations[i]) || !is_prob(spurious_rates[i])) {
        fail("environment probabilities must lie in [0, 1]");
      }
      distinct.insert(env_correlations[i]);
      for (int y = 0; y < 2; ++y) {
        if (spurious_given_label(e, y) > 1.0 + 1e-12) {
          fail("environment " + std::to_string(e) +
               " needs P(S | label) > 1; lower its spurious rate");
        }
      }
    }
    if (distinct.size() < 2) {
      fail("at least two environments must have distinct correlations");
    }
    std::set<std::string> seen;
    auto check_token = [&](const std::string& t) {
      const auto norm = normalize_words(t);
      if (norm.size() != 1 || norm[0] != t) {
        fail("token '" + t + "' is not a normalized single token");
      }
      if (!seen.insert(t).second) fail("token '" + t + "' appears twice");
      if (t.size() > 1 && t[0] == 'w' &&
          std::all_of(t.begin() + 1, t.end(), ::isdigit)) {
        fail("token '" + t + "' collides with base vocabulary names");
      }
    };
    for (const auto& t : toxic_tokens) check_token(t);
    for (const auto& t : spurious_tokens) check_token(t);
  }
};

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = nlohmann::json{{"n_train", s.n_train},
                     {"n_dev", s.n_dev},
                     {"n_test", s.n_test},
                     {"min_length", s.min_length},
                     {"max_length", s.max_length},
                     {"base_vocab_size", s.base_vocab_size},
                     {"toxic_tokens", s.toxic_tokens},
                     {"spurious_tokens", s.spurious_tokens},
                     {"env_correlations", s.env_correlations},
                     {"spurious_rates", s.spurious_rates},
                     {"label_prior", s.label_prior},
                     {"noise_rate", s.noise_rate},
                     {"seed", s.seed}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  if (!j.is_object()) {
    throw Error(ErrorKind::kInvalidArgument, "synth spec must be a JSON object");
  }
  const nlohmann::json defaults = SynthSpec{};
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "synth spec: unknown key '" + key + "'");
    }
  }
  try {
    if (j.contains("n_train")) j.at("n_train").get_to(s.n_train);
    if (j.contains("n_dev")) j.at("n_dev").get_to(s.n_dev);
    if (j.contains("n_test")) j.at("n_test").get_to(s.n_test);
    if (j.contains("min_length")) j.at("min_length").get_to(s.min_length);
    if (j.contains("max_length")) j.at("max_length").get_to(s.max_length);
    if (j.contains("base_vocab_size")) {
      j.at("base_vocab_size").get_to(s.base_vocab_size);
    }
    if (j.contains("toxic_tokens")) j.at("toxic_tokens").get_to(s.toxic_tokens);
    if (j.contains("spurious_tokens")) {
      j.at("spurious_tokens").get_to(s.spurious_tokens);
    }
    if (j.contains("env_correlations")) {
      j.at("env_correlations").get_to(s.env_correlations);
      if (!j.contains("spurious_rates")) {
        s.spurious_rates.assign(s.env_correlations.size(), 0.5);
      }
    }
    if (j.contains("spurious_rates")) {
      j.at("spurious_rates").get_to(s.spurious_rates);
    }
    if (j.contains("label_prior")) j.at("label_prior").get_to(s.label_prior);
    if (j.contains("noise_rate")) j.at("noise_rate").get_to(s.noise_rate);
    if (j.contains("seed")) j.at("seed").get_to(s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string("synth spec: ") + e.what());
  }
}

struct EnvironmentStats {
  int environment = 0;
  long long n_docs = 0;
  long long n_spurious = 0;
  long long n_spurious_toxic = 0;

  double p_toxic_given_spurious() const {
    return n_spurious == 0 ? 0.0
                           : static_cast<double>(n_spurious_toxic) /
                                 static_cast<double>(n_spurious);
  }
};

struct SynthCorpus {
  SynthSpec spec;
  DatasetSplit split;
  Vocabulary vocab;
  std::vector<EnvironmentStats> realized;

  nlohmann::json sidecar() const {
    nlohmann::json envs = nlohmann::json::array();
    for (const auto& r : realized) {
      envs.push_back({{"environment", r.environment},
                      {"n_docs", r.n_docs},
                      {"n_spurious", r.n_spurious},
                      {"n_spurious_toxic", r.n_spurious_toxic},
                      {"p_toxic_given_spurious", r.p_toxic_given_spurious()}});
    }
    return {{"spec", spec},
            {"realized", envs},
            {"splits",
             {{"train", split.train.size()},
              {"dev", split.dev.size()},
              {"test", split.test.size()}}}};
  }
};

inline bool contains_any(const std::vector<std::string>& words,
                         const std::vector<std::string>& set) {
  for (const auto& w : words) {
    if (std::find(set.begin(), set.end(), w) != set.end()) return true;
  }
  return false;
}

// Spurious-token-bearing documents are tagged nOI so the per-attribute FPR
// of the evaluation module measures exactly the spurious-token bias.
inline SynthCorpus synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coin = [&](double p) { return unit(rng) < p; };
  auto pick = [&](int n) {
    return static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng));
  };

  SynthCorpus out;
  out.spec = spec;
  out.realized.resize(static_cast<std::size_t>(spec.num_environments()));
  for (int e = 0; e < spec.num_environments(); ++e) {
    out.realized[static_cast<std::size_t>(e)].environment = e;
  }

  auto make_docs = [&](int count, const std::string& prefix) {
    std::vector<Document> docs;
    docs.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      Document d;
      const int env = pick(spec.num_environments());
      const int label = coin(spec.label_prior) ? 1 : 0;
      bool has_toxic = label == 1;
      if (coin(spec.noise_rate)) has_toxic = !has_toxic;
      const bool has_spurious = coin(spec.spurious_given_label(env, label));
      const int length = spec.min_length +
                         pick(spec.max_length - spec.min_length + 1);
      d.words.resize(static_cast<std::size_t>(length));
      for (auto& w : d.words) w = "w" + std::to_string(pick(spec.base_vocab_size));
      const int toxic_pos = pick(length);
      if (has_toxic) {
        d.words[static_cast<std::size_t>(toxic_pos)] =
            spec.toxic_tokens[static_cast<std::size_t>(
                pick(static_cast<int>(spec.toxic_tokens.size())))];
      }
      if (has_spurious) {
        int pos = pick(length);
        if (has_toxic && pos == toxic_pos) pos = (pos + 1) % length;
        d.words[static_cast<std::size_t>(pos)] =
            spec.spurious_tokens[static_cast<std::size_t>(
                pick(static_cast<int>(spec.spurious_tokens.size())))];
        d.attributes.insert(Attribute::kNoi);
      }
      char id[32];
      std::snprintf(id, sizeof(id), "%s-%06d", prefix.c_str(), i);
      d.id = id;
      for (std::size_t k = 0; k < d.words.size(); ++k) {
        if (k > 0) d.raw_text += ' ';
        d.raw_text += d.words[k];
      }
      d.label = label;
      d.attributes_tagged = true;
      d.dialect = Dialect::kOther;
      d.environment = env;
      auto& stats = out.realized[static_cast<std::size_t>(env)];
      ++stats.n_docs;
      if (has_spurious) {
        ++stats.n_spurious;
        stats.n_spurious_toxic += label;
      }
      docs.push_back(std::move(d));
    }
    return docs;
  };

  out.split.train = make_docs(spec.n_train, "train");
  out.split.dev = make_docs(spec.n_dev, "dev");
  out.split.test = make_docs(spec.n_test, "test");
  const double total = spec.n_train + spec.n_dev + spec.n_test;
  out.split.fractions = {spec.n_train / total, spec.n_dev / total,
                         spec.n_test / total};
  out.split.seed = spec.seed;

  std::vector<std::string> texts;
  for (const auto& d : out.split.train) texts.push_back(d.raw_text);
  out.vocab = build_vocab(texts, 1);
  for (auto* part : {&out.split.train, &out.split.dev, &out.split.test}) {
    for (auto& d : *part) d.tokens = words_to_ids(d.words, out.vocab);
  }
  return out;
}

}  // namespace invrat

#endif  // INVRAT_SYNTH_HPP_
