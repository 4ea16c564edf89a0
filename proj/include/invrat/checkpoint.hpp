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

// JSON checkpoints and run manifests with SHA-256 input digests.

#ifndef INVRAT_CHECKPOINT_HPP_
#define INVRAT_CHECKPOINT_HPP_

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "invrat/corpus.hpp"
#include "invrat/error.hpp"
#include "invrat/game.hpp"
#include "invrat/players.hpp"
#include "json.hpp"

namespace invrat {

inline constexpr const char* kCheckpointFormat = "invrat-checkpoint";
inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kToolVersion = "invrat 1.0.0";

inline nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw Error(ErrorKind::kParse, "tensor shape does not match its data");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

inline nlohmann::json params_to_json(const std::vector<const Param*>& params) {
  nlohmann::json out = nlohmann::json::object();
  for (const Param* p : params) out[p->name] = matrix_to_json(p->value);
  return out;
}

inline void params_from_json(const nlohmann::json& j, const std::vector<Param*>& params) {
  for (Param* p : params) {
    Matrix m = matrix_from_json(j.at(p->name));
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw Error(ErrorKind::kParse, "tensor '" + p->name + "' has the wrong shape");
    }
    p->value = std::move(m);
  }
}

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

inline std::mt19937_64 rng_from_state(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream in(s);
  in >> rng;
  if (!in) throw Error(ErrorKind::kParse, "bad RNG state");
  return rng;
}

struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  PlayerSet players;
  int epoch = 0;
  std::string order_rng;
  std::string mask_rng;
};

inline nlohmann::json checkpoint_to_json(const TrainConfig& cfg, const Vocabulary& vocab,
                                         PlayerSet& players, int epoch,
                                         const std::mt19937_64& order_rng,
                                         const std::mt19937_64& mask_rng) {
  auto consts = [](std::vector<Param*> ps) {
    return std::vector<const Param*>(ps.begin(), ps.end());
  };
  nlohmann::json tensors = {{"invariant", params_to_json(consts(players.invariant_params()))}};
  if (players.has_generator()) {
    tensors["generator"] = params_to_json(consts(players.generator_params()));
    tensors["env_aware"] = params_to_json(consts(players.env_aware->params()));
    tensors["env_embedding"] = matrix_to_json(players.env_table->table.value);
  }
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"epoch", epoch},
          {"mode", train_mode_name(players.mode)},
          {"config", cfg},
          {"shape",
           {{"vocab_size", players.shape.vocab_size},
            {"embed_dim", players.shape.embed_dim},
            {"hidden_dim", players.shape.hidden_dim},
            {"window", players.shape.window}}},
          {"vocab", vocab.to_json()},
          {"players", tensors},
          {"rng", {{"order", rng_state(order_rng)}, {"mask", rng_state(mask_rng)}}}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw Error(ErrorKind::kParse, "not an invrat checkpoint");
    }
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorKind::kParse, "unsupported checkpoint version");
    }
    Checkpoint c;
    from_json(j.at("config"), c.config);
    c.vocab = Vocabulary::from_json(j.at("vocab"));
    c.epoch = j.at("epoch").get<int>();
    const auto& s = j.at("shape");
    const ModelShape shape{s.at("vocab_size").get<int>(), s.at("embed_dim").get<int>(),
                           s.at("hidden_dim").get<int>(), s.at("window").get<int>()};
    if (shape.vocab_size != c.vocab.size()) {
      throw Error(ErrorKind::kParse, "checkpoint vocabulary size mismatch");
    }
    const auto mode = parse_train_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorKind::kParse, "unknown checkpoint mode");
    c.players = PlayerSet::create(shape, *mode, c.config.seed, c.config.adamw());
    const auto& tensors = j.at("players");
    params_from_json(tensors.at("invariant"), c.players.invariant_params());
    if (c.players.has_generator()) {
      params_from_json(tensors.at("generator"), c.players.generator_params());
      params_from_json(tensors.at("env_aware"), c.players.env_aware->params());
      Matrix env = matrix_from_json(tensors.at("env_embedding"));
      if (env.rows() != c.players.env_table->table.value.rows() ||
          env.cols() != c.players.env_table->table.value.cols()) {
        throw Error(ErrorKind::kParse, "env embedding has the wrong shape");
      }
      c.players.env_table->table.value = std::move(env);
    }
    c.order_rng = j.at("rng").at("order").get<std::string>();
    c.mask_rng = j.at("rng").at("mask").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

inline std::string file_digest(const std::filesystem::path& path) {
  return sha256_hex(read_file(path));
}

inline void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg,
                            const Vocabulary& vocab, PlayerSet& players, int epoch,
                            const std::mt19937_64& order_rng,
                            const std::mt19937_64& mask_rng) {
  write_file(path, checkpoint_to_json(cfg, vocab, players, epoch, order_rng, mask_rng).dump() +
                       "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_json(path));
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  nlohmann::json config;
  std::map<std::string, std::string> input_digests;  // logical name -> sha256
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> layout;
  std::string tool_version = kToolVersion;

  nlohmann::json to_json() const {
    return {{"config", config},
            {"input_digests", input_digests},
            {"seeds", seeds},
            {"layout", layout},
            {"tool_version", tool_version}};
  }

  static RunManifest from_json(const nlohmann::json& j) {
    try {
      RunManifest m;
      m.config = j.at("config");
      m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      m.layout = j.at("layout").get<std::map<std::string, std::string>>();
      m.tool_version = j.at("tool_version").get<std::string>();
      return m;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kParse, std::string("manifest: ") + e.what());
    }
  }

  // Write-once: refuses to replace an existing manifest.
  void write(const std::filesystem::path& path) const {
    if (std::filesystem::exists(path)) {
      throw Error(ErrorKind::kIo, "manifest already exists: " + path.string());
    }
    write_json(path, to_json());
  }
};

// Throws kIntegrity when a file no longer matches its recorded digest.
inline void verify_digest(const std::filesystem::path& path, const std::string& expected) {
  const std::string actual = file_digest(path);
  if (actual != expected) {
    throw Error(ErrorKind::kIntegrity, "digest mismatch for " + path.string() +
                                           " (expected " + expected + ", got " + actual + ")");
  }
}

}  // namespace invrat

#endif  // INVRAT_CHECKPOINT_HPP_
