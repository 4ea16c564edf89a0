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

#include <gtest/gtest.h>

#include "invrat/checkpoint.hpp"
#include "invrat/synth.hpp"
#include "test_util.hpp"

namespace invrat {
namespace {

using testing::TempDir;

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, MismatchIsIntegrityError) {
  TempDir dir("digest");
  testing::write_text(dir / "f.tsv", "a\tb\n");
  const std::string d = file_digest(dir / "f.tsv");
  EXPECT_NO_THROW(verify_digest(dir / "f.tsv", d));
  testing::write_text(dir / "f.tsv", "a\tc\n");
  try {
    verify_digest(dir / "f.tsv", d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIntegrity);
  }
}

TEST(MatrixJson, RoundTripIsExact) {
  Matrix m(2, 3);
  m << 0.1, -1e-300, 3.0, 1.0 / 3.0, 2e17, -0.0;
  const Matrix back = matrix_from_json(nlohmann::json::parse(matrix_to_json(m).dump()));
  EXPECT_EQ(back, m);
  nlohmann::json bad = matrix_to_json(m);
  bad["rows"] = 4;
  EXPECT_THROW(matrix_from_json(bad), Error);
}

TEST(RngState, RoundTrip) {
  std::mt19937_64 rng(5);
  rng.discard(17);
  auto copy = rng_from_state(rng_state(rng));
  EXPECT_EQ(copy(), rng());
  EXPECT_THROW(rng_from_state("not a state"), Error);
}

struct Trained {
  SynthCorpus corpus;
  TrainConfig cfg;
  TrainResult result;
};

Trained train_small(RunMode mode) {
  SynthSpec spec;
  spec.n_train = 48;
  spec.n_dev = 16;
  spec.n_test = 16;
  spec.base_vocab_size = 30;
  Trained t{synth_generate(spec), {}, {}};
  t.cfg.mode = mode;
  t.cfg.embed_dim = 6;
  t.cfg.hidden_dim = 5;
  t.cfg.epochs = 2;
  t.result = train(t.corpus.split, t.corpus.vocab.size(), t.cfg);
  return t;
}

TEST(Checkpoint, InvratRoundTripPreservesEverything) {
  auto t = train_small(RunMode::kInvrat);
  TempDir dir("ckpt");
  auto& st = t.result.state;
  save_checkpoint(dir / "c.json", t.cfg, t.corpus.vocab, st.players, st.epoch, st.order_rng,
                  st.mask_rng);
  Checkpoint c = load_checkpoint(dir / "c.json");
  EXPECT_EQ(c.epoch, 2);
  EXPECT_EQ(nlohmann::json(c.config), nlohmann::json(t.cfg));
  EXPECT_EQ(c.vocab.size(), t.corpus.vocab.size());
  const auto a = st.players.all_params();
  const auto b = c.players.all_params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
  }
  auto order = rng_from_state(c.order_rng);
  auto mask = rng_from_state(c.mask_rng);
  EXPECT_EQ(order(), st.order_rng());
  EXPECT_EQ(mask(), st.mask_rng());
  // Restored players predict exactly as the originals.
  EXPECT_EQ(predict_labels(c.players, t.corpus.split.test),
            predict_labels(st.players, t.corpus.split.test));
}

TEST(Checkpoint, VanillaHasNoGeneratorTensors) {
  auto t = train_small(RunMode::kVanilla);
  auto& st = t.result.state;
  const auto j = checkpoint_to_json(t.cfg, t.corpus.vocab, st.players, st.epoch, st.order_rng,
                                    st.mask_rng);
  EXPECT_FALSE(j["players"].contains("generator"));
  EXPECT_EQ(j["mode"], "vanilla");
  Checkpoint c = checkpoint_from_json(j);
  EXPECT_FALSE(c.players.has_generator());
}

TEST(Checkpoint, RejectsMalformedContainers) {
  auto t = train_small(RunMode::kInvrat);
  auto& st = t.result.state;
  const auto good = checkpoint_to_json(t.cfg, t.corpus.vocab, st.players, st.epoch,
                                       st.order_rng, st.mask_rng);
  auto expect_parse_error = [](const nlohmann::json& j) {
    try {
      checkpoint_from_json(j);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kParse);
    }
  };
  auto j = good;
  j["format"] = "other";
  expect_parse_error(j);
  j = good;
  j["version"] = 2;
  expect_parse_error(j);
  j = good;
  j["players"].erase("env_embedding");
  expect_parse_error(j);
  j = good;
  j["players"]["invariant"]["conv_bias"] = matrix_to_json(Matrix::Zero(1, 2));
  expect_parse_error(j);
  j = good;
  j["shape"]["vocab_size"] = 3;
  expect_parse_error(j);
}

TEST(Manifest, WriteOnceAndRoundTrip) {
  TempDir dir("manifest");
  RunManifest m;
  m.config = nlohmann::json(TrainConfig{});
  m.input_digests = {{"train", sha256_hex("x")}};
  m.seeds = {1, 2, 3};
  m.layout = {{"log", "train_log.jsonl"}};
  m.write(dir / "manifest.json");
  const auto back = RunManifest::from_json(read_json(dir / "manifest.json"));
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.tool_version, kToolVersion);
  EXPECT_THROW(m.write(dir / "manifest.json"), Error);
}

TEST(Files, ReadErrors) {
  TempDir dir("files");
  EXPECT_THROW(read_file(dir / "missing"), Error);
  testing::write_text(dir / "bad.json", "{not json");
  try {
    read_json(dir / "bad.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParse);
  }
}

}  // namespace
}  // namespace invrat
