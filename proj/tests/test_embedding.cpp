// Copyright 2026 The runwayseq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "runwayseq/embedding.hpp"
#include "runwayseq/gradcheck.hpp"
#include "test_util.hpp"

using namespace runwayseq;
using runwayseq::testing::random_matrix;
using runwayseq::testing::TempDir;
using runwayseq::testing::toy_config;

namespace {

Corpus split_toy(std::uint64_t seed = 7) {
  Rng rng(seed);
  return split_corpus(generate_synthetic(toy_config(seed)).corpus, {}, rng);
}

EmbeddingHyper small_hyper(int epochs) {
  EmbeddingHyper h;
  h.embed_dim = 4;
  h.batch_size = 4;
  h.max_epoch = epochs;
  h.seed = 5;
  return h;
}

}  // namespace

TEST_CASE("collection embedding invariances") {
  Rng rng(1);
  const auto params = EmbeddingParams::xavier(8, 5, 3, rng);
  const Matrix looks = random_matrix(4, 8, rng);
  const Vector h = collection_embed(params, looks).h_c;
  CHECK(h.size() == 5);

  Matrix permuted(4, 8);
  permuted << looks.row(2), looks.row(0), looks.row(3), looks.row(1);
  CHECK(collection_embed(params, permuted).h_c == h);

  Matrix duplicated(5, 8);
  duplicated << looks, looks.row(1);
  CHECK(collection_embed(params, duplicated).h_c == h);

  // A single look embeds to its own affine image.
  const Vector single = collection_embed(params, looks.topRows(1)).h_c;
  CHECK((single - (params.look_w * looks.row(0).transpose() + params.look_b)).norm() < 1e-12);

  CHECK_THROWS_AS(collection_embed(params, Matrix(0, 8)), ShapeError);
  CHECK_THROWS_AS(collection_embed(params, Matrix::Ones(2, 7)), ShapeError);
}

TEST_CASE("zero weights predict uniformly") {
  const auto params = EmbeddingParams::zeros(6, 3, 202);
  const Vector h = collection_embed(params, Matrix::Ones(2, 6)).h_c;
  const Vector pd = predict_designer(params, h);
  const Vector ps = predict_season(params, h);
  CHECK(pd.size() == 202);
  for (Index i = 0; i < pd.size(); ++i) CHECK(pd(i) == doctest::Approx(1.0 / 202));
  CHECK(ps(0) == doctest::Approx(0.5));

  const Matrix looks = Matrix::Ones(2, 6);
  std::vector<Example> batch{{&looks, 17, 0}, {&looks, 201, 1}};
  const auto lg = batch_loss(params, batch, Task::Designer);
  CHECK(lg.loss == doctest::Approx(5.308267697401205).epsilon(1e-12));
  CHECK(batch_loss(params, batch, Task::Season).loss ==
        doctest::Approx(0.6931471805599453).epsilon(1e-12));

  std::vector<Example> bad{{&looks, 202, 0}};
  CHECK_THROWS_AS(batch_loss(params, bad, Task::Designer), std::out_of_range);
  CHECK_THROWS_AS(batch_loss(params, {}, Task::Designer), std::invalid_argument);
}

TEST_CASE("batch_loss gradients match finite differences") {
  Rng rng(31);
  auto params = EmbeddingParams::xavier(8, 4, 3, rng);
  params.look_b = runwayseq::testing::random_vector(4, rng, 0.1);
  params.designer_b = runwayseq::testing::random_vector(3, rng, 0.1);
  params.season_b = runwayseq::testing::random_vector(2, rng, 0.1);
  std::vector<Matrix> looks;
  for (int i = 0; i < 4; ++i) looks.push_back(random_matrix(2 + i % 3, 8, rng));
  std::vector<Example> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({&looks[i], i % 3, i % 2});

  for (Task task : {Task::Designer, Task::Season}) {
    CAPTURE(to_string(task));
    const auto lg = batch_loss(params, batch, task);
    const auto res = finite_difference_check(
        [&] { return batch_loss(params, batch, task).loss; }, params.views(),
        std::as_const(lg.grad).views());
    CHECK(res.max_rel_error < 1e-6);
    CHECK(res.coordinates_checked > 0);
    // The untrained head gets no gradient.
    if (task == Task::Designer) {
      CHECK(lg.grad.season_w.isZero(0));
    } else {
      CHECK(lg.grad.designer_w.isZero(0));
    }
  }
}

TEST_CASE("train_embedding") {
  const Corpus corpus = split_toy();

  SUBCASE("zero epochs returns the initialization") {
    const auto t0 = train_embedding(corpus, small_hyper(0));
    Rng rng(5);
    auto init = EmbeddingParams::xavier(8, 4, 3, rng);
    init.designer_hash = corpus.designer_hash();
    CHECK(t0.params == init);
    CHECK(t0.log.empty());
  }

  SUBCASE("epochs alternate tasks, starting with season") {
    const auto t = train_embedding(corpus, small_hyper(6));
    REQUIRE(t.log.size() == 6);
    for (std::size_t i = 0; i < t.log.size(); ++i) {
      CHECK(t.log[i].epoch == static_cast<int>(i));
      CHECK(t.log[i].task == (i % 2 == 0 ? Task::Season : Task::Designer));
      CHECK(std::isfinite(t.log[i].train_loss));
    }
    CHECK(t.best_epoch >= 0);
    std::ostringstream out;
    write_training_log(t.log, out);
    const std::string text = out.str();
    CHECK(text.rfind("epoch\ttask\ttrain_loss\tval_loss\ttrain_acc\tval_acc\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  }

  SUBCASE("same seed, same result") {
    const auto a = train_embedding(corpus, small_hyper(4));
    const auto b = train_embedding(corpus, small_hyper(4));
    CHECK(a.params == b.params);
    auto other = small_hyper(4);
    other.seed = 6;
    CHECK_FALSE(train_embedding(corpus, other).params == a.params);
  }

  SUBCASE("learns designers on a separable corpus") {
    SynthConfig cfg;
    cfg.designers = 4;
    cfg.slots = 8;
    cfg.feature_dim = 16;
    cfg.looks_min = 2;
    cfg.looks_max = 3;
    Rng rng(3);
    const Corpus c = split_corpus(generate_synthetic(cfg).corpus, {}, rng);
    EmbeddingHyper h = small_hyper(40);
    h.embed_dim = 8;
    const auto t = train_embedding(c, h);
    const auto train = examples_for(c, Split::Train);
    CHECK(evaluate_head(t.params, train, Task::Designer).accuracy > 0.5);
  }
}

TEST_CASE("embed_all covers every collection") {
  const Corpus corpus = split_toy();
  Rng rng(2);
  const auto params = EmbeddingParams::xavier(8, 4, 3, rng);
  const auto table = embed_all(params, corpus);
  CHECK(table.size() == corpus.collections.size());
  CHECK(table.embed_dim() == 4);
  for (const auto& c : corpus.collections) {
    const Vector* h = table.find(c.designer, c.t);
    REQUIRE(h != nullptr);
    CHECK(*h == collection_embed(params, c.looks).h_c);
  }
  CHECK(table.find(0, 999) == nullptr);
}

TEST_CASE("embedding checkpoint round trip") {
  TempDir dir("emb_ckpt");
  Rng rng(8);
  auto params = EmbeddingParams::xavier(8, 4, 3, rng);
  params.designer_hash = 0x1234abcdULL;
  save_embedding(params, dir / "e.rwem");
  const auto back = load_embedding(dir / "e.rwem");
  CHECK(back == params);
  CHECK(back.designer_hash == params.designer_hash);

  std::string bytes = runwayseq::testing::read_bytes(dir / "e.rwem");
  std::ofstream(dir / "short.rwem", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_AS(load_embedding(dir / "short.rwem"), FormatError);
  std::ofstream(dir / "long.rwem", std::ios::binary) << bytes << 'x';
  CHECK_THROWS_AS(load_embedding(dir / "long.rwem"), FormatError);
  bytes[1] = '?';
  std::ofstream(dir / "magic.rwem", std::ios::binary) << bytes;
  CHECK_THROWS_AS(load_embedding(dir / "magic.rwem"), FormatError);
}
