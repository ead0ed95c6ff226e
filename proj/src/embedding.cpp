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

#include "runwayseq/embedding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "runwayseq/binary_io.hpp"

namespace runwayseq {

namespace fs = std::filesystem;

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;

const Matrix& head_w(const EmbeddingParams& p, Task task) {
  return task == Task::Designer ? p.designer_w : p.season_w;
}
const Vector& head_b(const EmbeddingParams& p, Task task) {
  return task == Task::Designer ? p.designer_b : p.season_b;
}
int label_of(const Example& e, Task task) {
  return task == Task::Designer ? e.designer : e.season;
}
}  // namespace

std::string_view to_string(Task task) {
  return task == Task::Designer ? "designer" : "season";
}

// ---------------------------------------------------------------------------
// EmbeddingParams

EmbeddingParams EmbeddingParams::zeros(Index features, Index embed,
                                       Index designers, Index seasons) {
  EmbeddingParams p;
  p.look_w = Matrix::Zero(embed, features);
  p.look_b = Vector::Zero(embed);
  p.designer_w = Matrix::Zero(designers, embed);
  p.designer_b = Vector::Zero(designers);
  p.season_w = Matrix::Zero(seasons, embed);
  p.season_b = Vector::Zero(seasons);
  return p;
}

EmbeddingParams EmbeddingParams::xavier(Index features, Index embed,
                                        Index designers, Rng& rng,
                                        Index seasons) {
  EmbeddingParams p = zeros(features, embed, designers, seasons);
  p.look_w = xavier_init(embed, features, rng);
  p.designer_w = xavier_init(designers, embed, rng);
  p.season_w = xavier_init(seasons, embed, rng);
  return p;
}

ParamViews EmbeddingParams::views() {
  return {flat(look_w),     flat(look_b), flat(designer_w),
          flat(designer_b), flat(season_w), flat(season_b)};
}

GradViews EmbeddingParams::views() const {
  return {flat(look_w),     flat(look_b), flat(designer_w),
          flat(designer_b), flat(season_w), flat(season_b)};
}

void EmbeddingParams::check_shapes() const {
  const Index E = embed_dim();
  if (look_b.size() != E || designer_w.cols() != E || season_w.cols() != E ||
      designer_b.size() != designer_w.rows() ||
      season_b.size() != season_w.rows()) {
    throw ShapeError("embedding params: inconsistent tensor shapes");
  }
}

bool EmbeddingParams::all_finite() const {
  return look_w.allFinite() && look_b.allFinite() && designer_w.allFinite() &&
         designer_b.allFinite() && season_w.allFinite() && season_b.allFinite();
}

bool EmbeddingParams::operator==(const EmbeddingParams& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  };
  return designer_hash == o.designer_hash && same(look_w, o.look_w) &&
         same(look_b, o.look_b) && same(designer_w, o.designer_w) &&
         same(designer_b, o.designer_b) && same(season_w, o.season_w) &&
         same(season_b, o.season_b);
}

// ---------------------------------------------------------------------------
// Forward

CollectionEmbedding collection_embed(const EmbeddingParams& params,
                                     const Matrix& looks) {
  if (looks.rows() == 0) throw ShapeError("collection_embed: empty look set");
  if (looks.cols() != params.feature_dim()) {
    throw ShapeError("collection_embed: looks have " +
                     std::to_string(looks.cols()) + " features, model expects " +
                     std::to_string(params.feature_dim()));
  }
  // Row i of `hidden` is look i's embedding.
  const Matrix hidden =
      (looks * params.look_w.transpose()).rowwise() + params.look_b.transpose();
  auto pooled = maxpool_columns(hidden);
  CollectionEmbedding out;
  out.h_c = std::move(pooled.values);
  out.argmax = std::move(pooled.argmax);
  return out;
}

Vector predict_designer(const EmbeddingParams& params, const Vector& h_c) {
  return softmax(linear_forward(params.designer_w, h_c, params.designer_b));
}

Vector predict_season(const EmbeddingParams& params, const Vector& h_c) {
  return softmax(linear_forward(params.season_w, h_c, params.season_b));
}

std::vector<Example> examples_for(const Corpus& corpus, Split split) {
  std::vector<Example> out;
  for (const auto& c : corpus.collections) {
    if (c.split != split) continue;
    out.push_back({&c.looks, c.designer, c.t % kNumSeasons});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

LossAndGrad batch_loss(const EmbeddingParams& params,
                       std::span<const Example> batch, Task task) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const Matrix& W = head_w(params, task);
  const Vector& b = head_b(params, task);

  LossAndGrad out;
  out.grad = EmbeddingParams::zeros(params.feature_dim(), params.embed_dim(),
                                    params.num_designers(), params.num_seasons());
  Matrix& gW = task == Task::Designer ? out.grad.designer_w : out.grad.season_w;
  Vector& gb = task == Task::Designer ? out.grad.designer_b : out.grad.season_b;

  for (const Example& ex : batch) {
    const int label = label_of(ex, task);
    if (label < 0 || label >= W.rows()) {
      throw std::out_of_range("batch_loss: " + std::string(to_string(task)) +
                              " label " + std::to_string(label) + " outside [0, " +
                              std::to_string(W.rows()) + ")");
    }
    const auto emb = collection_embed(params, *ex.looks);
    const Vector p = softmax(linear_forward(W, emb.h_c, b));
    const auto ce = cross_entropy(p, label);
    out.loss += ce.loss;
    Index predicted;
    p.maxCoeff(&predicted);
    if (predicted == label) ++out.correct;

    const auto head = linear_backward(W, emb.h_c, ce.grad_logits);
    gW += head.W;
    gb += head.b;
    // Max pooling routes each coordinate to one look.
    for (Index j = 0; j < emb.h_c.size(); ++j) {
      const double g = head.x(j);
      out.grad.look_w.row(j) += g * ex.looks->row(emb.argmax(j));
      out.grad.look_b(j) += g;
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  for (auto& v : out.grad.views()) Eigen::Map<Vector>(v.data(), v.size()) *= scale;
  return out;
}

Evaluation evaluate_head(const EmbeddingParams& params,
                         std::span<const Example> examples, Task task) {
  Evaluation ev;
  ev.count = examples.size();
  if (examples.empty()) return ev;
  const Matrix& W = head_w(params, task);
  const Vector& b = head_b(params, task);
  std::size_t correct = 0;
  for (const Example& ex : examples) {
    const Vector p = softmax(linear_forward(W, collection_embed(params, *ex.looks).h_c, b));
    const int label = label_of(ex, task);
    ev.loss += cross_entropy(p, label).loss;
    Index predicted;
    p.maxCoeff(&predicted);
    if (predicted == label) ++correct;
  }
  ev.loss /= static_cast<double>(examples.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return ev;
}

// ---------------------------------------------------------------------------
// Training

EmbeddingTraining train_embedding(const Corpus& corpus,
                                  const EmbeddingHyper& hyper) {
  if (hyper.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  const auto train = examples_for(corpus, Split::Train);
  if (train.empty()) throw std::invalid_argument("train_embedding: empty training split");
  auto val = examples_for(corpus, Split::Val);
  const std::span<const Example> monitor = val.empty() ? std::span(train) : std::span(val);

  Rng init_rng(hyper.seed);
  EmbeddingTraining result;
  result.params = EmbeddingParams::xavier(corpus.feature_dim, hyper.embed_dim,
                                          corpus.num_designers(), init_rng);
  result.params.designer_hash = corpus.designer_hash();
  if (hyper.max_epoch <= 0) return result;

  EmbeddingParams params = result.params;
  Rng order_rng(mix_seed(hyper.seed, 1));
  std::array<AdaDeltaState, 2> optim;
  for (auto& s : optim) {
    s.rho = hyper.rho;
    s.epsilon = hyper.epsilon;
  }
  std::array<double, 2> last_val{NAN, NAN};
  std::array<int, 2> stalled{0, 0};
  double best = INFINITY;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Example> batch;
  for (int epoch = 0; epoch < hyper.max_epoch; ++epoch) {
    const Task task = epoch % 2 == 0 ? Task::Season : Task::Designer;
    const int slot = static_cast<int>(task);
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train[order[i]]);
      const auto lg = batch_loss(params, batch, task);
      adadelta_step(params.views(), std::as_const(lg.grad).views(), optim[slot]);
    }
    if (!params.all_finite())
      throw NumericError("train_embedding: non-finite parameters at epoch " +
                         std::to_string(epoch));

    const Evaluation tr = evaluate_head(params, train, task);
    const Evaluation va = evaluate_head(params, monitor, task);
    const Task other = task == Task::Season ? Task::Designer : Task::Season;
    const double other_val = evaluate_head(params, monitor, other).loss;
    result.log.push_back({epoch, task, tr.loss, va.loss, tr.accuracy, va.accuracy});

    if (va.loss + other_val < best) {
      best = va.loss + other_val;
      result.params = params;
      result.best_epoch = epoch;
    }
    if (!std::isnan(last_val[slot])) {
      const double rel = (last_val[slot] - va.loss) /
                         std::max(std::abs(last_val[slot]), 1e-12);
      stalled[slot] = rel < hyper.tolerance ? stalled[slot] + 1 : 0;
    }
    last_val[slot] = va.loss;
    if (stalled[0] >= hyper.patience && stalled[1] >= hyper.patience) {
      result.converged = true;
      break;
    }
  }
  return result;
}

void write_training_log(const std::vector<EpochLog>& log, std::ostream& out) {
  out << "epoch\ttask\ttrain_loss\tval_loss\ttrain_acc\tval_acc\n";
  out << std::setprecision(17);
  for (const auto& e : log) {
    out << e.epoch << '\t' << to_string(e.task) << '\t' << e.train_loss << '\t'
        << e.val_loss << '\t' << e.train_acc << '\t' << e.val_acc << '\n';
  }
}

void write_training_log(const std::vector<EpochLog>& log, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  write_training_log(log, out);
}

// ---------------------------------------------------------------------------
// Embedding table

EmbeddingTable::EmbeddingTable(Index embed_dim, std::vector<CollectionEmbedding> rows)
    : embed_dim_(embed_dim), rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i)
    index_.emplace(std::pair{rows_[i].designer, rows_[i].t}, i);
}

const Vector* EmbeddingTable::find(int designer, int t) const {
  const auto it = index_.find({designer, t});
  return it == index_.end() ? nullptr : &rows_[it->second].h_c;
}

EmbeddingTable embed_all(const EmbeddingParams& params, const Corpus& corpus) {
  std::vector<CollectionEmbedding> rows;
  rows.reserve(corpus.collections.size());
  for (const auto& c : corpus.collections) {
    auto e = collection_embed(params, c.looks);
    e.designer = c.designer;
    e.t = c.t;
    rows.push_back(std::move(e));
  }
  return {params.embed_dim(), std::move(rows)};
}

// ---------------------------------------------------------------------------
// Checkpoint

void save_embedding(const EmbeddingParams& params, const fs::path& path) {
  params.check_shapes();
  io::Writer w(path);
  w.magic("RWEM");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.feature_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.embed_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.num_designers()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.num_seasons()));
  w.put<std::uint64_t>(params.designer_hash);
  w.tensor(params.look_w);
  w.tensor(params.look_b);
  w.tensor(params.designer_w);
  w.tensor(params.designer_b);
  w.tensor(params.season_w);
  w.tensor(params.season_b);
  w.finish();
}

EmbeddingParams load_embedding(const fs::path& path) {
  io::Reader r(path);
  r.expect_magic("RWEM");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  const Index F = r.get<std::uint32_t>();
  const Index E = r.get<std::uint32_t>();
  const Index D = r.get<std::uint32_t>();
  const Index S = r.get<std::uint32_t>();
  EmbeddingParams p = EmbeddingParams::zeros(F, E, D, S);
  p.designer_hash = r.get<std::uint64_t>();
  r.tensor(p.look_w);
  r.tensor(p.look_b);
  r.tensor(p.designer_w);
  r.tensor(p.designer_b);
  r.tensor(p.season_w);
  r.tensor(p.season_b);
  r.expect_eof();
  return p;
}

}  // namespace runwayseq
