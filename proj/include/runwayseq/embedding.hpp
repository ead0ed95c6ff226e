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

#ifndef RUNWAYSEQ_EMBEDDING_HPP
#define RUNWAYSEQ_EMBEDDING_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "runwayseq/corpus.hpp"
#include "runwayseq/optimizer.hpp"
#include "runwayseq/tensor.hpp"

namespace runwayseq {

enum class Task { Season, Designer };

std::string_view to_string(Task task);

/// Multi-task collection embedding network.
///
/// Looks (rows of F features) go through an affine look layer to E dims,
/// are max-pooled over the collection, and feed two softmax heads: one over
/// designers and one over the two season classes.
struct EmbeddingParams {
  Matrix look_w;      // E x F
  Vector look_b;      // E
  Matrix designer_w;  // |D| x E
  Vector designer_b;  // |D|
  Matrix season_w;    // |S| x E
  Vector season_b;    // |S|
  std::uint64_t designer_hash = 0;

  Index feature_dim() const { return look_w.cols(); }
  Index embed_dim() const { return look_w.rows(); }
  Index num_designers() const { return designer_w.rows(); }
  Index num_seasons() const { return season_w.rows(); }

  static EmbeddingParams zeros(Index features, Index embed, Index designers,
                               Index seasons = kNumSeasons);
  /// Xavier-uniform weights, zero biases.
  static EmbeddingParams xavier(Index features, Index embed, Index designers,
                                Rng& rng, Index seasons = kNumSeasons);

  /// Tensor order: look_w, look_b, designer_w, designer_b, season_w, season_b.
  ParamViews views();
  GradViews views() const;
  void check_shapes() const;
  bool all_finite() const;

  bool operator==(const EmbeddingParams& o) const;
};

struct CollectionEmbedding {
  Vector h_c;
  int designer = 0;
  int t = 0;
  /// Look index behind each embedding coordinate.
  Eigen::VectorXi argmax;
};

CollectionEmbedding collection_embed(const EmbeddingParams& params,
                                     const Matrix& looks);

Vector predict_designer(const EmbeddingParams& params, const Vector& h_c);
Vector predict_season(const EmbeddingParams& params, const Vector& h_c);

/// One training instance: a collection and its two labels.
struct Example {
  const Matrix* looks = nullptr;
  int designer = 0;
  int season = 0;
};

std::vector<Example> examples_for(const Corpus& corpus, Split split);

struct LossAndGrad {
  double loss = 0.0;
  /// Correct argmax predictions in the batch.
  int correct = 0;
  EmbeddingParams grad;
};

/// Mean cross-entropy of the selected head over the batch, with gradients
/// through the head, max pooling, and look layer. The other head's
/// gradient is zero.
LossAndGrad batch_loss(const EmbeddingParams& params,
                       std::span<const Example> batch, Task task);

struct EmbeddingHyper {
  Index embed_dim = 256;
  int batch_size = 16;
  int max_epoch = 200;
  int patience = 10;
  double tolerance = 1e-4;
  double rho = 0.95;
  double epsilon = 1e-6;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  Task task = Task::Season;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct EmbeddingTraining {
  EmbeddingParams params;
  std::vector<EpochLog> log;
  int best_epoch = -1;
  bool converged = false;
};

/// Alternating schedule: even epochs optimize the season loss, odd epochs the
/// designer loss. Returns the parameters with the lowest summed validation
/// loss across both heads.
EmbeddingTraining train_embedding(const Corpus& corpus,
                                  const EmbeddingHyper& hyper);

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

Evaluation evaluate_head(const EmbeddingParams& params,
                         std::span<const Example> examples, Task task);

void write_training_log(const std::vector<EpochLog>& log, std::ostream& out);
void write_training_log(const std::vector<EpochLog>& log,
                        const std::filesystem::path& path);

/// h_c for every collection in corpus order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(Index embed_dim, std::vector<CollectionEmbedding> rows);

  Index embed_dim() const { return embed_dim_; }
  std::size_t size() const { return rows_.size(); }
  const std::vector<CollectionEmbedding>& rows() const { return rows_; }
  const CollectionEmbedding& operator[](std::size_t i) const { return rows_[i]; }
  const Vector* find(int designer, int t) const;

 private:
  Index embed_dim_ = 0;
  std::vector<CollectionEmbedding> rows_;
  std::map<std::pair<int, int>, std::size_t> index_;
};

EmbeddingTable embed_all(const EmbeddingParams& params, const Corpus& corpus);

/// "RWEM", u32 version, u32 F, u32 E, u32 |D|, u32 |S|, u64 designer hash,
/// then the tensors in view order as row-major little-endian f64.
void save_embedding(const EmbeddingParams& params,
                    const std::filesystem::path& path);
EmbeddingParams load_embedding(const std::filesystem::path& path);

}  // namespace runwayseq

#endif  // RUNWAYSEQ_EMBEDDING_HPP
