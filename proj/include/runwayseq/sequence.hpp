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

#ifndef RUNWAYSEQ_SEQUENCE_HPP
#define RUNWAYSEQ_SEQUENCE_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "runwayseq/corpus.hpp"
#include "runwayseq/embedding.hpp"
#include "runwayseq/optimizer.hpp"
#include "runwayseq/tensor.hpp"

namespace runwayseq {

// ---------------------------------------------------------------------------
// Trend embeddings

/// Column-wise max of every collection embedding present at one slot.
struct TrendEmbedding {
  Vector h_tr;
  int t = 0;
};

class TrendTable {
 public:
  TrendTable() = default;
  TrendTable(Index embed_dim, int num_slots)
      : embed_dim_(embed_dim), slots_(num_slots) {}

  Index embed_dim() const { return embed_dim_; }
  int num_slots() const { return static_cast<int>(slots_.size()); }
  bool has(int t) const {
    return t >= 0 && t < num_slots() && slots_[t].has_value();
  }
  /// Throws when no collection contributed to slot t.
  const Vector& at(int t) const;
  /// The trend at t, or zeros when the slot is empty or off the timeline.
  Vector or_zero(int t) const;

  void set(int t, Vector h_tr) { slots_.at(t) = std::move(h_tr); }

 private:
  Index embed_dim_ = 0;
  std::vector<std::optional<Vector>> slots_;
};

/// Selects which collections feed the trend table.
using CollectionFilter = std::function<bool(const Collection&)>;

TrendTable build_trend_table(const Corpus& corpus, const EmbeddingTable& table,
                             const CollectionFilter& include = {});

/// Max-pools the table rows at slot t.
TrendEmbedding trend_embedding(const EmbeddingTable& table, int t);

void write_trend_table(const TrendTable& trends, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Recurrent cells

enum class CellKind : std::uint32_t { Rnn = 0, Lstm = 1 };

std::string_view to_string(CellKind kind);
CellKind parse_cell_kind(std::string_view text);

/// Gate order for the LSTM tensors.
enum Gate : int { kForget = 0, kInput = 1, kOutput = 2, kCandidate = 3 };

/// One designer's recurrent predictor. The cell consumes [h_c || h_tr]
/// (2E) each step; an affine projection maps the final hidden state back to
/// E dims. RNN uses w[0], u[0], b[0]; LSTM uses all four gates.
struct SequenceParams {
  CellKind kind = CellKind::Rnn;
  std::vector<Matrix> w;  // H x 2E per gate
  std::vector<Matrix> u;  // H x H per gate
  std::vector<Vector> b;  // H per gate
  Matrix proj_w;          // E x H
  Vector proj_b;          // E
  int designer = -1;
  std::uint64_t designer_hash = 0;

  Index input_dim() const { return w.empty() ? 0 : w[0].cols(); }
  Index hidden_dim() const { return w.empty() ? 0 : w[0].rows(); }
  Index embed_dim() const { return proj_w.rows(); }
  int num_gates() const { return static_cast<int>(w.size()); }

  static SequenceParams zeros(CellKind kind, Index embed, Index hidden);
  static SequenceParams xavier(CellKind kind, Index embed, Index hidden, Rng& rng);

  /// Order: per gate (w, u, b), then proj_w, proj_b.
  ParamViews views();
  GradViews views() const;
  void check_shapes() const;
  bool all_finite() const;

  bool operator==(const SequenceParams& o) const;
};

struct LstmState {
  Vector h;
  Vector c;
};

/// tanh(W x + U h_prev + b) with x = [h_c || h_tr_prev].
Vector rnn_step(const SequenceParams& params, const Vector& h_c,
                const Vector& h_tr_prev, const Vector& h_prev);

/// Gated update with separate input (W_g) and recurrent (U_g) matrices.
LstmState lstm_step(const SequenceParams& params, const Vector& h_c,
                    const Vector& h_tr_prev, const LstmState& prev);

/// Gate activations of one LSTM step, for inspection.
struct LstmGates {
  Vector forget, input, output, candidate;
};
LstmGates lstm_gates(const SequenceParams& params, const Vector& h_c,
                     const Vector& h_tr_prev, const Vector& h_prev);

// ---------------------------------------------------------------------------
// Histories

struct HistoryStep {
  int t = 0;
  Vector h_c;
  /// Trend at the global slot t - 1 (zeros if none).
  Vector h_tr_prev;
};

/// A designer's present slots in chronological order.
struct DesignerHistory {
  int designer = 0;
  std::vector<HistoryStep> steps;

  std::size_t transitions() const {
    return steps.empty() ? 0 : steps.size() - 1;
  }
};

/// History over the designer's collections with t < before_t (all of them
/// when before_t is empty).
DesignerHistory build_history(int designer, const Corpus& corpus,
                              const EmbeddingTable& embeddings,
                              const TrendTable& trends,
                              std::optional<int> before_t = std::nullopt);

/// Runs the cell over every step and projects the last hidden state.
Vector predict_next(const SequenceParams& params, const DesignerHistory& history);

struct SequenceLoss {
  double loss = 0.0;
  SequenceParams grad;
};

/// Mean cosine distance between the prediction after step k and the true
/// h_c at step k + 1, over the selected transitions (all when empty), with
/// teacher forcing and full backpropagation through time.
SequenceLoss sequence_loss(const SequenceParams& params,
                           const DesignerHistory& history,
                           std::span<const std::size_t> transitions = {});

// ---------------------------------------------------------------------------
// Training

struct SequenceHyper {
  CellKind kind = CellKind::Lstm;
  Index hidden_dim = 128;
  int batch_size = 16;
  double lr = 1e-4;
  int max_epoch = 500;
  int patience = 10;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
};

struct SequenceTraining {
  SequenceParams params;
  /// Mean full-sequence loss after each epoch.
  std::vector<double> loss_log;
  bool converged = false;
};

class InsufficientHistory : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

SequenceTraining train_designer_sequence(const DesignerHistory& history,
                                         Index embed_dim,
                                         const SequenceHyper& hyper);

/// Seed for one designer's model, independent of training order.
std::uint64_t designer_seed(std::uint64_t global_seed, int designer);

struct SequenceTables {
  EmbeddingTable embeddings;
  /// Trend table used for training inputs.
  TrendTable trends;
};

/// Each designer's training history: every collection but the final one,
/// which is held out for evaluation.
DesignerHistory training_history(int designer, const Corpus& corpus,
                                 const SequenceTables& tables);

struct SkippedDesigner {
  int designer = 0;
  std::size_t training_collections = 0;
};

struct SequenceModels {
  CellKind kind = CellKind::Lstm;
  /// Keyed by designer id.
  std::map<int, SequenceParams> models;
  std::map<int, std::vector<double>> loss_logs;
  std::vector<SkippedDesigner> skipped;
};

/// Trains every designer with at least two training collections. `jobs`
/// bounds worker threads; results do not depend on it.
SequenceModels train_all_sequences(const Corpus& corpus,
                                   const SequenceTables& tables,
                                   const SequenceHyper& hyper, int jobs = 1);

/// "RWSQ", u32 version, u32 cell kind, u32 E, u32 H, u32 designer,
/// u64 designer hash, then tensors in view order as little-endian f64.
void save_sequence(const SequenceParams& params, const std::filesystem::path& path);
SequenceParams load_sequence(const std::filesystem::path& path);

}  // namespace runwayseq

#endif  // RUNWAYSEQ_SEQUENCE_HPP
