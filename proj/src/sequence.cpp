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

#include "runwayseq/sequence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <thread>

#include "runwayseq/binary_io.hpp"

namespace runwayseq {

namespace fs = std::filesystem;

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;

int gates_for(CellKind kind) { return kind == CellKind::Lstm ? 4 : 1; }

Vector concat(const Vector& a, const Vector& b) {
  Vector x(a.size() + b.size());
  x << a, b;
  return x;
}

Vector step_input(const SequenceParams& params, const Vector& h_c,
                  const Vector& h_tr_prev) {
  const Index E = params.embed_dim();
  if (h_c.size() != E || h_tr_prev.size() != E) {
    throw ShapeError("sequence step: h_c has " + std::to_string(h_c.size()) +
                     " and h_tr has " + std::to_string(h_tr_prev.size()) +
                     " entries, model embeds " + std::to_string(E));
  }
  return concat(h_c, h_tr_prev);
}

void check_hidden(const SequenceParams& params, const Vector& h) {
  if (h.size() != params.hidden_dim()) {
    throw ShapeError("sequence step: hidden state has " + std::to_string(h.size()) +
                     " entries, cell has " + std::to_string(params.hidden_dim()));
  }
}

Vector preactivation(const SequenceParams& p, int gate, const Vector& x,
                     const Vector& h_prev) {
  return p.w[gate] * x + p.u[gate] * h_prev + p.b[gate];
}

// Everything one step of the unroll needs for backprop.
struct StepCache {
  Vector x;
  Vector h_prev;
  Vector c_prev;
  Vector f, i, o, g;  // LSTM gates
  Vector c;
  Vector h;
};

StepCache forward_step(const SequenceParams& p, const Vector& x,
                       const Vector& h_prev, const Vector& c_prev) {
  StepCache s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  if (p.kind == CellKind::Rnn) {
    s.h = tanh_forward(preactivation(p, 0, x, h_prev));
    return s;
  }
  s.f = sigmoid_forward(preactivation(p, kForget, x, h_prev));
  s.i = sigmoid_forward(preactivation(p, kInput, x, h_prev));
  s.o = sigmoid_forward(preactivation(p, kOutput, x, h_prev));
  s.g = tanh_forward(preactivation(p, kCandidate, x, h_prev));
  s.c = s.f.cwiseProduct(c_prev) + s.i.cwiseProduct(s.g);
  s.h = s.o.cwiseProduct(tanh_forward(s.c));
  return s;
}

std::vector<StepCache> unroll(const SequenceParams& p,
                              const DesignerHistory& history, std::size_t steps) {
  const Index H = p.hidden_dim();
  std::vector<StepCache> caches;
  caches.reserve(steps);
  Vector h = Vector::Zero(H);
  Vector c = Vector::Zero(H);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto& st = history.steps[k];
    caches.push_back(forward_step(p, step_input(p, st.h_c, st.h_tr_prev), h, c));
    h = caches.back().h;
    if (p.kind == CellKind::Lstm) c = caches.back().c;
  }
  return caches;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trend table

const Vector& TrendTable::at(int t) const {
  if (!has(t)) throw std::out_of_range("trend table: slot " + std::to_string(t) +
                                       " has no collections");
  return *slots_[t];
}

Vector TrendTable::or_zero(int t) const {
  return has(t) ? *slots_[t] : Vector::Zero(embed_dim_);
}

TrendTable build_trend_table(const Corpus& corpus, const EmbeddingTable& table,
                             const CollectionFilter& include) {
  if (table.size() != corpus.collections.size())
    throw ShapeError("build_trend_table: embedding table does not match corpus");
  TrendTable trends(table.embed_dim(), corpus.num_slots);
  std::vector<std::optional<Vector>> acc(corpus.num_slots);
  for (std::size_t i = 0; i < corpus.collections.size(); ++i) {
    const auto& c = corpus.collections[i];
    if (include && !include(c)) continue;
    const Vector& h = table[i].h_c;
    auto& slot = acc[c.t];
    if (!slot) slot = h;
    else *slot = slot->cwiseMax(h);
  }
  for (int t = 0; t < corpus.num_slots; ++t)
    if (acc[t]) trends.set(t, std::move(*acc[t]));
  return trends;
}

TrendEmbedding trend_embedding(const EmbeddingTable& table, int t) {
  std::optional<Vector> acc;
  for (const auto& row : table.rows()) {
    if (row.t != t) continue;
    if (!acc) acc = row.h_c;
    else *acc = acc->cwiseMax(row.h_c);
  }
  if (!acc) throw std::invalid_argument("trend_embedding: no collections at slot " +
                                        std::to_string(t));
  return {std::move(*acc), t};
}

void write_trend_table(const TrendTable& trends, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << std::setprecision(17);
  for (int t = 0; t < trends.num_slots(); ++t) {
    if (!trends.has(t)) continue;
    out << t;
    for (double v : trends.at(t)) out << '\t' << v;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Parameters

std::string_view to_string(CellKind kind) {
  return kind == CellKind::Lstm ? "lstm" : "rnn";
}

CellKind parse_cell_kind(std::string_view text) {
  if (text == "rnn" || text == "RNN") return CellKind::Rnn;
  if (text == "lstm" || text == "LSTM") return CellKind::Lstm;
  throw std::invalid_argument("unknown cell kind \"" + std::string(text) +
                              "\" (expected rnn or lstm)");
}

SequenceParams SequenceParams::zeros(CellKind kind, Index embed, Index hidden) {
  SequenceParams p;
  p.kind = kind;
  for (int g = 0; g < gates_for(kind); ++g) {
    p.w.push_back(Matrix::Zero(hidden, 2 * embed));
    p.u.push_back(Matrix::Zero(hidden, hidden));
    p.b.push_back(Vector::Zero(hidden));
  }
  p.proj_w = Matrix::Zero(embed, hidden);
  p.proj_b = Vector::Zero(embed);
  return p;
}

SequenceParams SequenceParams::xavier(CellKind kind, Index embed, Index hidden,
                                      Rng& rng) {
  SequenceParams p = zeros(kind, embed, hidden);
  for (int g = 0; g < p.num_gates(); ++g) {
    p.w[g] = xavier_init(hidden, 2 * embed, rng);
    p.u[g] = xavier_init(hidden, hidden, rng);
  }
  p.proj_w = xavier_init(embed, hidden, rng);
  return p;
}

ParamViews SequenceParams::views() {
  ParamViews out;
  for (int g = 0; g < num_gates(); ++g) {
    out.push_back(flat(w[g]));
    out.push_back(flat(u[g]));
    out.push_back(flat(b[g]));
  }
  out.push_back(flat(proj_w));
  out.push_back(flat(proj_b));
  return out;
}

GradViews SequenceParams::views() const {
  GradViews out;
  for (int g = 0; g < num_gates(); ++g) {
    out.push_back(flat(w[g]));
    out.push_back(flat(u[g]));
    out.push_back(flat(b[g]));
  }
  out.push_back(flat(proj_w));
  out.push_back(flat(proj_b));
  return out;
}

void SequenceParams::check_shapes() const {
  const int G = gates_for(kind);
  if (num_gates() != G || static_cast<int>(u.size()) != G ||
      static_cast<int>(b.size()) != G)
    throw ShapeError("sequence params: wrong gate count for " +
                     std::string(to_string(kind)));
  const Index H = hidden_dim();
  const Index E = embed_dim();
  for (int g = 0; g < G; ++g) {
    if (w[g].rows() != H || w[g].cols() != 2 * E || u[g].rows() != H ||
        u[g].cols() != H || b[g].size() != H)
      throw ShapeError("sequence params: gate " + std::to_string(g) +
                       " has inconsistent shapes");
  }
  if (proj_w.cols() != H || proj_b.size() != E)
    throw ShapeError("sequence params: projection shape");
}

bool SequenceParams::all_finite() const {
  for (const auto& v : views())
    for (double x : v)
      if (!std::isfinite(x)) return false;
  return true;
}

bool SequenceParams::operator==(const SequenceParams& o) const {
  if (kind != o.kind || designer != o.designer || designer_hash != o.designer_hash)
    return false;
  const auto a = views();
  const auto b = o.views();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end())) return false;
  return proj_w.rows() == o.proj_w.rows() && hidden_dim() == o.hidden_dim();
}

// ---------------------------------------------------------------------------
// Cells

Vector rnn_step(const SequenceParams& params, const Vector& h_c,
                const Vector& h_tr_prev, const Vector& h_prev) {
  if (params.kind != CellKind::Rnn) throw std::invalid_argument("rnn_step: not an RNN");
  check_hidden(params, h_prev);
  return tanh_forward(preactivation(params, 0, step_input(params, h_c, h_tr_prev), h_prev));
}

LstmState lstm_step(const SequenceParams& params, const Vector& h_c,
                    const Vector& h_tr_prev, const LstmState& prev) {
  if (params.kind != CellKind::Lstm) throw std::invalid_argument("lstm_step: not an LSTM");
  check_hidden(params, prev.h);
  check_hidden(params, prev.c);
  auto s = forward_step(params, step_input(params, h_c, h_tr_prev), prev.h, prev.c);
  return {std::move(s.h), std::move(s.c)};
}

LstmGates lstm_gates(const SequenceParams& params, const Vector& h_c,
                     const Vector& h_tr_prev, const Vector& h_prev) {
  if (params.kind != CellKind::Lstm) throw std::invalid_argument("lstm_gates: not an LSTM");
  check_hidden(params, h_prev);
  auto s = forward_step(params, step_input(params, h_c, h_tr_prev), h_prev,
                        Vector::Zero(params.hidden_dim()));
  return {std::move(s.f), std::move(s.i), std::move(s.o), std::move(s.g)};
}

// ---------------------------------------------------------------------------
// Histories

DesignerHistory build_history(int designer, const Corpus& corpus,
                              const EmbeddingTable& embeddings,
                              const TrendTable& trends, std::optional<int> before_t) {
  DesignerHistory h;
  h.designer = designer;
  for (std::size_t idx : corpus.collections_of(designer)) {
    const int t = corpus.collections[idx].t;
    if (before_t && t >= *before_t) break;
    h.steps.push_back({t, embeddings[idx].h_c, trends.or_zero(t - 1)});
  }
  return h;
}

Vector predict_next(const SequenceParams& params, const DesignerHistory& history) {
  if (history.steps.empty()) throw InsufficientHistory("predict_next: empty history");
  const auto caches = unroll(params, history, history.steps.size());
  return params.proj_w * caches.back().h + params.proj_b;
}

SequenceLoss sequence_loss(const SequenceParams& p, const DesignerHistory& history,
                           std::span<const std::size_t> transitions) {
  const std::size_t n_trans = history.transitions();
  if (n_trans == 0)
    throw InsufficientHistory("sequence_loss: need at least two steps");
  std::vector<char> selected(n_trans, transitions.empty() ? 1 : 0);
  for (std::size_t k : transitions) {
    if (k >= n_trans) throw std::out_of_range("sequence_loss: transition index");
    selected[k] = 1;
  }
  const auto count = static_cast<double>(std::count(selected.begin(), selected.end(), 1));
  std::size_t last = 0;
  for (std::size_t k = 0; k < n_trans; ++k)
    if (selected[k]) last = k;

  const auto caches = unroll(p, history, last + 1);
  const Index H = p.hidden_dim();
  SequenceLoss out;
  out.grad = SequenceParams::zeros(p.kind, p.embed_dim(), H);
  out.grad.designer = p.designer;
  out.grad.designer_hash = p.designer_hash;

  // Loss terms and their gradient into each step's hidden state.
  std::vector<Vector> dh_loss(last + 1, Vector::Zero(H));
  for (std::size_t k = 0; k <= last; ++k) {
    if (!selected[k]) continue;
    const Vector y = p.proj_w * caches[k].h + p.proj_b;
    const auto cd = cosine_distance(y, history.steps[k + 1].h_c);
    out.loss += cd.distance;
    const Vector dy = cd.grad_a / count;
    out.grad.proj_w += dy * caches[k].h.transpose();
    out.grad.proj_b += dy;
    dh_loss[k] = p.proj_w.transpose() * dy;
  }
  out.loss /= count;

  Vector dh_next = Vector::Zero(H);
  Vector dc_next = Vector::Zero(H);
  for (std::size_t kk = last + 1; kk-- > 0;) {
    const StepCache& s = caches[kk];
    const Vector dh = dh_loss[kk] + dh_next;
    if (p.kind == CellKind::Rnn) {
      const Vector da = dh.cwiseProduct(tanh_grad_from_output(s.h));
      out.grad.w[0] += da * s.x.transpose();
      out.grad.u[0] += da * s.h_prev.transpose();
      out.grad.b[0] += da;
      dh_next = p.u[0].transpose() * da;
      continue;
    }
    const Vector tc = tanh_forward(s.c);
    const Vector d_o = dh.cwiseProduct(tc);
    const Vector dc = dh.cwiseProduct(s.o).cwiseProduct(tanh_grad_from_output(tc)) + dc_next;
    const std::array<Vector, 4> dz = {
        dc.cwiseProduct(s.c_prev).cwiseProduct(sigmoid_grad_from_output(s.f)),
        dc.cwiseProduct(s.g).cwiseProduct(sigmoid_grad_from_output(s.i)),
        d_o.cwiseProduct(sigmoid_grad_from_output(s.o)),
        dc.cwiseProduct(s.i).cwiseProduct(tanh_grad_from_output(s.g)),
    };
    dh_next = Vector::Zero(H);
    for (int g = 0; g < 4; ++g) {
      out.grad.w[g] += dz[g] * s.x.transpose();
      out.grad.u[g] += dz[g] * s.h_prev.transpose();
      out.grad.b[g] += dz[g];
      dh_next += p.u[g].transpose() * dz[g];
    }
    dc_next = dc.cwiseProduct(s.f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

SequenceTraining train_designer_sequence(const DesignerHistory& history,
                                         Index embed_dim,
                                         const SequenceHyper& hyper) {
  if (history.transitions() == 0) {
    throw InsufficientHistory("designer " + std::to_string(history.designer) +
                              " has fewer than two collections to train on");
  }
  if (hyper.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  Rng rng(hyper.seed);
  SequenceTraining result;
  result.params = SequenceParams::xavier(hyper.kind, embed_dim, hyper.hidden_dim, rng);
  result.params.designer = history.designer;

  AdamState adam;
  adam.lr = hyper.lr;
  std::vector<std::size_t> order(history.transitions());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double previous = NAN;
  int stalled = 0;
  for (int epoch = 0; epoch < hyper.max_epoch; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hyper.batch_size);
      const auto lg = sequence_loss(result.params, history,
                                    std::span(order).subspan(start, stop - start));
      adam_step(result.params.views(), lg.grad.views(), adam);
    }
    if (!result.params.all_finite())
      throw NumericError("train_designer_sequence: non-finite parameters at epoch " +
                         std::to_string(epoch));
    const double loss = sequence_loss(result.params, history).loss;
    result.loss_log.push_back(loss);
    if (!std::isnan(previous)) {
      const double rel = std::abs(previous - loss) / std::max(std::abs(previous), 1e-12);
      stalled = rel < hyper.tolerance ? stalled + 1 : 0;
    }
    previous = loss;
    if (stalled >= hyper.patience) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::uint64_t designer_seed(std::uint64_t global_seed, int designer) {
  return mix_seed(global_seed, static_cast<std::uint64_t>(designer) + 0x5eedULL);
}

DesignerHistory training_history(int designer, const Corpus& corpus,
                                 const SequenceTables& tables) {
  DesignerHistory h = build_history(designer, corpus, tables.embeddings, tables.trends);
  if (!h.steps.empty()) h.steps.pop_back();
  return h;
}

SequenceModels train_all_sequences(const Corpus& corpus, const SequenceTables& tables,
                                   const SequenceHyper& hyper, int jobs) {
  SequenceModels out;
  out.kind = hyper.kind;
  std::vector<DesignerHistory> histories;
  for (int d = 0; d < corpus.num_designers(); ++d) {
    DesignerHistory h = training_history(d, corpus, tables);
    if (h.transitions() == 0) out.skipped.push_back({d, h.steps.size()});
    else histories.push_back(std::move(h));
  }

  std::vector<SequenceTraining> trained(histories.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < histories.size();) {
      try {
        SequenceHyper h = hyper;
        h.seed = designer_seed(hyper.seed, histories[i].designer);
        trained[i] = train_designer_sequence(histories[i], tables.embeddings.embed_dim(), h);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, histories.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < histories.size(); ++i) {
    const int d = histories[i].designer;
    trained[i].params.designer_hash = corpus.designer_hash();
    out.models.emplace(d, std::move(trained[i].params));
    out.loss_logs.emplace(d, std::move(trained[i].loss_log));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint

void save_sequence(const SequenceParams& params, const fs::path& path) {
  params.check_shapes();
  io::Writer w(path);
  w.magic("RWSQ");
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.kind));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.embed_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.hidden_dim()));
  w.put<std::int32_t>(params.designer);
  w.put<std::uint64_t>(params.designer_hash);
  for (int g = 0; g < params.num_gates(); ++g) {
    w.tensor(params.w[g]);
    w.tensor(params.u[g]);
    w.tensor(params.b[g]);
  }
  w.tensor(params.proj_w);
  w.tensor(params.proj_b);
  w.finish();
}

SequenceParams load_sequence(const fs::path& path) {
  io::Reader r(path);
  r.expect_magic("RWSQ");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  const auto kind_raw = r.get<std::uint32_t>();
  if (kind_raw > 1) throw FormatError(path.string() + ": unknown cell kind");
  const Index E = r.get<std::uint32_t>();
  const Index H = r.get<std::uint32_t>();
  SequenceParams p = SequenceParams::zeros(static_cast<CellKind>(kind_raw), E, H);
  p.designer = r.get<std::int32_t>();
  p.designer_hash = r.get<std::uint64_t>();
  for (int g = 0; g < p.num_gates(); ++g) {
    r.tensor(p.w[g]);
    r.tensor(p.u[g]);
    r.tensor(p.b[g]);
  }
  r.tensor(p.proj_w);
  r.tensor(p.proj_b);
  r.expect_eof();
  return p;
}

}  // namespace runwayseq
