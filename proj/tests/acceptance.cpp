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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "runwayseq/config.hpp"
#include "runwayseq/evaluator.hpp"
#include "runwayseq/gradcheck.hpp"
#include "runwayseq/sequence.hpp"
#include "test_util.hpp"

using namespace runwayseq;
using runwayseq::testing::random_matrix;
using runwayseq::testing::random_vector;
using runwayseq::testing::read_bytes;
using runwayseq::testing::TempDir;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs a check; exceptions count as failure.
void criterion(int id, const std::string& what, const std::function<bool(std::ostringstream&)>& body) {
  std::ostringstream detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail << "exception: " << e.what();
  }
  report(id, ok, what, detail.str());
}

// -- shared end-to-end run on the default planted corpus ----------------------

struct Pipeline {
  Corpus corpus;
  EmbeddingTraining embedding;
  SequenceModels lstm, rnn;
  EvaluationReport report;
  double seconds = 0.0;
};

Pipeline run_default_pipeline() {
  const auto start = Clock::now();
  Pipeline p;
  RunConfig cfg;  // seed 42, D=12, T=16, F=512
  cfg.embedding.embed_dim = 64;
  cfg.sequence.hidden_dim = 32;
  cfg.synth.seed = cfg.embedding.seed = cfg.sequence.seed = cfg.seed;

  Rng split_rng(mix_seed(cfg.seed, 2));
  p.corpus = split_corpus(generate_synthetic(cfg.synth).corpus, cfg.split, split_rng);
  p.embedding = train_embedding(p.corpus, cfg.embedding);

  SequenceTables tables;
  tables.embeddings = embed_all(p.embedding.params, p.corpus);
  tables.trends = build_trend_table(p.corpus, tables.embeddings,
                                    [](const Collection& c) { return c.split == Split::Train; });
  cfg.sequence.kind = CellKind::Lstm;
  p.lstm = train_all_sequences(p.corpus, tables, cfg.sequence, 1);
  cfg.sequence.kind = CellKind::Rnn;
  p.rnn = train_all_sequences(p.corpus, tables, cfg.sequence, 1);

  // 50 negatives per positive gives each designer's AUC usable resolution.
  p.report = evaluate(p.corpus, p.embedding.params, {p.rnn, p.lstm},
                      {.negatives_per_positive = 50, .seed = cfg.seed});
  p.seconds = seconds_since(start);
  return p;
}

const AucReport& row(const EvaluationReport& r, const std::string& label) {
  for (const auto& x : r.rows)
    if (x.label == label) return x;
  throw std::runtime_error("report has no row " + label);
}

// -- criterion bodies -------------------------------------------------------

bool gradients(std::ostringstream& out) {
  const auto start = Clock::now();
  double worst_emb = 0.0, worst_rnn = 0.0, worst_lstm = 0.0;

  Rng rng(2024);
  auto emb = EmbeddingParams::xavier(8, 4, 3, rng);
  emb.look_b = random_vector(4, rng, 0.1);
  emb.designer_b = random_vector(3, rng, 0.1);
  emb.season_b = random_vector(2, rng, 0.1);
  std::vector<Matrix> looks;
  for (int i = 0; i < 5; ++i) looks.push_back(random_matrix(1 + i % 3, 8, rng));
  std::vector<Example> batch;
  for (int i = 0; i < 5; ++i) batch.push_back({&looks[i], i % 3, i % 2});
  for (Task task : {Task::Season, Task::Designer}) {
    const auto lg = batch_loss(emb, batch, task);
    const auto res = finite_difference_check([&] { return batch_loss(emb, batch, task).loss; },
                                             emb.views(), std::as_const(lg.grad).views());
    worst_emb = std::max(worst_emb, res.max_rel_error);
  }

  GradCheckOptions opts;
  opts.eps = 1e-5;
  for (CellKind kind : {CellKind::Rnn, CellKind::Lstm}) {
    auto p = SequenceParams::xavier(kind, 6, 4, rng);
    for (auto& b : p.b) b = random_vector(4, rng, 0.1);
    p.proj_b = random_vector(6, rng, 0.1);
    DesignerHistory h;
    for (int k = 0; k < 5; ++k) h.steps.push_back({k, random_vector(6, rng), random_vector(6, rng)});
    const auto sl = sequence_loss(p, h);
    const auto res = finite_difference_check([&] { return sequence_loss(p, h).loss; }, p.views(),
                                             std::as_const(sl.grad).views(), opts);
    (kind == CellKind::Rnn ? worst_rnn : worst_lstm) = res.max_rel_error;
  }
  const double secs = seconds_since(start);
  out << "embedding " << worst_emb << ", rnn " << worst_rnn << ", lstm " << worst_lstm
      << ", " << secs << " s";
  return worst_emb < 1e-4 && worst_rnn < 1e-4 && worst_lstm < 1e-4 && secs < 30.0;
}

bool random_baseline_check(const Pipeline& p, std::ostringstream& out) {
  Rng rng(7);
  SampleOptions opts;
  opts.negatives_per_positive = 1000;
  const auto samples = build_samples(p.corpus, rng, opts);
  const auto r = random_baseline(samples, 99);
  out << "mean AUC " << r.mean << " over " << r.total_samples << " samples";
  return r.total_samples >= 10000 && std::abs(r.mean - 0.5) <= 0.02;
}

bool pipeline_auc(const Pipeline& p, std::ostringstream& out) {
  const double lstm = row(p.report, "lstm").mean;
  const double rnn = row(p.report, "rnn").mean;
  const double random = row(p.report, "random").mean;
  out << "lstm " << lstm << ", rnn " << rnn << ", random " << random << ", "
      << row(p.report, "lstm").per_designer.size() << " designers, " << p.report.samples.size()
      << " samples, " << p.seconds << " s";
  return lstm >= 0.70 && lstm >= random + 0.15 && rnn >= random + 0.10 && p.seconds < 600.0;
}

bool classification(const Pipeline& p, std::ostringstream& out) {
  const auto test = examples_for(p.corpus, Split::Test);
  const auto ev = evaluate_head(p.embedding.params, test, Task::Designer);
  const double baseline = 1.0 / p.corpus.num_designers();
  out << "test designer accuracy " << ev.accuracy << " on " << ev.count
      << " collections, baseline " << baseline;
  return ev.count > 0 && ev.accuracy >= 3.0 * baseline;
}

bool invariants(const Pipeline& p, std::ostringstream& out) {
  Rng rng(5);
  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix m = random_matrix(1 + static_cast<Index>(rng.below(6)), 7, rng);
    std::vector<Index> perm(m.rows());
    for (Index i = 0; i < m.rows(); ++i) perm[i] = i;
    rng.shuffle(perm);
    Matrix shuffled(m.rows() + 1, m.cols());
    for (Index i = 0; i < m.rows(); ++i) shuffled.row(i) = m.row(perm[i]);
    shuffled.row(m.rows()) = m.row(0);
    violations += !(maxpool_columns(m).values == maxpool_columns(shuffled).values);

    Vector logits(1 + rng.below(50));
    for (Index i = 0; i < logits.size(); ++i) logits(i) = rng.uniform(-1e3, 1e3);
    const Vector s = softmax(logits);
    violations += std::abs(s.sum() - 1.0) > 1e-12 || (s.array() < 0).any();

    const Vector a = random_vector(5, rng), b = random_vector(5, rng);
    const double d = cosine_distance(a, b).distance;
    violations += d < 0.0 || d > 2.0 || cosine_distance(a, a).distance != 0.0;

    std::vector<EvaluationSample> samples;
    std::vector<SampleScore> scores, warped;
    for (int i = 0; i < 30; ++i) {
      samples.push_back({static_cast<int>(rng.below(4)), 0, 0, 1});
      scores.push_back({rng.normal(), rng.normal()});
      warped.push_back({std::tanh(scores.back().positive) * 3 + 1,
                        std::tanh(scores.back().negative) * 3 + 1});
    }
    violations += auc(samples, scores).mean != auc(samples, warped).mean;
  }
  int schedule_errors = 0;
  for (const auto& e : p.embedding.log)
    schedule_errors += e.task != (e.epoch % 2 == 0 ? Task::Season : Task::Designer);
  out << violations << " invariant violations over 100 trials, " << schedule_errors
      << " schedule errors over " << p.embedding.log.size() << " logged epochs";
  return violations == 0 && schedule_errors == 0 && p.embedding.log.size() >= 2;
}

struct Artifacts {
  std::string features, manifest, embedding, report;
  std::map<std::string, std::string> sequences;
};

Artifacts small_pipeline_artifacts(const std::filesystem::path& dir) {
  RunConfig cfg;
  cfg.seed = 11;
  cfg.synth.designers = 5;
  cfg.synth.slots = 8;
  cfg.synth.feature_dim = 32;
  cfg.synth.seed = cfg.embedding.seed = cfg.sequence.seed = cfg.seed;
  cfg.embedding.embed_dim = 8;
  cfg.embedding.max_epoch = 10;
  cfg.sequence.hidden_dim = 4;
  cfg.sequence.max_epoch = 20;

  Rng split_rng(mix_seed(cfg.seed, 2));
  const Corpus corpus = split_corpus(generate_synthetic(cfg.synth).corpus, cfg.split, split_rng);
  write_corpus(corpus, dir / "corpus");
  const Corpus loaded = load_corpus(dir / "corpus" / "manifest.json");
  const auto emb = train_embedding(loaded, cfg.embedding);
  save_embedding(emb.params, dir / "e.rwem");
  SequenceTables tables{embed_all(emb.params, loaded), {}};
  tables.trends = build_trend_table(loaded, tables.embeddings,
                                    [](const Collection& c) { return c.split == Split::Train; });
  const auto models = train_all_sequences(loaded, tables, cfg.sequence, 2);
  Artifacts a;
  for (const auto& [d, m] : models.models) {
    const auto path = dir / ("d" + std::to_string(d) + ".rwsq");
    save_sequence(m, path);
    a.sequences[path.filename().string()] = read_bytes(path);
  }
  const auto report = evaluate(loaded, emb.params, {models}, {.negatives_per_positive = 5, .seed = 11});
  a.features = read_bytes(dir / "corpus" / "features.rwft");
  a.manifest = read_bytes(dir / "corpus" / "manifest.json");
  a.embedding = read_bytes(dir / "e.rwem");
  a.report = report_to_json(report).dump(2);
  return a;
}

bool determinism(std::ostringstream& out) {
  TempDir d1("accept_det1"), d2("accept_det2");
  const Artifacts a = small_pipeline_artifacts(d1.path());
  const Artifacts b = small_pipeline_artifacts(d2.path());
  const bool same = a.features == b.features && a.manifest == b.manifest &&
                    a.embedding == b.embedding && a.report == b.report &&
                    a.sequences == b.sequences;
  out << "features, manifest, RWEM, " << a.sequences.size() << " RWSQ files and report "
      << (same ? "identical" : "differ");
  return same && !a.sequences.empty();
}

bool oracle(const Pipeline& p, std::ostringstream& out) {
  // Real scores from the trained LSTMs, at most 96 samples.
  const auto table = embed_all(p.embedding.params, p.corpus);
  const auto trends = build_trend_table(p.corpus, table);
  Rng rng(3);
  SampleOptions opts;
  opts.negatives_per_positive = 8;
  for (const auto& [d, m] : p.lstm.models) opts.designers.push_back(d);
  const auto samples = build_samples(p.corpus, rng, opts);
  std::map<int, Vector> predictions;
  for (const auto& [d, m] : p.lstm.models) {
    const int final_t = p.corpus.collections[p.corpus.collections_of(d).back()].t;
    predictions[d] = predict_next(m, build_history(d, p.corpus, table, trends, final_t));
  }
  std::vector<std::vector<EvaluationSample>> instances{samples};
  std::vector<std::vector<SampleScore>> instance_scores(1);
  for (const auto& s : samples)
    instance_scores[0].push_back({score(predictions.at(s.designer), table[s.positive].h_c),
                                  score(predictions.at(s.designer), table[s.negative].h_c)});
  // Plus random instances with frequent ties.
  Rng r(8);
  for (int i = 0; i < 200; ++i) {
    std::vector<EvaluationSample> ss;
    std::vector<SampleScore> sc;
    const int n = 1 + static_cast<int>(r.below(100));
    for (int k = 0; k < n; ++k) {
      ss.push_back({static_cast<int>(r.below(7)), 0, 0, 1});
      sc.push_back({static_cast<double>(r.below(4)), static_cast<double>(r.below(4))});
    }
    instances.push_back(ss);
    instance_scores.push_back(sc);
  }
  int mismatches = 0, designers = 0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    largest = std::max(largest, instances[i].size());
    std::map<int, std::pair<double, double>> count;  // hits, total
    for (std::size_t k = 0; k < instances[i].size(); ++k) {
      const auto& s = instance_scores[i][k];
      auto& [hits, total] = count[instances[i][k].designer];
      hits += s.positive > s.negative ? 1.0 : (s.positive == s.negative ? 0.5 : 0.0);
      total += 1.0;
    }
    const auto rep = auc(instances[i], instance_scores[i]);
    if (rep.per_designer.size() != count.size()) ++mismatches;
    for (const auto& d : rep.per_designer) {
      ++designers;
      const auto& [hits, total] = count.at(d.designer);
      mismatches += d.auc != hits / total;
    }
  }
  out << mismatches << " mismatches over " << designers << " per-designer values in "
      << instances.size() << " instances (largest " << largest << " samples)";
  return mismatches == 0 && largest <= 100;
}

bool round_trips(const Pipeline& p, std::ostringstream& out) {
  TempDir dir("accept_rt");
  const Corpus corpus = load_corpus(write_corpus(p.corpus, dir / "corpus"));
  save_embedding(p.embedding.params, dir / "e.rwem");
  const auto emb = load_embedding(dir / "e.rwem");
  int seq_ok = 0, seq_total = 0;
  for (const auto* set : {&p.lstm, &p.rnn}) {
    for (const auto& [d, m] : set->models) {
      save_sequence(m, dir / "s.rwsq");
      seq_ok += load_sequence(dir / "s.rwsq") == m;
      ++seq_total;
    }
  }
  const bool corpus_ok = corpus == p.corpus;
  const bool emb_ok = emb == p.embedding.params;
  out << "corpus " << (corpus_ok ? "equal" : "differs") << ", RWEM "
      << (emb_ok ? "equal" : "differs") << ", RWSQ " << seq_ok << "/" << seq_total << " equal";
  return corpus_ok && emb_ok && seq_ok == seq_total && seq_total > 0;
}

}  // namespace

int main() {
  criterion(1, "finite-difference gradients", gradients);

  std::printf("running the default synthetic pipeline (F=512, E=64, H=32)...\n");
  std::fflush(stdout);
  Pipeline pipeline;
  bool pipeline_ok = true;
  std::string pipeline_error;
  try {
    pipeline = run_default_pipeline();
  } catch (const std::exception& e) {
    pipeline_ok = false;
    pipeline_error = e.what();
  }
  auto with_pipeline = [&](std::function<bool(const Pipeline&, std::ostringstream&)> f) {
    return [&, f](std::ostringstream& out) {
      if (!pipeline_ok) {
        out << "pipeline failed: " << pipeline_error;
        return false;
      }
      return f(pipeline, out);
    };
  };

  criterion(2, "random scorer AUC is 0.50 +/- 0.02", with_pipeline(random_baseline_check));
  criterion(3, "next-season AUC on the planted corpus", with_pipeline(pipeline_auc));
  criterion(4, "designer accuracy >= 3x chance on test split", with_pipeline(classification));
  criterion(5, "structural invariants", with_pipeline(invariants));
  criterion(6, "byte-identical reruns", determinism);
  criterion(7, "AUC equals a direct count", with_pipeline(oracle));
  criterion(8, "format round trips", with_pipeline(round_trips));

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
