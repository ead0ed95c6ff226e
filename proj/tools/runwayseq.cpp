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

// runwayseq: synthetic corpora, embedding and sequence training, AUC
// evaluation and class-trend reports from the command line.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "runwayseq/config.hpp"
#include "runwayseq/corpus.hpp"
#include "runwayseq/embedding.hpp"
#include "runwayseq/evaluator.hpp"
#include "runwayseq/sequence.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace runwayseq;

namespace {

/// Flags shared by every subcommand. Unset optionals leave the config value.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> cohort;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path,
                  "JSON run config; flags override its values");
  cmd->add_option("--seed", c.seed,
                  "Global seed (default: config, then $RUNWAYSEQ_SEED, then 42)");
  cmd->add_option("--cohort", c.cohort,
                  "Keep the N designers with the most collections (0 = all; default 0)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  std::optional<std::uint64_t> config_seed;
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw std::runtime_error("missing file: " + c.config_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw std::invalid_argument(c.config_path + ": " + e.what());
    }
    cfg = config_from_json(j);
    if (j.contains("seed")) config_seed = cfg.seed;
  }
  cfg.seed = resolve_seed(c.seed, config_seed);
  cfg.synth.seed = cfg.embedding.seed = cfg.sequence.seed = cfg.seed;
  if (c.cohort) cfg.cohort = *c.cohort;
  return cfg;
}

/// Loads, narrows to the cohort, and assigns a split when the manifest has
/// none.
Corpus prepare_corpus(const std::string& manifest, const RunConfig& cfg) {
  Corpus corpus = select_cohort(load_corpus(manifest), cfg.cohort);
  if (!corpus.has_split()) {
    Rng rng(mix_seed(cfg.seed, 2));
    corpus = split_corpus(std::move(corpus), cfg.split, rng);
  }
  return corpus;
}

void check_embedding_matches(const EmbeddingParams& p, const Corpus& corpus) {
  if (p.feature_dim() != corpus.feature_dim)
    throw std::invalid_argument("embedding checkpoint expects " +
                                std::to_string(p.feature_dim()) +
                                " features, corpus has " +
                                std::to_string(corpus.feature_dim));
  if (p.num_designers() != corpus.num_designers() ||
      p.designer_hash != corpus.designer_hash())
    throw std::invalid_argument(
        "embedding checkpoint was trained on a different designer set");
}

std::string percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * v << "%";
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

struct GenSynthArgs {
  Common common;
  std::string out;
  std::optional<int> designers, slots, looks_min, looks_max;
  std::optional<Index> feature_dim, style_dim;
  std::optional<double> drift, trend_strength, noise, skip_prob;
};

int gen_synth(const GenSynthArgs& a) {
  RunConfig cfg = resolve(a.common);
  auto& s = cfg.synth;
  if (a.designers) s.designers = *a.designers;
  if (a.slots) s.slots = *a.slots;
  if (a.looks_min) s.looks_min = *a.looks_min;
  if (a.looks_max) s.looks_max = *a.looks_max;
  if (a.feature_dim) s.feature_dim = *a.feature_dim;
  if (a.style_dim) s.style_dim = *a.style_dim;
  if (a.drift) s.drift = *a.drift;
  if (a.trend_strength) s.trend_strength = *a.trend_strength;
  if (a.noise) s.noise = *a.noise;
  if (a.skip_prob) s.skip_prob = *a.skip_prob;
  cfg.validate();

  SyntheticCorpus synth = generate_synthetic(s);
  Rng split_rng(mix_seed(cfg.seed, 2));
  synth.corpus = split_corpus(std::move(synth.corpus), cfg.split, split_rng);
  const fs::path dir(a.out);
  const fs::path manifest = write_corpus(synth.corpus, dir);
  write_latents(synth, dir / "latents.json");
  write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
  load_corpus(manifest);  // round-trip validation

  Index looks = 0;
  for (const auto& c : synth.corpus.collections) looks += c.num_looks();
  const auto counts = split_counts(synth.corpus);
  std::cout << "manifest\t" << manifest.string() << "\n"
            << "designers\t" << synth.corpus.num_designers() << "\n"
            << "timeline_slots\t" << synth.corpus.num_slots << "\n"
            << "collections\t" << synth.corpus.collections.size() << "\n"
            << "looks\t" << looks << "\n"
            << "feature_dim\t" << synth.corpus.feature_dim << "\n"
            << "split\t" << counts[1] << "/" << counts[2] << "/" << counts[3] << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainEmbeddingArgs {
  Common common;
  std::string corpus, out, log;
  std::optional<Index> embed_dim;
  std::optional<int> epochs, patience, batch;
};

int train_embedding_cmd(const TrainEmbeddingArgs& a) {
  RunConfig cfg = resolve(a.common);
  if (a.embed_dim) cfg.embedding.embed_dim = *a.embed_dim;
  if (a.epochs) cfg.embedding.max_epoch = *a.epochs;
  if (a.patience) cfg.embedding.patience = *a.patience;
  if (a.batch) cfg.embedding.batch_size = *a.batch;
  cfg.validate();

  const Corpus corpus = prepare_corpus(a.corpus, cfg);
  const auto trained = train_embedding(corpus, cfg.embedding);
  save_embedding(trained.params, a.out);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.tsv") : fs::path(a.log);
  write_training_log(trained.log, log_path);

  const double designer_base = 1.0 / corpus.num_designers();
  std::cout << "checkpoint\t" << a.out << "\n"
            << "log\t" << log_path.string() << "\n"
            << "epochs_run\t" << trained.log.size() << "\n"
            << "best_epoch\t" << trained.best_epoch << "\n"
            << "converged\t" << (trained.converged ? "yes" : "no") << "\n";
  for (Split split : {Split::Train, Split::Val, Split::Test}) {
    const auto ex = examples_for(corpus, split);
    if (ex.empty()) continue;
    const auto d = evaluate_head(trained.params, ex, Task::Designer);
    const auto s = evaluate_head(trained.params, ex, Task::Season);
    std::cout << to_string(split) << "_designer_acc\t" << percent(d.accuracy)
              << " [baseline: " << percent(designer_base) << "]\n"
              << to_string(split) << "_season_acc\t" << percent(s.accuracy)
              << " [baseline: " << percent(1.0 / kNumSeasons) << "]\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

SequenceTables training_tables(const Corpus& corpus, const EmbeddingParams& emb) {
  SequenceTables tables;
  tables.embeddings = embed_all(emb, corpus);
  tables.trends = build_trend_table(corpus, tables.embeddings, [](const Collection& c) {
    return c.split == Split::Train;
  });
  return tables;
}

std::string model_filename(int designer) {
  std::ostringstream s;
  s << "designer_" << std::setw(4) << std::setfill('0') << designer << ".rwsq";
  return s.str();
}

struct TrainSeqArgs {
  Common common;
  std::string corpus, embedding, out, cell;
  std::optional<Index> hidden;
  std::optional<int> epochs, batch, patience;
  std::optional<double> lr;
  int jobs = 1;
};

int train_seq_cmd(const TrainSeqArgs& a) {
  RunConfig cfg = resolve(a.common);
  if (!a.cell.empty()) cfg.sequence.kind = parse_cell_kind(a.cell);
  if (a.hidden) cfg.sequence.hidden_dim = *a.hidden;
  if (a.epochs) cfg.sequence.max_epoch = *a.epochs;
  if (a.batch) cfg.sequence.batch_size = *a.batch;
  if (a.patience) cfg.sequence.patience = *a.patience;
  if (a.lr) cfg.sequence.lr = *a.lr;
  cfg.validate();

  const Corpus corpus = prepare_corpus(a.corpus, cfg);
  const EmbeddingParams emb = load_embedding(a.embedding);
  check_embedding_matches(emb, corpus);
  const SequenceTables tables = training_tables(corpus, emb);
  const SequenceModels models = train_all_sequences(corpus, tables, cfg.sequence, a.jobs);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".rwsq") fs::remove(entry.path());
  for (const auto& [d, params] : models.models) save_sequence(params, dir / model_filename(d));
  write_trend_table(tables.trends, dir / "trends.tsv");

  std::ostringstream skipped;
  skipped << "designer_id\tdesigner\ttraining_collections\n";
  for (const auto& s : models.skipped)
    skipped << s.designer << '\t' << corpus.designers[s.designer] << '\t'
            << s.training_collections << '\n';
  write_text(dir / "skipped.tsv", skipped.str());

  std::ostringstream losses;
  losses << "designer_id\tepoch\tloss\n" << std::setprecision(17);
  for (const auto& [d, log] : models.loss_logs)
    for (std::size_t e = 0; e < log.size(); ++e) losses << d << '\t' << e << '\t' << log[e] << '\n';
  write_text(dir / "loss.tsv", losses.str());
  write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");

  std::cout << "cell\t" << to_string(models.kind) << "\n"
            << "trained\t" << models.models.size() << "\n"
            << "skipped\t" << models.skipped.size() << "\n"
            << "output\t" << dir.string() << "\n";
  for (const auto& s : models.skipped)
    std::cerr << "skipped designer " << corpus.designers[s.designer] << ": "
              << s.training_collections << " training collection(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------

SequenceModels load_model_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("missing directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".rwsq") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .rwsq checkpoints in " + dir.string());
  SequenceModels set;
  bool first = true;
  for (const auto& f : files) {
    SequenceParams p = load_sequence(f);
    if (first) set.kind = p.kind;
    else if (p.kind != set.kind)
      throw std::invalid_argument(dir.string() + ": mixes rnn and lstm checkpoints");
    first = false;
    const int d = p.designer;
    set.models.emplace(d, std::move(p));
  }
  return set;
}

struct EvaluateArgs {
  Common common;
  std::string corpus, embedding, out, designers_out;
  std::vector<std::string> seq;
  std::optional<int> negatives;
};

int evaluate_cmd(const EvaluateArgs& a) {
  RunConfig cfg = resolve(a.common);
  if (a.negatives) cfg.negatives_per_positive = *a.negatives;
  cfg.validate();

  const Corpus corpus = prepare_corpus(a.corpus, cfg);
  const EmbeddingParams emb = load_embedding(a.embedding);
  check_embedding_matches(emb, corpus);
  std::vector<SequenceModels> sets;
  for (const auto& dir : a.seq) {
    SequenceModels set = load_model_dir(dir);
    for (const auto& [d, p] : set.models) {
      if (p.designer_hash != corpus.designer_hash() || d < 0 || d >= corpus.num_designers())
        throw std::invalid_argument(dir + ": sequence models were trained on a different designer set");
      if (p.embed_dim() != emb.embed_dim())
        throw std::invalid_argument(dir + ": sequence models embed " +
                                    std::to_string(p.embed_dim()) + " dims, embedding has " +
                                    std::to_string(emb.embed_dim()));
    }
    sets.push_back(std::move(set));
  }

  EvaluateOptions opts;
  opts.negatives_per_positive = cfg.negatives_per_positive;
  opts.seed = cfg.seed;
  const EvaluationReport report = evaluate(corpus, emb, sets, opts);

  json doc = report_to_json(report);
  doc["config"] = config_to_json(cfg);
  write_text(a.out, doc.dump(2) + "\n");
  const fs::path table_path =
      a.designers_out.empty() ? fs::path(a.out + ".designers.tsv") : fs::path(a.designers_out);
  std::ostringstream table;
  write_designer_table(report, table);
  write_text(table_path, table.str());

  std::cout << "cell\tmin_auc\tavg_auc\tmax_auc\tdesigners\tsamples\n";
  for (const auto& r : report.rows)
    std::cout << r.label << '\t' << percent(r.min) << '\t' << percent(r.mean) << '\t'
              << percent(r.max) << '\t' << r.per_designer.size() << '\t'
              << r.total_samples << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TrendReportArgs {
  Common common;
  std::string classes, label, corpus, out;
};

int trend_report_cmd(const TrendReportArgs& a) {
  RunConfig cfg = resolve(a.common);
  const Corpus corpus = select_cohort(load_corpus(a.corpus), cfg.cohort);
  const auto table = load_class_table(a.classes);
  const auto series = class_trend_series(table, a.label, corpus);
  std::ostringstream out;
  out << "year\t" << a.label << "\n" << std::setprecision(17);
  for (const auto& [year, value] : series) out << year << '\t' << value << '\n';
  write_text(a.out, out.str());
  std::cout << "label\t" << a.label << "\n"
            << "top_k\t" << table.top_k << "\n"
            << "years\t" << series.size() << "\n"
            << "output\t" << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"runwayseq: next-season collection prediction pipeline"};
  app.require_subcommand(1);

  GenSynthArgs gs;
  auto* gen = app.add_subcommand("gen-synth", "Generate a planted synthetic corpus");
  add_common(gen, gs.common);
  gen->add_option("--out", gs.out, "Output directory")->required();
  gen->add_option("--designers", gs.designers, "Designer count (default 12)");
  gen->add_option("--slots", gs.slots, "Timeline length in seasons (default 16)");
  gen->add_option("--looks-min", gs.looks_min, "Minimum looks per collection (default 4)");
  gen->add_option("--looks-max", gs.looks_max, "Maximum looks per collection (default 12)");
  gen->add_option("--feature-dim", gs.feature_dim, "Look feature dimension (default 512)");
  gen->add_option("--style-dim", gs.style_dim, "Latent style dimension (default 16)");
  gen->add_option("--drift", gs.drift, "Per-season style random-walk scale (default 0.1)");
  gen->add_option("--trend-strength", gs.trend_strength, "Weight of the global trend (default 0.5)");
  gen->add_option("--noise", gs.noise, "Per-look Gaussian noise (default 0.1)");
  gen->add_option("--skip-prob", gs.skip_prob, "Probability a designer skips a season (default 0)");

  TrainEmbeddingArgs te;
  auto* temb = app.add_subcommand("train-embedding", "Train the collection embedding model");
  add_common(temb, te.common);
  temb->add_option("--corpus", te.corpus, "Corpus manifest")->required();
  temb->add_option("--out", te.out, "Checkpoint path (RWEM)")->required();
  temb->add_option("--log", te.log, "Training log path (default <out>.log.tsv)");
  temb->add_option("--embed-dim", te.embed_dim, "Embedding dimension (default 256)");
  temb->add_option("--epochs", te.epochs, "Maximum epochs (default 200)");
  temb->add_option("--patience", te.patience, "Stalled same-task epochs before stopping (default 10)");
  temb->add_option("--batch", te.batch, "Collections per batch (default 16)");

  TrainSeqArgs ts;
  auto* tseq = app.add_subcommand("train-seq", "Train one next-season model per designer");
  add_common(tseq, ts.common);
  tseq->add_option("--corpus", ts.corpus, "Corpus manifest")->required();
  tseq->add_option("--embedding", ts.embedding, "Embedding checkpoint (RWEM)")->required();
  tseq->add_option("--cell", ts.cell, "Recurrent cell: rnn or lstm (default lstm)")
      ->check(CLI::IsMember({"rnn", "lstm"}));
  tseq->add_option("--out", ts.out, "Output directory for RWSQ files")->required();
  tseq->add_option("--hidden", ts.hidden, "Hidden state size (default 128)");
  tseq->add_option("--epochs", ts.epochs, "Maximum epochs (default 500)");
  tseq->add_option("--batch", ts.batch, "Transitions per step (default 16)");
  tseq->add_option("--patience", ts.patience, "Stalled epochs before stopping (default 10)");
  tseq->add_option("--lr", ts.lr, "Adam learning rate (default 1e-4)");
  tseq->add_option("--jobs", ts.jobs, "Worker threads")->capture_default_str();

  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "Next-season AUC against sampled negatives");
  add_common(eval, ev.common);
  eval->add_option("--corpus", ev.corpus, "Corpus manifest")->required();
  eval->add_option("--embedding", ev.embedding, "Embedding checkpoint (RWEM)")->required();
  eval->add_option("--seq", ev.seq, "Directory of RWSQ files; repeat for each cell kind")->required();
  eval->add_option("--out", ev.out, "Report path (JSON)")->required();
  eval->add_option("--designers-out", ev.designers_out,
                   "Per-designer table (default <out>.designers.tsv)");
  eval->add_option("--negatives", ev.negatives, "Negatives per positive (default 1)");

  TrendReportArgs tr;
  auto* trend = app.add_subcommand("trend-report", "Normalized class occurrence per year");
  add_common(trend, tr.common);
  trend->add_option("--classes", tr.classes, "Top-K class predictions (TSV)")->required();
  trend->add_option("--label", tr.label, "Class label to track")->required();
  trend->add_option("--corpus", tr.corpus, "Corpus manifest")->required();
  trend->add_option("--out", tr.out, "Output series (TSV)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_synth(gs);
    if (*temb) return train_embedding_cmd(te);
    if (*tseq) return train_seq_cmd(ts);
    if (*eval) return evaluate_cmd(ev);
    if (*trend) return trend_report_cmd(tr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
