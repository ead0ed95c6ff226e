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

#include "runwayseq/evaluator.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>

namespace runwayseq {

std::vector<EvaluationSample> build_samples(const Corpus& corpus, Rng& rng,
                                            const SampleOptions& options) {
  if (corpus.num_designers() < 2)
    throw std::invalid_argument("build_samples: need at least two designers for negatives");
  if (options.negatives_per_positive < 1)
    throw std::invalid_argument("build_samples: negatives_per_positive must be >= 1");

  std::vector<int> designers = options.designers;
  if (designers.empty()) {
    for (int d = 0; d < corpus.num_designers(); ++d) designers.push_back(d);
  }
  std::sort(designers.begin(), designers.end());

  std::vector<EvaluationSample> samples;
  for (int d : designers) {
    const auto mine = corpus.collections_of(d);
    if (mine.size() < 2) continue;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < corpus.collections.size(); ++i)
      if (corpus.collections[i].designer != d) others.push_back(i);
    if (others.empty()) continue;
    const std::size_t positive = mine.back();
    for (int n = 0; n < options.negatives_per_positive; ++n) {
      samples.push_back({d, corpus.collections[positive].t, positive,
                         others[rng.below(others.size())]});
    }
  }
  return samples;
}

double score(const Vector& predicted, const Vector& candidate_h_c) {
  return cosine_similarity(predicted, candidate_h_c);
}

double score(const Vector& predicted, const Matrix& candidate_looks,
             const EmbeddingParams& params) {
  return score(predicted, collection_embed(params, candidate_looks).h_c);
}

AucReport auc(const std::vector<EvaluationSample>& samples,
              const std::vector<SampleScore>& scores,
              const std::vector<int>& designers) {
  if (samples.size() != scores.size())
    throw std::invalid_argument("auc: " + std::to_string(samples.size()) +
                                " samples but " + std::to_string(scores.size()) +
                                " scores");
  std::map<int, std::pair<double, std::size_t>> acc;
  double pooled = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = scores[i];
    const double hit = s.positive > s.negative ? 1.0 : (s.positive == s.negative ? 0.5 : 0.0);
    auto& [sum, n] = acc[samples[i].designer];
    sum += hit;
    ++n;
    pooled += hit;
  }

  AucReport report;
  report.total_samples = samples.size();
  for (int d : designers)
    if (!acc.count(d)) report.excluded.push_back(d);
  for (const auto& [d, sn] : acc)
    report.per_designer.push_back({d, sn.first / static_cast<double>(sn.second), sn.second});
  if (!report.per_designer.empty()) {
    double total = 0.0;
    report.min = 1.0;
    report.max = 0.0;
    for (const auto& r : report.per_designer) {
      total += r.auc;
      report.min = std::min(report.min, r.auc);
      report.max = std::max(report.max, r.auc);
    }
    report.mean = total / static_cast<double>(report.per_designer.size());
    report.pooled = pooled / static_cast<double>(samples.size());
  }
  return report;
}

AucReport random_baseline(const std::vector<EvaluationSample>& samples,
                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SampleScore> scores;
  scores.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double pos = rng.uniform();
    scores.push_back({pos, rng.uniform()});
  }
  AucReport report = auc(samples, scores);
  report.label = "random";
  report.seed = seed;
  return report;
}

EvaluationReport evaluate(const Corpus& corpus, const EmbeddingParams& embedding,
                          const std::vector<SequenceModels>& model_sets,
                          const EvaluateOptions& options) {
  if (embedding.feature_dim() != corpus.feature_dim ||
      embedding.num_designers() != corpus.num_designers() ||
      embedding.designer_hash != corpus.designer_hash())
    throw std::invalid_argument("evaluate: embedding model does not match the corpus");

  const EmbeddingTable embeddings = embed_all(embedding, corpus);
  const TrendTable trends = build_trend_table(corpus, embeddings);

  // Evaluate the same designers in every row.
  std::set<int> eligible;
  for (int d = 0; d < corpus.num_designers(); ++d) eligible.insert(d);
  for (const auto& set : model_sets) {
    std::set<int> keep;
    for (int d : eligible)
      if (set.models.count(d)) keep.insert(d);
    eligible = std::move(keep);
  }

  EvaluationReport report;
  report.designer_names = corpus.designers;
  Rng rng(options.seed);
  SampleOptions sample_opts;
  sample_opts.negatives_per_positive = options.negatives_per_positive;
  sample_opts.designers.assign(eligible.begin(), eligible.end());
  if (sample_opts.designers.empty())
    throw std::invalid_argument("evaluate: no designer has a model for every cell kind");
  report.samples = build_samples(corpus, rng, sample_opts);

  for (const auto& set : model_sets) {
    std::map<int, Vector> predictions;
    for (int d : eligible) {
      const auto& model = set.models.at(d);
      if (model.embed_dim() != embeddings.embed_dim() ||
          model.designer_hash != corpus.designer_hash())
        throw std::invalid_argument("evaluate: sequence model for designer " +
                                    std::to_string(d) + " does not match the corpus");
      const auto mine = corpus.collections_of(d);
      if (mine.size() < 2) continue;
      const int final_t = corpus.collections[mine.back()].t;
      predictions.emplace(d, predict_next(model, build_history(d, corpus, embeddings,
                                                               trends, final_t)));
    }
    std::vector<SampleScore> scores;
    scores.reserve(report.samples.size());
    for (const auto& s : report.samples) {
      const Vector& pred = predictions.at(s.designer);
      scores.push_back({score(pred, embeddings[s.positive].h_c),
                        score(pred, embeddings[s.negative].h_c)});
    }
    AucReport row = auc(report.samples, scores, sample_opts.designers);
    row.label = std::string(to_string(set.kind));
    row.seed = options.seed;
    report.rows.push_back(std::move(row));
  }
  report.rows.push_back(random_baseline(report.samples, mix_seed(options.seed, 0xa0c)));
  return report;
}

nlohmann::json report_to_json(const EvaluationReport& report) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& r : report.rows) {
    json per = json::array();
    for (const auto& d : r.per_designer)
      per.push_back({{"designer", report.designer_names.at(d.designer)},
                     {"auc", d.auc},
                     {"samples", d.samples}});
    rows.push_back({{"cell", r.label},
                    {"min_auc", r.min},
                    {"avg_auc", r.mean},
                    {"max_auc", r.max},
                    {"pooled_auc", r.pooled},
                    {"designers", r.per_designer.size()},
                    {"samples", r.total_samples},
                    {"seed", r.seed},
                    {"per_designer", std::move(per)}});
  }
  return {{"rows", std::move(rows)}, {"samples", report.samples.size()}};
}

void write_designer_table(const EvaluationReport& report, std::ostream& out) {
  out << "designer_id\tdesigner";
  for (const auto& r : report.rows) out << '\t' << r.label << "_auc";
  out << '\n' << std::setprecision(17);
  std::set<int> designers;
  for (const auto& r : report.rows)
    for (const auto& d : r.per_designer) designers.insert(d.designer);
  for (int d : designers) {
    out << d << '\t' << report.designer_names.at(d);
    for (const auto& r : report.rows) {
      const auto it = std::find_if(r.per_designer.begin(), r.per_designer.end(),
                                   [d](const DesignerAuc& a) { return a.designer == d; });
      out << '\t';
      if (it != r.per_designer.end()) out << it->auc;
      else out << "nan";
    }
    out << '\n';
  }
}

}  // namespace runwayseq
