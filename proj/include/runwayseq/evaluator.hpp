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

#ifndef RUNWAYSEQ_EVALUATOR_HPP
#define RUNWAYSEQ_EVALUATOR_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "runwayseq/corpus.hpp"
#include "runwayseq/embedding.hpp"
#include "runwayseq/sequence.hpp"

namespace runwayseq {

/// A designer's true collection at slot t paired with one collection by a
/// different designer from any slot.
struct EvaluationSample {
  int designer = 0;
  int t = 0;
  std::size_t positive = 0;  // index into corpus.collections
  std::size_t negative = 0;
};

struct SampleOptions {
  int negatives_per_positive = 1;
  /// Designers allowed to contribute positives; empty means every designer
  /// whose final collection has at least one earlier collection.
  std::vector<int> designers;
};

/// One positive per eligible designer (the final collection), each with
/// `negatives_per_positive` independent negatives.
std::vector<EvaluationSample> build_samples(const Corpus& corpus, Rng& rng,
                                            const SampleOptions& options = {});

/// Cosine similarity between a predicted embedding and the candidate
/// collection's embedding; degenerate vectors score 0.
double score(const Vector& predicted, const Matrix& candidate_looks,
             const EmbeddingParams& params);
double score(const Vector& predicted, const Vector& candidate_h_c);

struct SampleScore {
  double positive = 0.0;
  double negative = 0.0;
};

struct DesignerAuc {
  int designer = 0;
  double auc = 0.0;
  std::size_t samples = 0;
};

struct AucReport {
  std::string label;
  std::vector<DesignerAuc> per_designer;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// Fraction of all samples ranked correctly, ignoring designers.
  double pooled = 0.0;
  std::size_t total_samples = 0;
  std::vector<int> excluded;
  std::uint64_t seed = 0;
};

/// Per-designer AUC (ties count one half) and its unweighted mean.
/// Designers in `designers` with no samples are listed in `excluded`.
AucReport auc(const std::vector<EvaluationSample>& samples,
              const std::vector<SampleScore>& scores,
              const std::vector<int>& designers = {});

struct EvaluateOptions {
  int negatives_per_positive = 1;
  std::uint64_t seed = 0;
};

struct EvaluationReport {
  std::vector<AucReport> rows;  // one per cell kind, then "random"
  std::vector<EvaluationSample> samples;
  std::vector<std::string> designer_names;
};

/// Holds out each designer's final collection, predicts it from the rest of
/// the history with every supplied model set, and scores against sampled
/// negatives. A seeded uniform random scorer provides the baseline row.
EvaluationReport evaluate(const Corpus& corpus, const EmbeddingParams& embedding,
                          const std::vector<SequenceModels>& model_sets,
                          const EvaluateOptions& options);

/// Random-scorer row over the given samples.
AucReport random_baseline(const std::vector<EvaluationSample>& samples,
                          std::uint64_t seed);

/// Table-shaped summary: min/avg/max per row plus per-designer values.
nlohmann::json report_to_json(const EvaluationReport& report);
/// One row per evaluated designer, one AUC column per report row.
void write_designer_table(const EvaluationReport& report, std::ostream& out);

}  // namespace runwayseq

#endif  // RUNWAYSEQ_EVALUATOR_HPP
