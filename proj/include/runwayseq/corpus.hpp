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

#ifndef RUNWAYSEQ_CORPUS_HPP
#define RUNWAYSEQ_CORPUS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "runwayseq/binary_io.hpp"
#include "runwayseq/tensor.hpp"

namespace runwayseq {

enum class Season : int { Spring = 0, Fall = 1 };
inline constexpr int kNumSeasons = 2;

std::string_view to_string(Season s);
Season parse_season(std::string_view text);

/// One (year, season) point on the global timeline. t = 2*(year - year0) +
/// season, so Spring precedes Fall within a year.
struct SeasonSlot {
  int year = 0;
  Season season = Season::Spring;
  int t = 0;

  bool operator==(const SeasonSlot&) const = default;
};

enum class Split : std::uint8_t { Unassigned = 0, Train, Val, Test };

std::string_view to_string(Split s);
Split parse_split(std::string_view text);

/// One designer's looks at one slot, one look per row of `looks`.
struct Collection {
  int designer = 0;
  int t = 0;
  Matrix looks;
  Split split = Split::Unassigned;

  Index num_looks() const { return looks.rows(); }
  bool operator==(const Collection& o) const {
    return designer == o.designer && t == o.t && split == o.split &&
           looks.rows() == o.looks.rows() && looks.cols() == o.looks.cols() &&
           looks == o.looks;
  }
};

struct Corpus {
  Index feature_dim = 0;
  int year0 = 0;
  /// Length of the dense timeline; slots [0, num_slots) all exist.
  int num_slots = 0;
  std::vector<std::string> designers;
  std::vector<Collection> collections;

  int num_designers() const { return static_cast<int>(designers.size()); }
  SeasonSlot slot(int t) const;
  int slot_index(int year, Season season) const;
  std::vector<SeasonSlot> timeline() const;

  /// Identifies the designer registry; checkpoints carry it.
  std::uint64_t designer_hash() const { return io::name_hash(designers); }

  /// Indices into `collections` for one designer, chronological.
  std::vector<std::size_t> collections_of(int designer) const;
  std::optional<std::size_t> find(int designer, int t) const;
  bool has_split() const;

  /// Throws FormatError on any registry or uniqueness violation.
  void validate() const;

  bool operator==(const Corpus&) const = default;
};

// ---------------------------------------------------------------------------
// Files

/// Feature file: "RWFT", u32 version=1, u32 F, u64 rows, then rows of F
/// little-endian f32.
void write_feature_file(const std::filesystem::path& path, const Matrix& rows);
Matrix read_feature_file(const std::filesystem::path& path,
                         std::optional<Index> expected_dim = std::nullopt);

/// Writes `dir/manifest.json` and `dir/features.rwft`. Feature values are
/// stored as f32; values not representable in f32 are rounded.
std::filesystem::path write_corpus(const Corpus& corpus,
                                   const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------
// Splitting

struct SplitFractions {
  double train = 0.7;
  double val = 0.2;
  double test = 0.1;
};

/// Shuffled proportional split. Designers left without a training
/// collection get one swapped in from a designer that can spare it.
Corpus split_corpus(Corpus corpus, const SplitFractions& fractions, Rng& rng);

/// Collections per split label, indexed by Split.
std::array<std::size_t, 4> split_counts(const Corpus& corpus);

// ---------------------------------------------------------------------------
// Synthetic corpora with planted latents

struct SynthConfig {
  int designers = 12;
  int slots = 16;
  int looks_min = 4;
  int looks_max = 12;
  Index feature_dim = 512;
  Index style_dim = 16;
  double drift = 0.1;
  double trend_strength = 0.5;
  double noise = 0.1;
  /// Probability that a designer skips a slot (first and last slots are
  /// always shown).
  double skip_prob = 0.0;
  int year0 = 2000;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SyntheticCorpus {
  Corpus corpus;
  /// styles[d] is slots x style_dim; row t is the designer's latent at t.
  std::vector<Matrix> styles;
  /// slots x style_dim global trend latents.
  Matrix trends;
  /// feature_dim x style_dim fixed embedding.
  Matrix projection;
};

SyntheticCorpus generate_synthetic(const SynthConfig& config);

void write_latents(const SyntheticCorpus& synth,
                   const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Class-occurrence trends over top-K look predictions

struct ClassPrediction {
  std::string look_id;
  SeasonSlot slot;
  std::string designer;
  int rank = 0;
  std::string label;
};

struct ClassPredictionTable {
  std::vector<ClassPrediction> rows;
  int top_k = 0;

  std::vector<std::string> vocabulary() const;
};

/// Tab-separated: look_id, slot (YYYY-spring|YYYY-fall), designer, rank,
/// label; one header line.
ClassPredictionTable load_class_table(const std::filesystem::path& path);
ClassPredictionTable parse_class_table(std::string_view text);

class UnknownLabelError : public std::invalid_argument {
 public:
  UnknownLabelError(const std::string& label, std::vector<std::string> vocab);
  const std::vector<std::string>& vocabulary() const { return vocab_; }

 private:
  std::vector<std::string> vocab_;
};

/// Per year: looks whose top-K contains `label`, divided by the number of
/// distinct designers showing that year. Years with no shows are omitted.
std::vector<std::pair<int, double>> class_trend_series(
    const ClassPredictionTable& table, std::string_view label,
    const Corpus& corpus);

}  // namespace runwayseq

#endif  // RUNWAYSEQ_CORPUS_HPP
