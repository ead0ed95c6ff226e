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

#ifndef RUNWAYSEQ_CONFIG_HPP
#define RUNWAYSEQ_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "runwayseq/corpus.hpp"
#include "runwayseq/embedding.hpp"
#include "runwayseq/sequence.hpp"

namespace runwayseq {

/// Everything a pipeline run depends on. Serialized as JSON; every key is
/// optional and missing keys keep their defaults.
struct RunConfig {
  std::uint64_t seed = 42;
  SynthConfig synth;
  SplitFractions split;
  EmbeddingHyper embedding;
  SequenceHyper sequence;
  int negatives_per_positive = 1;
  /// Keep only this many designers with the most collections; 0 keeps all.
  int cohort = 0;

  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);

/// Seed precedence: explicit flag, then config file, then RUNWAYSEQ_SEED,
/// then the built-in default.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag,
                           std::optional<std::uint64_t> from_config);

/// Restricts the corpus to the `count` designers with the most collections
/// (ties broken by registry order) and re-indexes them. count <= 0 or
/// count >= |D| returns the corpus unchanged.
Corpus select_cohort(const Corpus& corpus, int count);

}  // namespace runwayseq

#endif  // RUNWAYSEQ_CONFIG_HPP
