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

#include "runwayseq/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

namespace runwayseq {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void RunConfig::validate() const {
  if (std::abs(split.train + split.val + split.test - 1.0) > 1e-9 ||
      split.train < 0 || split.val < 0 || split.test < 0)
    throw std::invalid_argument("config: split fractions must be non-negative and sum to 1");
  if (embedding.embed_dim < 1) throw std::invalid_argument("config: embed_dim must be >= 1");
  if (embedding.batch_size < 1 || sequence.batch_size < 1)
    throw std::invalid_argument("config: batch sizes must be >= 1");
  if (sequence.hidden_dim < 1) throw std::invalid_argument("config: hidden_dim must be >= 1");
  if (!(sequence.lr > 0)) throw std::invalid_argument("config: lr must be > 0");
  if (negatives_per_positive < 1)
    throw std::invalid_argument("config: negatives_per_positive must be >= 1");
  if (cohort < 0) throw std::invalid_argument("config: cohort must be >= 0");
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    read_opt(j, "seed", c.seed);
    read_opt(j, "cohort", c.cohort);
    read_opt(j, "negatives_per_positive", c.negatives_per_positive);
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      read_opt(s, "designers", c.synth.designers);
      read_opt(s, "slots", c.synth.slots);
      read_opt(s, "looks_min", c.synth.looks_min);
      read_opt(s, "looks_max", c.synth.looks_max);
      read_opt(s, "feature_dim", c.synth.feature_dim);
      read_opt(s, "style_dim", c.synth.style_dim);
      read_opt(s, "drift", c.synth.drift);
      read_opt(s, "trend_strength", c.synth.trend_strength);
      read_opt(s, "noise", c.synth.noise);
      read_opt(s, "skip_prob", c.synth.skip_prob);
      read_opt(s, "year0", c.synth.year0);
    }
    if (j.contains("split")) {
      const json& s = j.at("split");
      read_opt(s, "train", c.split.train);
      read_opt(s, "val", c.split.val);
      read_opt(s, "test", c.split.test);
    }
    if (j.contains("embedding")) {
      const json& e = j.at("embedding");
      read_opt(e, "embed_dim", c.embedding.embed_dim);
      read_opt(e, "batch_size", c.embedding.batch_size);
      read_opt(e, "max_epoch", c.embedding.max_epoch);
      read_opt(e, "patience", c.embedding.patience);
      read_opt(e, "tolerance", c.embedding.tolerance);
      read_opt(e, "rho", c.embedding.rho);
      read_opt(e, "epsilon", c.embedding.epsilon);
    }
    if (j.contains("sequence")) {
      const json& s = j.at("sequence");
      if (s.contains("cell")) c.sequence.kind = parse_cell_kind(s.at("cell").get<std::string>());
      read_opt(s, "hidden_dim", c.sequence.hidden_dim);
      read_opt(s, "batch_size", c.sequence.batch_size);
      read_opt(s, "lr", c.sequence.lr);
      read_opt(s, "max_epoch", c.sequence.max_epoch);
      read_opt(s, "patience", c.sequence.patience);
      read_opt(s, "tolerance", c.sequence.tolerance);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.synth.seed = c.seed;
  c.embedding.seed = c.seed;
  c.sequence.seed = c.seed;
  return c;
}

json config_to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"cohort", c.cohort},
      {"negatives_per_positive", c.negatives_per_positive},
      {"synth",
       {{"designers", c.synth.designers},
        {"slots", c.synth.slots},
        {"looks_min", c.synth.looks_min},
        {"looks_max", c.synth.looks_max},
        {"feature_dim", c.synth.feature_dim},
        {"style_dim", c.synth.style_dim},
        {"drift", c.synth.drift},
        {"trend_strength", c.synth.trend_strength},
        {"noise", c.synth.noise},
        {"skip_prob", c.synth.skip_prob},
        {"year0", c.synth.year0}}},
      {"split", {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}}},
      {"embedding",
       {{"embed_dim", c.embedding.embed_dim},
        {"batch_size", c.embedding.batch_size},
        {"max_epoch", c.embedding.max_epoch},
        {"patience", c.embedding.patience},
        {"tolerance", c.embedding.tolerance},
        {"rho", c.embedding.rho},
        {"epsilon", c.embedding.epsilon}}},
      {"sequence",
       {{"cell", to_string(c.sequence.kind)},
        {"hidden_dim", c.sequence.hidden_dim},
        {"batch_size", c.sequence.batch_size},
        {"lr", c.sequence.lr},
        {"max_epoch", c.sequence.max_epoch},
        {"patience", c.sequence.patience},
        {"tolerance", c.sequence.tolerance}}},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag,
                           std::optional<std::uint64_t> from_config) {
  if (flag) return *flag;
  if (from_config) return *from_config;
  if (const char* env = std::getenv("RUNWAYSEQ_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return v;
    throw std::invalid_argument("RUNWAYSEQ_SEED is not an unsigned integer: " +
                                std::string(env));
  }
  return RunConfig{}.seed;
}

Corpus select_cohort(const Corpus& corpus, int count) {
  if (count <= 0 || count >= corpus.num_designers()) return corpus;
  std::vector<int> counts(corpus.num_designers(), 0);
  for (const auto& c : corpus.collections) ++counts[c.designer];
  std::vector<int> order(corpus.num_designers());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());

  std::vector<int> remap(corpus.num_designers(), -1);
  Corpus out;
  out.feature_dim = corpus.feature_dim;
  out.year0 = corpus.year0;
  out.num_slots = corpus.num_slots;
  for (int d : order) {
    remap[d] = out.num_designers();
    out.designers.push_back(corpus.designers[d]);
  }
  for (const auto& c : corpus.collections) {
    if (remap[c.designer] < 0) continue;
    Collection copy = c;
    copy.designer = remap[c.designer];
    out.collections.push_back(std::move(copy));
  }
  return out;
}

}  // namespace runwayseq
