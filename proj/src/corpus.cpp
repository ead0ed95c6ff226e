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

#include "runwayseq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace runwayseq {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {
constexpr std::uint32_t kFeatureVersion = 1;
constexpr std::uint32_t kManifestVersion = 1;
constexpr const char* kFeatureFile = "features.rwft";
}  // namespace

std::string_view to_string(Season s) {
  return s == Season::Spring ? "spring" : "fall";
}

Season parse_season(std::string_view text) {
  if (text == "spring") return Season::Spring;
  if (text == "fall") return Season::Fall;
  throw FormatError("unknown season \"" + std::string(text) + "\"");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: break;
  }
  return "unassigned";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  if (text == "unassigned") return Split::Unassigned;
  throw FormatError("unknown split \"" + std::string(text) + "\"");
}

// ---------------------------------------------------------------------------
// Corpus

SeasonSlot Corpus::slot(int t) const {
  return {year0 + t / 2, static_cast<Season>(t % 2), t};
}

int Corpus::slot_index(int year, Season season) const {
  return 2 * (year - year0) + static_cast<int>(season);
}

std::vector<SeasonSlot> Corpus::timeline() const {
  std::vector<SeasonSlot> out;
  out.reserve(num_slots);
  for (int t = 0; t < num_slots; ++t) out.push_back(slot(t));
  return out;
}

std::vector<std::size_t> Corpus::collections_of(int designer) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < collections.size(); ++i)
    if (collections[i].designer == designer) out.push_back(i);
  std::stable_sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    return collections[a].t < collections[b].t;
  });
  return out;
}

std::optional<std::size_t> Corpus::find(int designer, int t) const {
  for (std::size_t i = 0; i < collections.size(); ++i)
    if (collections[i].designer == designer && collections[i].t == t) return i;
  return std::nullopt;
}

bool Corpus::has_split() const {
  return !collections.empty() &&
         std::none_of(collections.begin(), collections.end(),
                      [](const Collection& c) {
                        return c.split == Split::Unassigned;
                      });
}

void Corpus::validate() const {
  if (feature_dim < 1) throw FormatError("corpus: feature_dim must be >= 1");
  if (num_slots < 1) throw FormatError("corpus: empty timeline");
  if (designers.empty()) throw FormatError("corpus: no designers");
  std::set<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < collections.size(); ++i) {
    const auto& c = collections[i];
    const std::string where = "collection " + std::to_string(i);
    if (c.designer < 0 || c.designer >= num_designers())
      throw FormatError(where + ": designer index " +
                        std::to_string(c.designer) + " not in registry");
    if (c.t < 0 || c.t >= num_slots)
      throw FormatError(where + ": slot " + std::to_string(c.t) +
                        " outside timeline");
    if (c.looks.rows() < 1) throw FormatError(where + ": no looks");
    if (c.looks.cols() != feature_dim)
      throw FormatError(where + ": looks have " +
                        std::to_string(c.looks.cols()) + " features, expected " +
                        std::to_string(feature_dim));
    if (!c.looks.allFinite())
      throw FormatError(where + ": non-finite feature values");
    if (!seen.emplace(c.designer, c.t).second)
      throw FormatError("duplicate collection for designer \"" +
                        designers[c.designer] + "\" at slot " +
                        std::to_string(c.t));
  }
}

// ---------------------------------------------------------------------------
// Feature files

void write_feature_file(const fs::path& path, const Matrix& rows) {
  io::Writer w(path);
  w.magic("RWFT");
  w.put<std::uint32_t>(kFeatureVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(rows.cols()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(rows.rows()));
  for (Index i = 0; i < rows.rows(); ++i)
    for (Index j = 0; j < rows.cols(); ++j)
      w.put<float>(static_cast<float>(rows(i, j)));
  w.finish();
}

Matrix read_feature_file(const fs::path& path, std::optional<Index> expected_dim) {
  io::Reader r(path);
  r.expect_magic("RWFT");
  const auto version = r.get<std::uint32_t>();
  if (version != kFeatureVersion)
    throw FormatError(path.string() + ": unsupported version " +
                      std::to_string(version));
  const auto dim = static_cast<Index>(r.get<std::uint32_t>());
  const auto count = static_cast<Index>(r.get<std::uint64_t>());
  if (expected_dim && dim != *expected_dim)
    throw FormatError(path.string() + ": dimension mismatch at row 0: rows have " +
                      std::to_string(dim) + " values, expected " +
                      std::to_string(*expected_dim));
  Matrix rows(count, dim);
  for (Index i = 0; i < count; ++i) {
    for (Index j = 0; j < dim; ++j) {
      float v;
      try {
        v = r.get<float>();
      } catch (const FormatError&) {
        throw FormatError(path.string() + ": truncated at row " +
                          std::to_string(i) + " (header declares " +
                          std::to_string(count) + " rows of " +
                          std::to_string(dim) + ")");
      }
      if (!std::isfinite(v))
        throw FormatError(path.string() + ": non-finite value at row " +
                          std::to_string(i) + ", column " + std::to_string(j));
      rows(i, j) = v;
    }
  }
  r.expect_eof();
  return rows;
}

// ---------------------------------------------------------------------------
// Manifest

fs::path write_corpus(const Corpus& corpus, const fs::path& dir) {
  corpus.validate();
  fs::create_directories(dir);
  Index total = 0;
  for (const auto& c : corpus.collections) total += c.looks.rows();
  Matrix rows(total, corpus.feature_dim);
  json entries = json::array();
  Index offset = 0;
  for (const auto& c : corpus.collections) {
    rows.middleRows(offset, c.looks.rows()) = c.looks;
    const SeasonSlot s = corpus.slot(c.t);
    entries.push_back({{"designer", c.designer},
                       {"year", s.year},
                       {"season", to_string(s.season)},
                       {"file", kFeatureFile},
                       {"row_begin", offset},
                       {"row_count", c.looks.rows()},
                       {"split", to_string(c.split)}});
    offset += c.looks.rows();
  }
  write_feature_file(dir / kFeatureFile, rows);

  json manifest = {{"format", "runwayseq-corpus"},
                   {"version", kManifestVersion},
                   {"feature_dim", corpus.feature_dim},
                   {"year0", corpus.year0},
                   {"num_slots", corpus.num_slots},
                   {"designers", corpus.designers},
                   {"collections", std::move(entries)}};
  const fs::path path = dir / "manifest.json";
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
  return path;
}

Corpus load_corpus(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("missing file: " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  try {
    if (m.at("format").get<std::string>() != "runwayseq-corpus")
      throw FormatError(manifest_path.string() + ": not a corpus manifest");
    if (m.at("version").get<std::uint32_t>() != kManifestVersion)
      throw FormatError(manifest_path.string() + ": unsupported manifest version");

    Corpus corpus;
    corpus.feature_dim = m.at("feature_dim").get<Index>();
    corpus.year0 = m.at("year0").get<int>();
    corpus.num_slots = m.at("num_slots").get<int>();
    corpus.designers = m.at("designers").get<std::vector<std::string>>();

    const fs::path base = manifest_path.parent_path();
    std::map<std::string, Matrix> files;
    for (const auto& e : m.at("collections")) {
      const auto file = e.at("file").get<std::string>();
      auto it = files.find(file);
      if (it == files.end())
        it = files.emplace(file, read_feature_file(base / file, corpus.feature_dim))
                 .first;
      const Matrix& rows = it->second;
      const auto begin = e.at("row_begin").get<Index>();
      const auto count = e.at("row_count").get<Index>();
      if (begin < 0 || count < 1 || begin + count > rows.rows())
        throw FormatError(file + ": row range [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") outside " +
                          std::to_string(rows.rows()) + " rows");
      Collection c;
      c.designer = e.at("designer").get<int>();
      c.t = corpus.slot_index(e.at("year").get<int>(),
                              parse_season(e.at("season").get<std::string>()));
      c.looks = rows.middleRows(begin, count);
      c.split = e.contains("split") ? parse_split(e.at("split").get<std::string>())
                                    : Split::Unassigned;
      corpus.collections.push_back(std::move(c));
    }
    corpus.validate();
    return corpus;
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Splitting

std::array<std::size_t, 4> split_counts(const Corpus& corpus) {
  std::array<std::size_t, 4> counts{};
  for (const auto& c : corpus.collections) ++counts[static_cast<int>(c.split)];
  return counts;
}

Corpus split_corpus(Corpus corpus, const SplitFractions& f, Rng& rng) {
  const bool in_range = f.train >= 0 && f.val >= 0 && f.test >= 0;
  if (!in_range || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "split fractions (" << f.train << ", " << f.val << ", " << f.test
        << ") must be non-negative and sum to 1";
    throw std::invalid_argument(msg.str());
  }
  const std::size_t n = corpus.collections.size();
  const auto n_train = std::min<std::size_t>(n, std::lround(f.train * n));
  const auto n_val = std::min<std::size_t>(n - n_train, std::lround(f.val * n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  for (std::size_t r = 0; r < n; ++r) {
    corpus.collections[order[r]].split =
        r < n_train ? Split::Train : (r < n_train + n_val ? Split::Val : Split::Test);
  }

  // Give every designer a training collection by swapping labels with a
  // designer that has at least two.
  std::vector<int> train_count(corpus.num_designers(), 0);
  for (const auto& c : corpus.collections)
    if (c.split == Split::Train) ++train_count[c.designer];
  for (int d = 0; d < corpus.num_designers(); ++d) {
    if (train_count[d] > 0) continue;
    const auto mine = corpus.collections_of(d);
    if (mine.empty()) continue;
    for (std::size_t idx : order) {
      auto& donor = corpus.collections[idx];
      if (donor.split == Split::Train && train_count[donor.designer] >= 2) {
        auto& taker = corpus.collections[mine.front()];
        std::swap(donor.split, taker.split);
        --train_count[donor.designer];
        ++train_count[d];
        break;
      }
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Synthetic generation

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw std::invalid_argument("synthetic config: " + msg);
  };
  if (designers < 2) fail("designers must be >= 2");
  if (slots < 2) fail("slots must be >= 2");
  if (looks_min < 1 || looks_max < looks_min) fail("need 1 <= looks_min <= looks_max");
  if (style_dim < 1) fail("style_dim must be >= 1");
  if (feature_dim < style_dim) fail("feature_dim must be >= style_dim");
  if (drift < 0 || trend_strength < 0 || noise < 0)
    fail("drift, trend_strength and noise must be >= 0");
  if (skip_prob < 0 || skip_prob >= 1) fail("skip_prob must be in [0, 1)");
}

SyntheticCorpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index S = cfg.style_dim;
  const Index F = cfg.feature_dim;
  auto gaussian = [&rng](Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
  };

  SyntheticCorpus out;
  out.projection = gaussian(F, S) / std::sqrt(static_cast<double>(S));

  // Stationary AR(1) trend with unit marginal variance.
  out.trends = gaussian(cfg.slots, S);
  for (int t = 1; t < cfg.slots; ++t)
    out.trends.row(t) = 0.8 * out.trends.row(t - 1) + 0.6 * out.trends.row(t);

  // Random-walk styles. Draw counts do not depend on drift, so corpora that
  // differ only in drift share every underlying variate.
  out.styles.reserve(cfg.designers);
  for (int d = 0; d < cfg.designers; ++d) {
    Matrix steps = gaussian(cfg.slots, S);
    Matrix style(cfg.slots, S);
    style.row(0) = steps.row(0);
    for (int t = 1; t < cfg.slots; ++t)
      style.row(t) = style.row(t - 1) + cfg.drift * steps.row(t);
    out.styles.push_back(std::move(style));
  }

  Corpus& corpus = out.corpus;
  corpus.feature_dim = F;
  corpus.year0 = cfg.year0;
  corpus.num_slots = cfg.slots;
  for (int d = 0; d < cfg.designers; ++d) {
    std::ostringstream name;
    name << "designer_" << (d < 10 ? "0" : "") << d;
    corpus.designers.push_back(name.str());
  }
  const auto k_span = static_cast<std::uint64_t>(cfg.looks_max - cfg.looks_min + 1);
  for (int d = 0; d < cfg.designers; ++d) {
    for (int t = 0; t < cfg.slots; ++t) {
      const double skip_draw = rng.uniform();
      const auto k = cfg.looks_min + static_cast<int>(rng.below(k_span));
      const Matrix jitter = gaussian(k, F);
      const bool edge = t == 0 || t == cfg.slots - 1;
      if (!edge && skip_draw < cfg.skip_prob) continue;
      const Vector latent =
          out.styles[d].row(t).transpose() + cfg.trend_strength * out.trends.row(t).transpose();
      const Vector center = out.projection * latent;
      Collection c;
      c.designer = d;
      c.t = t;
      c.looks = (center.transpose().replicate(k, 1) + cfg.noise * jitter)
                    .unaryExpr([](double v) {
                      return static_cast<double>(static_cast<float>(v));
                    });
      corpus.collections.push_back(std::move(c));
    }
  }
  corpus.validate();
  return out;
}

void write_latents(const SyntheticCorpus& synth, const fs::path& path) {
  auto rows_of = [](const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
      std::vector<double> r(m.cols());
      for (Index j = 0; j < m.cols(); ++j) r[j] = m(i, j);
      rows.push_back(std::move(r));
    }
    return rows;
  };
  json styles = json::array();
  for (const auto& s : synth.styles) styles.push_back(rows_of(s));
  const json doc = {{"style_dim", synth.trends.cols()},
                    {"trends", rows_of(synth.trends)},
                    {"styles", std::move(styles)},
                    {"projection", rows_of(synth.projection)}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << doc.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Class trend series

UnknownLabelError::UnknownLabelError(const std::string& label,
                                     std::vector<std::string> vocab)
    : std::invalid_argument([&] {
        std::string msg = "unknown label \"" + label + "\"; available:";
        for (const auto& v : vocab) msg += " \"" + v + "\"";
        return msg;
      }()),
      vocab_(std::move(vocab)) {}

std::vector<std::string> ClassPredictionTable::vocabulary() const {
  std::set<std::string> labels;
  for (const auto& r : rows) labels.insert(r.label);
  return {labels.begin(), labels.end()};
}

ClassPredictionTable parse_class_table(std::string_view text) {
  ClassPredictionTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, int> per_look;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("look_id", 0) == 0) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos;
         start = tab + 1)
      fields.push_back(line.substr(start, tab - start));
    fields.push_back(line.substr(start));
    const std::string where = "class table line " + std::to_string(line_no);
    if (fields.size() != 5)
      throw FormatError(where + ": expected 5 tab-separated fields, got " +
                        std::to_string(fields.size()));
    ClassPrediction row;
    row.look_id = fields[0];
    const auto dash = fields[1].find('-');
    if (dash == std::string::npos)
      throw FormatError(where + ": slot must look like 2001-spring");
    try {
      row.slot.year = std::stoi(fields[1].substr(0, dash));
      row.rank = std::stoi(fields[3]);
    } catch (const std::exception&) {
      throw FormatError(where + ": malformed year or rank");
    }
    row.slot.season = parse_season(fields[1].substr(dash + 1));
    row.designer = fields[2];
    row.label = fields[4];
    ++per_look[row.look_id];
    table.rows.push_back(std::move(row));
  }
  if (!per_look.empty()) {
    table.top_k = per_look.begin()->second;
    for (const auto& [look, k] : per_look)
      if (k != table.top_k)
        throw FormatError("class table: look \"" + look + "\" has " +
                          std::to_string(k) + " predictions, expected " +
                          std::to_string(table.top_k));
  }
  return table;
}

ClassPredictionTable load_class_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_class_table(buf.str());
}

std::vector<std::pair<int, double>> class_trend_series(
    const ClassPredictionTable& table, std::string_view label,
    const Corpus& corpus) {
  const auto vocab = table.vocabulary();
  if (!std::binary_search(vocab.begin(), vocab.end(), std::string(label)))
    throw UnknownLabelError(std::string(label), vocab);

  std::map<int, std::set<int>> showing;
  for (const auto& c : corpus.collections)
    showing[corpus.slot(c.t).year].insert(c.designer);

  std::map<int, std::set<std::string>> hits;
  for (const auto& r : table.rows)
    if (r.label == label) hits[r.slot.year].insert(r.look_id);

  for (const auto& [year, looks] : hits)
    if (!showing.count(year))
      throw FormatError("class table has looks in " + std::to_string(year) +
                        " but the corpus has no shows that year");

  std::vector<std::pair<int, double>> series;
  for (const auto& [year, designers] : showing) {
    const auto it = hits.find(year);
    const double count = it == hits.end() ? 0.0 : static_cast<double>(it->second.size());
    series.emplace_back(year, count / static_cast<double>(designers.size()));
  }
  return series;
}

}  // namespace runwayseq
