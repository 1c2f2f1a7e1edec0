#pragma once

// Neighbor label homogeneity as a cheap consistency score, and threshold
// filtering of low-scoring (uncharacteristic) records.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"
#include "repsel/index.hpp"

namespace repsel {

/// Per-record homogeneity, in record order of the scored set.
class ScoreTable {
 public:
  ScoreTable() = default;

  ScoreTable(std::uint32_t n_neighbors, std::vector<std::uint64_t> ids, std::vector<double> scores)
      : n_neighbors_(n_neighbors), ids_(std::move(ids)), scores_(std::move(scores)) {
    if (n_neighbors_ == 0) throw ValidationError("n_neighbors must be positive");
    if (ids_.size() != scores_.size()) throw ValidationError("score table ids and scores differ in length");
    by_id_.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!(scores_[i] >= 0.0 && scores_[i] <= 1.0)) throw ValidationError("score outside [0, 1]");
      if (!by_id_.emplace(ids_[i], scores_[i]).second) throw ValidationError("duplicate id in score table");
    }
  }

  std::uint32_t n_neighbors() const { return n_neighbors_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  const std::vector<double>& scores() const { return scores_; }

  bool contains(std::uint64_t id) const { return by_id_.contains(id); }

  double score_of(std::uint64_t id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) throw ValidationError("no score for id " + std::to_string(id));
    return it->second;
  }

 private:
  std::uint32_t n_neighbors_ = 1;
  std::vector<std::uint64_t> ids_;
  std::vector<double> scores_;
  std::unordered_map<std::uint64_t, double> by_id_;
};

struct FilterParams {
  std::uint32_t n_neighbors = 10;
  double threshold = 0.5;
  std::uint32_t min_keep_per_class = 1;
};

/// Fraction of each record's `n_neighbors` nearest cosine neighbors (self
/// excluded, ties by ascending id) that share its label.
inline ScoreTable homogeneity_scores(const EmbeddingSet& set, std::uint32_t n_neighbors, unsigned jobs = 1) {
  if (n_neighbors == 0) throw ValidationError("n_neighbors must be positive");
  if (set.size() < std::size_t{n_neighbors} + 1)
    throw ValidationError("set of " + std::to_string(set.size()) + " records is too small for " +
                          std::to_string(n_neighbors) + " neighbors");
  const VectorIndex index = build_index(set);
  std::vector<double> scores(set.size());
  parallel_for(set.size(), jobs, [&](std::size_t i) {
    const auto stored = index.vector(i);
    const std::vector<double> q(stored.begin(), stored.end());
    const auto hits = index.topk_prepared(q, n_neighbors, i);
    std::uint32_t same = 0;
    for (const auto& nb : hits.neighbors) same += nb.label == set[i].label ? 1 : 0;
    scores[i] = static_cast<double>(same) / static_cast<double>(n_neighbors);
  });
  std::vector<std::uint64_t> ids;
  ids.reserve(set.size());
  for (const auto& r : set.records()) ids.push_back(r.id);
  return ScoreTable(n_neighbors, std::move(ids), std::move(scores));
}

/// Positions of records with score >= threshold. A class left with fewer
/// than `min_keep_per_class` survivors keeps its best-scoring records (ties
/// by ascending id) up to that floor. Positions are ascending.
inline std::vector<std::size_t> surviving_positions(const EmbeddingSet& set, const ScoreTable& table,
                                                    const FilterParams& params) {
  if (!(params.threshold >= 0.0 && params.threshold <= 1.0)) throw ValidationError("threshold must be in [0, 1]");
  if (table.n_neighbors() != params.n_neighbors)
    throw ValidationError("score table was computed with " + std::to_string(table.n_neighbors()) +
                          " neighbors, filter expects " + std::to_string(params.n_neighbors));
  std::vector<double> score(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (!table.contains(set[i].id)) throw ValidationError("score table does not cover id " + std::to_string(set[i].id));
    score[i] = table.score_of(set[i].id);
  }

  std::vector<bool> keep(set.size(), false);
  for (const auto& members : set.members_by_class()) {
    std::size_t survivors = 0;
    for (auto p : members) {
      keep[p] = score[p] >= params.threshold;
      survivors += keep[p] ? 1 : 0;
    }
    const std::size_t floor = std::min<std::size_t>(params.min_keep_per_class, members.size());
    if (survivors >= floor) continue;
    std::vector<std::size_t> ranked = members;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return set[a].id < set[b].id;
    });
    for (std::size_t i = 0; i < floor; ++i) keep[ranked[i]] = true;
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (keep[i]) kept.push_back(i);
  return kept;
}

/// The surviving records, in input order.
inline EmbeddingSet filter_by_threshold(const EmbeddingSet& set, const ScoreTable& table, const FilterParams& params) {
  return set.select(surviving_positions(set, table, params));
}

inline std::string scores_to_csv(const ScoreTable& table) {
  std::string out = "id,score\n";
  char buf[32];
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9g", table.scores()[i]);
    out += std::to_string(table.ids()[i]) + ',' + buf + '\n';
  }
  return out;
}

inline void save_scores_csv(const ScoreTable& table, const std::string& path) {
  detail::write_file(path, scores_to_csv(table));
}

/// Reads an `id,score` CSV; the caller supplies the neighbor count that
/// produced it, and every score must lie on its 1/N grid.
inline ScoreTable load_scores_csv(const std::string& path, std::uint32_t n_neighbors) {
  const std::string text = detail::read_file(path);
  std::vector<std::uint64_t> ids;
  std::vector<double> scores;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const auto line = detail::trim(std::string_view(text).substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line == "id,score") continue;
    const auto fields = detail::split_fields(line);
    if (fields.size() != 2) throw FormatError("expected id,score", line_no);
    std::uint64_t id = 0;
    double s = 0.0;
    auto [p1, e1] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), id);
    auto [p2, e2] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), s);
    if (e1 != std::errc() || e2 != std::errc()) throw FormatError("bad id or score", line_no);
    // Scores are written with 9 digits; snap back onto the 1/N grid.
    const double steps = std::round(s * n_neighbors);
    if (std::abs(s * n_neighbors - steps) > 1e-6)
      throw FormatError("score " + std::string(fields[1]) + " is not a multiple of 1/" + std::to_string(n_neighbors),
                        line_no);
    s = steps / static_cast<double>(n_neighbors);
    ids.push_back(id);
    scores.push_back(s);
  }
  return ScoreTable(n_neighbors, std::move(ids), std::move(scores));
}

}  // namespace repsel
