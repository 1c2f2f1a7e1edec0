#pragma once

// Exact cosine top-k retrieval. Vectors are normalized once at insert so a
// query is a single pass of dot products over contiguous storage.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"

namespace repsel {

struct Neighbor {
  std::uint64_t id = 0;
  std::uint32_t label = 0;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Neighbors in descending similarity, ties by ascending id.
struct RetrievalResult {
  std::vector<Neighbor> neighbors;

  std::size_t size() const { return neighbors.size(); }
  bool empty() const { return neighbors.empty(); }
  const Neighbor& operator[](std::size_t i) const { return neighbors[i]; }
};

/// Ranking order used everywhere a neighbor list is sorted.
inline bool ranks_before(double sim_a, std::uint64_t id_a, double sim_b, std::uint64_t id_b) {
  if (sim_a != sim_b) return sim_a > sim_b;
  return id_a < id_b;
}

class VectorIndex {
 public:
  explicit VectorIndex(std::uint32_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw ValidationError("index dimension must be at least 1");
  }

  /// Stores the unit-normalized vector. Rejects zero vectors, dimension
  /// mismatches and duplicate ids.
  void add(std::uint64_t id, std::uint32_t label, std::span<const float> vector) {
    if (vector.size() != dimension_)
      throw ValidationError("id " + std::to_string(id) + ": dimension " + std::to_string(vector.size()) +
                            " != index dimension " + std::to_string(dimension_));
    const double n = norm(vector);
    if (!(n > 0.0) || !std::isfinite(n))
      throw ValidationError("id " + std::to_string(id) + ": zero-norm or non-finite vector");
    if (!id_set_.insert(id).second) throw ValidationError("duplicate id " + std::to_string(id));
    ids_.push_back(id);
    labels_.push_back(label);
    for (float x : vector) data_.push_back(static_cast<float>(static_cast<double>(x) / n));
  }

  std::uint32_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::uint64_t id(std::size_t pos) const { return ids_[pos]; }
  std::uint32_t label(std::size_t pos) const { return labels_[pos]; }

  /// Stored (unit) vector at position `pos`.
  std::span<const float> vector(std::size_t pos) const {
    return std::span<const float>(data_).subspan(pos * dimension_, dimension_);
  }

  /// Similarity between a unit query and the stored vector at `pos`.
  double similarity(std::span<const double> unit_query, std::size_t pos) const {
    return dot(vector(pos), unit_query);
  }

  /// Unit-normalized copy of a query; validates dimension and norm.
  std::vector<double> prepare_query(std::span<const float> query) const {
    if (query.size() != dimension_)
      throw ValidationError("query dimension " + std::to_string(query.size()) + " != index dimension " +
                            std::to_string(dimension_));
    const double n = norm(query);
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("zero-norm or non-finite query");
    std::vector<double> q(query.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = static_cast<double>(query[i]) / n;
    return q;
  }

  /// Top-k over a prepared unit query. `exclude` (a position) is skipped;
  /// pass size() to skip nothing.
  RetrievalResult topk_prepared(std::span<const double> unit_query, std::size_t k, std::size_t exclude) const {
    const std::size_t n = size();
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(n);
    for (std::size_t p = 0; p < n; ++p) {
      if (p == exclude) continue;
      scored.emplace_back(similarity(unit_query, p), p);
    }
    const std::size_t take = std::min(k, scored.size());
    auto cmp = [this](const auto& a, const auto& b) { return ranks_before(a.first, ids_[a.second], b.first, ids_[b.second]); };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), cmp);
    RetrievalResult out;
    out.neighbors.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      const auto p = scored[i].second;
      out.neighbors.push_back({ids_[p], labels_[p], scored[i].first});
    }
    return out;
  }

  RetrievalResult query_topk(std::span<const float> query, std::size_t k) const {
    if (k == 0) throw ValidationError("k must be positive");
    const auto q = prepare_query(query);
    return topk_prepared(q, k, size());
  }

  std::uint32_t classify_top1(std::span<const float> query) const {
    if (empty()) throw ValidationError("cannot classify against an empty index");
    return query_topk(query, 1)[0].label;
  }

 private:
  std::uint32_t dimension_;
  std::vector<std::uint64_t> ids_;
  std::unordered_set<std::uint64_t> id_set_;
  std::vector<std::uint32_t> labels_;
  std::vector<float> data_;
};

inline VectorIndex build_index(const EmbeddingSet& set) {
  VectorIndex index(set.dimension());
  for (const auto& r : set.records()) index.add(r.id, r.label, r.vector);
  return index;
}

inline RetrievalResult query_topk(const VectorIndex& index, std::span<const float> query, std::size_t k) {
  return index.query_topk(query, k);
}

inline std::uint32_t classify_top1(const VectorIndex& index, std::span<const float> query) {
  return index.classify_top1(query);
}

}  // namespace repsel
