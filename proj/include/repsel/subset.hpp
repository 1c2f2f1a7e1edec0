#pragma once

// The representative subset produced by every selector, its provenance and
// its on-disk form (an EMB1 file plus a JSON sidecar).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"
#include "repsel/index.hpp"

namespace repsel {

enum class SourceKind { original, centroid };

struct SubsetEntry {
  /// Record id for originals; cluster tag for centroids.
  std::uint64_t id = 0;
  std::vector<float> vector;
  std::uint32_t label = 0;
  SourceKind source = SourceKind::original;

  bool operator==(const SubsetEntry&) const = default;
};

struct Subset {
  std::uint32_t dimension = 1;
  std::vector<std::string> vocabulary;
  std::vector<SubsetEntry> entries;
  std::string method;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  std::optional<std::uint64_t> seed;
  std::uint64_t source_digest = 0;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }

  std::vector<std::uint64_t> ids() const {
    std::vector<std::uint64_t> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.id);
    return out;
  }

  bool all_original() const {
    for (const auto& e : entries)
      if (e.source != SourceKind::original) return false;
    return true;
  }
};

/// Subset of original records at `positions` (kept in the given order).
inline Subset subset_of_records(const EmbeddingSet& set, std::span<const std::size_t> positions, std::string method,
                                nlohmann::ordered_json params = nlohmann::ordered_json::object(),
                                std::optional<std::uint64_t> seed = std::nullopt) {
  Subset s;
  s.dimension = set.dimension();
  s.vocabulary = set.vocabulary();
  s.method = std::move(method);
  s.params = std::move(params);
  s.seed = seed;
  s.source_digest = digest(set);
  s.entries.reserve(positions.size());
  for (auto p : positions) {
    const auto& r = set[p];
    s.entries.push_back({r.id, r.vector, r.label, SourceKind::original});
  }
  return s;
}

/// The subset as a plain set (split tags unassigned), e.g. for writing.
inline EmbeddingSet to_embedding_set(const Subset& subset) {
  std::vector<EmbeddingRecord> records;
  records.reserve(subset.size());
  for (const auto& e : subset.entries) records.push_back({e.id, e.vector, e.label, Split::unassigned});
  return EmbeddingSet(subset.dimension, subset.vocabulary, std::move(records));
}

inline VectorIndex build_index(const Subset& subset) {
  VectorIndex index(subset.dimension);
  for (const auto& e : subset.entries) index.add(e.id, e.label, e.vector);
  return index;
}

inline nlohmann::ordered_json provenance_json(const Subset& subset) {
  nlohmann::ordered_json j;
  j["method"] = subset.method;
  j["params"] = subset.params;
  j["seed"] = subset.seed ? nlohmann::ordered_json(*subset.seed) : nlohmann::ordered_json(nullptr);
  j["source_digest"] = hex64(subset.source_digest);
  j["dimension"] = subset.dimension;
  j["size"] = subset.size();
  auto& sources = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : subset.entries)
    sources.push_back({{"id", e.id}, {"source", e.source == SourceKind::original ? "original" : "centroid"}});
  return j;
}

/// Writes `path` (EMB1) and `path + ".json"` (provenance).
inline void save_subset(const Subset& subset, const std::string& path) {
  save_embeddings(to_embedding_set(subset), path);
  detail::write_file(path + ".json", provenance_json(subset).dump(2) + "\n");
}

}  // namespace repsel
