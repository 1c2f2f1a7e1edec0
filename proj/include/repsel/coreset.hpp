#pragma once

// Coreset baselines that need no training dynamics: k-center greedy
// (farthest-first traversal), herding (greedy mean matching) and
// entropy ranking under a linear probe.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"
#include "repsel/probe.hpp"
#include "repsel/selection.hpp"
#include "repsel/subset.hpp"

namespace repsel {

struct CoresetBudget {
  double fraction = 0.1;
  bool balanced = true;

  void validate() const {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("budget fraction must be in (0, 1]");
  }
};

namespace detail {

/// Runs `pick(positions, count, class_label)` per class (balanced) or once
/// over the whole set, concatenating the returned positions by class index.
template <typename Pick>
std::vector<std::size_t> per_budget(const EmbeddingSet& set, const CoresetBudget& budget, Pick&& pick) {
  budget.validate();
  if (set.empty()) throw ValidationError("cannot select from an empty set");
  std::vector<std::size_t> out;
  if (budget.balanced) {
    const auto members = set.members_by_class();
    for (std::uint32_t label = 0; label < members.size(); ++label) {
      if (members[label].empty()) continue;
      auto part = pick(members[label], budget_count(budget.fraction, members[label].size()), label);
      out.insert(out.end(), part.begin(), part.end());
    }
  } else {
    std::vector<std::size_t> all(set.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    out = pick(all, budget_count(budget.fraction, set.size()), kNoise);
  }
  return out;
}

inline nlohmann::ordered_json budget_json(const CoresetBudget& b) {
  return {{"fraction", b.fraction}, {"balanced", b.balanced}};
}

}  // namespace detail

/// Farthest-first traversal over `positions` of `set` starting at
/// positions[start], distance 1 - cosine, ties by ascending id. Returns
/// picked positions in traversal order.
inline std::vector<std::size_t> farthest_first(const EmbeddingSet& set, const std::vector<std::size_t>& positions,
                                               std::size_t count, std::size_t start) {
  const std::size_t n = positions.size();
  count = std::min(count, n);
  std::vector<std::size_t> order;
  if (count == 0) return order;
  std::vector<std::vector<double>> unit;
  unit.reserve(n);
  for (auto p : positions) unit.push_back(unit_vector(set[p].vector));
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t current = start;
  for (;;) {
    taken[current] = true;
    order.push_back(positions[current]);
    if (order.size() == count) break;
    std::size_t far = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_dist[i] = std::min(min_dist[i], 1.0 - dot(unit[i], unit[current]));
      if (far == n || min_dist[i] > min_dist[far] ||
          (min_dist[i] == min_dist[far] && set[positions[i]].id < set[positions[far]].id))
        far = i;
    }
    current = far;
  }
  return order;
}

inline Subset select_kcenter_greedy(const EmbeddingSet& set, const CoresetBudget& budget, std::uint64_t seed) {
  auto picks = detail::per_budget(set, budget, [&](const std::vector<std::size_t>& pos, std::size_t count,
                                                   std::uint32_t label) {
    Rng rng = label == kNoise ? Rng(seed) : detail::class_rng(seed, label);
    return farthest_first(set, pos, count, uniform_index(rng, pos.size()));
  });
  return subset_of_records(set, picks, "kcenter", detail::budget_json(budget), seed);
}

/// Greedy mean matching: each step adds the record that brings the running
/// mean of the chosen records closest (Euclidean) to the target mean.
inline std::vector<std::size_t> herd(const EmbeddingSet& set, const std::vector<std::size_t>& positions,
                                     std::size_t count) {
  const std::size_t n = positions.size();
  const std::size_t d = set.dimension();
  count = std::min(count, n);
  std::vector<double> target(d, 0.0);
  for (auto p : positions)
    for (std::size_t j = 0; j < d; ++j) target[j] += set[p].vector[j];
  for (auto& t : target) t /= static_cast<double>(n);

  std::vector<double> sum(d, 0.0);
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> order;
  for (std::size_t step = 0; step < count; ++step) {
    const double m = static_cast<double>(step + 1);
    std::size_t best = n;
    double best_obj = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const auto& v = set[positions[i]].vector;
      double obj = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = target[j] - (sum[j] + v[j]) / m;
        obj += diff * diff;
      }
      if (obj < best_obj || (obj == best_obj && set[positions[i]].id < set[positions[best]].id)) {
        best_obj = obj;
        best = i;
      }
    }
    taken[best] = true;
    for (std::size_t j = 0; j < d; ++j) sum[j] += set[positions[best]].vector[j];
    order.push_back(positions[best]);
  }
  return order;
}

inline Subset select_herding(const EmbeddingSet& set, const CoresetBudget& budget) {
  auto picks = detail::per_budget(set, budget, [&](const std::vector<std::size_t>& pos, std::size_t count,
                                                   std::uint32_t) { return herd(set, pos, count); });
  return subset_of_records(set, picks, "herding", detail::budget_json(budget));
}

enum class EntropyDirection { keep_low_entropy, keep_high_entropy };

/// Entropies are rounded to this grid before ranking so that numerically
/// equal entropies tie exactly and fall back to id order.
inline constexpr double kEntropyResolution = 1e-9;

inline double shannon_entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline std::int64_t quantized_entropy(double h) { return std::llround(h / kEntropyResolution); }

inline Subset select_uncertainty_entropy(const EmbeddingSet& set, const CoresetBudget& budget, const Classifier& probe,
                                         EntropyDirection direction) {
  detail::check_compatible(probe, set);
  std::vector<std::int64_t> entropy(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    entropy[i] = quantized_entropy(shannon_entropy(predict_proba(probe, std::span<const double>(unit_vector(set[i].vector)))));
  const bool low = direction == EntropyDirection::keep_low_entropy;
  auto picks = detail::per_budget(set, budget, [&](std::vector<std::size_t> pos, std::size_t count, std::uint32_t) {
    std::sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
      if (entropy[a] != entropy[b]) return low ? entropy[a] < entropy[b] : entropy[a] > entropy[b];
      return set[a].id < set[b].id;
    });
    pos.resize(count);
    return pos;
  });
  auto params = detail::budget_json(budget);
  params["direction"] = low ? "keep_low_entropy" : "keep_high_entropy";
  params["probe_digest"] = hex64(probe.trained_on);
  return subset_of_records(set, picks, low ? "ue-low" : "ue-high", std::move(params));
}

}  // namespace repsel
