#pragma once

// One named selection method applied to a training set: optional PCA
// reduction, optional homogeneity filtering, then a selector. Method names
// are the ones used by the CLI and sweep configs:
//
//   uniform | kmeans[-centroid|-medoid] | density[-medoid|-centroid]
//   | kcenter | herding | ue-low | ue-high
//
// each optionally prefixed with "cs-" to filter by homogeneity first.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "repsel/coreset.hpp"
#include "repsel/cscore.hpp"
#include "repsel/dataset.hpp"
#include "repsel/dimred.hpp"
#include "repsel/probe.hpp"
#include "repsel/selection.hpp"
#include "repsel/subset.hpp"

namespace repsel {

enum class BaseMethod { uniform, kmeans, density, kcenter, herding, ue_low, ue_high };

struct MethodName {
  bool filtered = false;
  BaseMethod base = BaseMethod::uniform;
  Representative representative = Representative::centroid;

  bool clusters() const { return base == BaseMethod::kmeans || base == BaseMethod::density; }
  bool stochastic() const {
    return base == BaseMethod::uniform || base == BaseMethod::kmeans || base == BaseMethod::kcenter ||
           base == BaseMethod::ue_low || base == BaseMethod::ue_high;
  }
};

inline MethodName parse_method(std::string_view name) {
  MethodName m;
  std::string_view rest = name;
  if (rest.starts_with("cs-")) {
    m.filtered = true;
    rest.remove_prefix(3);
  }
  auto with_rep = [&](std::string_view base, BaseMethod bm, Representative def) {
    if (rest == base) {
      m.base = bm;
      m.representative = def;
      return true;
    }
    if (rest.starts_with(base) && rest.size() > base.size() && rest[base.size()] == '-') {
      const auto suffix = rest.substr(base.size() + 1);
      if (suffix == "centroid" || suffix == "medoid") {
        m.base = bm;
        m.representative = suffix == "centroid" ? Representative::centroid : Representative::medoid;
        return true;
      }
    }
    return false;
  };
  if (rest == "uniform") m.base = BaseMethod::uniform;
  else if (rest == "kcenter") m.base = BaseMethod::kcenter;
  else if (rest == "herding") m.base = BaseMethod::herding;
  else if (rest == "ue-low") m.base = BaseMethod::ue_low;
  else if (rest == "ue-high") m.base = BaseMethod::ue_high;
  else if (!with_rep("kmeans", BaseMethod::kmeans, Representative::centroid) &&
           !with_rep("density", BaseMethod::density, Representative::medoid))
    throw ValidationError("unknown method '" + std::string(name) + "'");
  return m;
}

struct SelectionSpec {
  std::string method = "uniform";
  /// Budget as a fraction of the set handed to the selector (after any
  /// filtering). For k-means it is the per-class cluster fraction unless
  /// k_per_class is set; for density methods it caps the number of
  /// representatives, largest clusters first (1.0 = no cap).
  double fraction = 0.1;
  bool balanced = true;
  std::uint64_t seed = 0;
  FilterParams filter;
  /// PCA components for scoring and clustering; 0 disables reduction.
  std::uint32_t components = 0;
  /// Fixed k-means clusters per class; 0 derives k from `fraction`.
  std::uint32_t k_per_class = 0;
  std::uint32_t max_iters = 100;
  std::uint32_t min_cluster_size = 3;
  ProbeParams probe;
  unsigned jobs = 1;
};

/// Drops all but the `keep` largest clusters (ties by cluster index);
/// dropped members become noise.
inline ClusterAssignment keep_largest_clusters(const ClusterAssignment& a, std::size_t keep) {
  if (a.clusters.size() <= keep) return a;
  std::vector<std::size_t> order(a.clusters.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a.clusters[x].members.size() > a.clusters[y].members.size();
  });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  ClusterAssignment out;
  out.cluster_of.assign(a.cluster_of.size(), kNoise);
  for (auto c : order) {
    const auto id = static_cast<std::uint32_t>(out.clusters.size());
    out.clusters.push_back(a.clusters[c]);
    for (auto p : a.clusters[c].members) out.cluster_of[p] = id;
  }
  return out;
}

inline Subset run_selection(const EmbeddingSet& train, const SelectionSpec& spec) {
  const MethodName m = parse_method(spec.method);
  if (train.empty()) throw ValidationError("cannot select from an empty set");
  if (!(spec.fraction > 0.0 && spec.fraction <= 1.0)) throw ValidationError("fraction must be in (0, 1]");

  const bool reduce = spec.components > 0 && (m.filtered || m.clusters());
  std::optional<EmbeddingSet> reduced;
  if (reduce) reduced = transform(fit_projection(train, spec.components), train);
  const EmbeddingSet& features = reduced ? *reduced : train;

  EmbeddingSet work = train;
  EmbeddingSet work_features = features;
  if (m.filtered) {
    const auto table = homogeneity_scores(features, spec.filter.n_neighbors, spec.jobs);
    const auto kept = surviving_positions(features, table, spec.filter);
    work = train.select(kept);
    work_features = features.select(kept);
    if (work.empty()) throw ValidationError("homogeneity filter removed every record");
  }

  const CoresetBudget budget{spec.fraction, spec.balanced};
  Subset out;
  switch (m.base) {
    case BaseMethod::uniform:
      out = select_uniform(work, spec.fraction, spec.balanced, spec.seed);
      break;
    case BaseMethod::kmeans:
    case BaseMethod::density: {
      ClusterParams cp;
      cp.k_per_class = spec.k_per_class;
      cp.k_fraction = spec.k_per_class == 0 ? spec.fraction : 0.0;
      cp.max_iters = spec.max_iters;
      cp.seed = spec.seed;
      cp.min_cluster_size = spec.min_cluster_size;
      cp.jobs = spec.jobs;
      const auto method = m.base == BaseMethod::kmeans ? ClusterMethod::kmeans : ClusterMethod::density;
      auto assignment = cluster_per_class(work_features, method, cp);
      if (method == ClusterMethod::density && spec.fraction < 1.0)
        assignment = keep_largest_clusters(assignment, std::max<std::size_t>(1, budget_count(spec.fraction, work.size())));
      out = m.representative == Representative::centroid ? centroids_of(assignment, work) : medoids_of(assignment, work);
      out.params = to_json(method, m.representative, cp);
      if (method == ClusterMethod::density) out.params["fraction_cap"] = spec.fraction;
      if (method == ClusterMethod::kmeans) out.seed = spec.seed;
      break;
    }
    case BaseMethod::kcenter:
      out = select_kcenter_greedy(work, budget, spec.seed);
      break;
    case BaseMethod::herding:
      out = select_herding(work, budget);
      break;
    case BaseMethod::ue_low:
    case BaseMethod::ue_high: {
      ProbeParams pp = spec.probe;
      pp.seed = spec.seed;
      const auto probe = train_probe(work, pp);
      out = select_uncertainty_entropy(
          work, budget, probe,
          m.base == BaseMethod::ue_low ? EntropyDirection::keep_low_entropy : EntropyDirection::keep_high_entropy);
      out.params["probe_epochs"] = pp.epochs;
      out.params["probe_learning_rate"] = pp.learning_rate;
      out.seed = spec.seed;
      break;
    }
  }

  out.method = spec.method;
  out.source_digest = digest(train);
  if (m.filtered) {
    out.params["cscore_neighbors"] = spec.filter.n_neighbors;
    out.params["cscore_threshold"] = spec.filter.threshold;
    out.params["min_keep_per_class"] = spec.filter.min_keep_per_class;
    out.params["filtered_size"] = work.size();
  }
  if (reduce) {
    out.params["reducer"] = "pca";
    out.params["components"] = spec.components;
  }
  return out;
}

}  // namespace repsel
