#pragma once

// Clustering-based representative selection. Every clusterer runs per class
// and returns positions into the input set, so a clustering computed in a
// reduced space can be turned into representatives in the original space.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"
#include "repsel/subset.hpp"

namespace repsel {

inline constexpr std::uint32_t kNoise = std::numeric_limits<std::uint32_t>::max();

struct Cluster {
  std::uint32_t label = 0;
  /// Positions into the clustered set, ascending.
  std::vector<std::size_t> members;
};

struct ClusterAssignment {
  /// Cluster index per record, or kNoise.
  std::vector<std::uint32_t> cluster_of;
  std::vector<Cluster> clusters;

  std::size_t noise_count() const {
    return static_cast<std::size_t>(std::count(cluster_of.begin(), cluster_of.end(), kNoise));
  }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per class so results do not depend on job count.
inline Rng class_rng(std::uint64_t seed, std::uint32_t label) { return Rng(splitmix64(seed ^ splitmix64(label))); }

/// Merges per-class local cluster ids (kNoise allowed) into one assignment.
/// Local ids must be dense 0..k-1 per class.
inline ClusterAssignment merge_class_clusters(std::size_t n, const std::vector<std::vector<std::size_t>>& members,
                                              const std::vector<std::vector<std::uint32_t>>& local) {
  ClusterAssignment out;
  out.cluster_of.assign(n, kNoise);
  for (std::uint32_t label = 0; label < members.size(); ++label) {
    const auto& pos = members[label];
    const auto& loc = local[label];
    std::uint32_t k = 0;
    for (auto c : loc)
      if (c != kNoise) k = std::max(k, c + 1);
    const auto base = static_cast<std::uint32_t>(out.clusters.size());
    for (std::uint32_t c = 0; c < k; ++c) out.clusters.push_back({label, {}});
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (loc[i] == kNoise) continue;
      out.cluster_of[pos[i]] = base + loc[i];
      out.clusters[base + loc[i]].members.push_back(pos[i]);
    }
  }
  return out;
}

inline void check_assignment(const ClusterAssignment& a, const EmbeddingSet& set) {
  if (a.cluster_of.size() != set.size())
    throw ValidationError("assignment covers " + std::to_string(a.cluster_of.size()) + " records, set has " +
                          std::to_string(set.size()));
  for (std::size_t c = 0; c < a.clusters.size(); ++c) {
    for (auto p : a.clusters[c].members) {
      if (p >= set.size() || a.cluster_of[p] != c || set[p].label != a.clusters[c].label)
        throw ValidationError("assignment does not match set at cluster " + std::to_string(c));
    }
  }
}

/// Lloyd's iterations with k-means++ seeding on one class. Returns local
/// cluster ids, dense and ordered by first member.
inline std::vector<std::uint32_t> lloyd(const std::vector<std::vector<double>>& x, std::size_t k,
                                        std::uint32_t max_iters, Rng& rng) {
  const std::size_t n = x.size();
  k = std::min(k, n);
  if (n == 0 || k == 0) return {};
  const std::size_t d = x[0].size();

  // k-means++ seeding.
  std::vector<std::vector<double>> centers;
  centers.reserve(k);
  centers.push_back(x[uniform_index(rng, n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x[i], centers[0]);
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (r < acc && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(x[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(x[i], centers.back()));
  }

  std::vector<std::uint32_t> assign(n, kNoise);
  for (std::uint32_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t best = 0;
      double best_d = squared_distance(x[i], centers[0]);
      for (std::uint32_t c = 1; c < k; ++c) {
        const double dc = squared_distance(x[i], centers[c]);
        if (dc < best_d) {
          best_d = dc;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;

    std::vector<std::vector<double>> sums(k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      for (std::size_t j = 0; j < d; ++j) sums[assign[i]][j] += x[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: re-seed at the point farthest from its old centroid.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double di = squared_distance(x[i], centers[c]);
        if (di > far_d) {
          far_d = di;
          far = i;
        }
      }
      centers[c] = x[far];
    }
  }

  // Relabel non-empty clusters densely in order of first member.
  std::vector<std::uint32_t> remap(k, kNoise);
  std::uint32_t next = 0;
  for (auto& a : assign) {
    if (remap[a] == kNoise) remap[a] = next++;
    a = remap[a];
  }
  return assign;
}

inline std::vector<std::vector<double>> gather(const EmbeddingSet& set, const std::vector<std::size_t>& positions) {
  std::vector<std::vector<double>> x;
  x.reserve(positions.size());
  for (auto p : positions) x.emplace_back(set[p].vector.begin(), set[p].vector.end());
  return x;
}

}  // namespace detail

/// Per-class k-means where class c gets `clusters_for(n_c)` clusters
/// (clamped to n_c). Euclidean geometry on the stored vectors.
inline ClusterAssignment kmeans_per_class(const EmbeddingSet& set,
                                          const std::function<std::size_t(std::size_t)>& clusters_for,
                                          std::uint32_t max_iters, std::uint64_t seed, unsigned jobs = 1) {
  if (set.empty()) throw ValidationError("cannot cluster an empty set");
  if (max_iters == 0) throw ValidationError("max_iters must be positive");
  const auto members = set.members_by_class();
  std::vector<std::vector<std::uint32_t>> local(members.size());
  parallel_for(members.size(), jobs, [&](std::size_t label) {
    if (members[label].empty()) return;
    Rng rng = detail::class_rng(seed, static_cast<std::uint32_t>(label));
    local[label] = detail::lloyd(detail::gather(set, members[label]), clusters_for(members[label].size()), max_iters, rng);
  });
  return detail::merge_class_clusters(set.size(), members, local);
}

inline ClusterAssignment kmeans_per_class(const EmbeddingSet& set, std::uint32_t k_per_class, std::uint32_t max_iters,
                                          std::uint64_t seed, unsigned jobs = 1) {
  if (k_per_class == 0) throw ValidationError("k_per_class must be positive");
  return kmeans_per_class(set, [k_per_class](std::size_t) { return std::size_t{k_per_class}; }, max_iters, seed, jobs);
}

/// Arithmetic mean of each cluster's member vectors.
inline Subset centroids_of(const ClusterAssignment& assignment, const EmbeddingSet& set) {
  detail::check_assignment(assignment, set);
  Subset s;
  s.dimension = set.dimension();
  s.vocabulary = set.vocabulary();
  s.method = "centroids";
  s.source_digest = digest(set);
  for (std::size_t c = 0; c < assignment.clusters.size(); ++c) {
    const auto& cl = assignment.clusters[c];
    if (cl.members.empty()) continue;
    std::vector<double> sum(set.dimension(), 0.0);
    for (auto p : cl.members)
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += set[p].vector[j];
    SubsetEntry e;
    e.id = c;
    e.label = cl.label;
    e.source = SourceKind::centroid;
    e.vector.resize(sum.size());
    for (std::size_t j = 0; j < sum.size(); ++j)
      e.vector[j] = static_cast<float>(sum[j] / static_cast<double>(cl.members.size()));
    s.entries.push_back(std::move(e));
  }
  return s;
}

/// The member most cosine-similar to each cluster's mean (ties by id).
inline Subset medoids_of(const ClusterAssignment& assignment, const EmbeddingSet& set) {
  detail::check_assignment(assignment, set);
  std::vector<std::size_t> picks;
  for (const auto& cl : assignment.clusters) {
    if (cl.members.empty()) continue;
    std::vector<double> mean(set.dimension(), 0.0);
    for (auto p : cl.members)
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += set[p].vector[j];
    for (auto& m : mean) m /= static_cast<double>(cl.members.size());
    std::size_t best = cl.members.front();
    double best_sim = -std::numeric_limits<double>::infinity();
    for (auto p : cl.members) {
      const double sim = cosine_similarity(set[p].vector, mean);
      if (sim > best_sim || (sim == best_sim && set[p].id < set[best].id)) {
        best_sim = sim;
        best = p;
      }
    }
    picks.push_back(best);
  }
  return subset_of_records(set, picks, "medoids");
}

// ---------------------------------------------------------------------------
// Density clustering: mutual-reachability MST per class, cut level by level
// (descending weight) keeping the partition with the most components of at
// least min_cluster_size members. Smaller components become noise.
// ---------------------------------------------------------------------------

struct MstEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;
};

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

  std::size_t size_of(std::size_t x) { return size_[find(x)]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

inline double cosine_distance_unit(const std::vector<double>& a, const std::vector<double>& b) {
  return 1.0 - dot(a, b);
}

}  // namespace detail

/// Core distance of every point: distance (1 - cosine) to its
/// `min_points`-th nearest other point, or to the farthest one when fewer
/// exist.
inline std::vector<double> core_distances(const std::vector<std::vector<double>>& unit, std::size_t min_points) {
  const std::size_t n = unit.size();
  std::vector<double> core(n, 0.0);
  if (n < 2 || min_points == 0) return core;
  const std::size_t kth = std::min(min_points, n - 1) - 1;
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) row.push_back(detail::cosine_distance_unit(unit[i], unit[j]));
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kth), row.end());
    core[i] = row[kth];
  }
  return core;
}

/// Prim's MST over the dense mutual-reachability graph; ties pick the lowest
/// vertex index.
inline std::vector<MstEdge> mutual_reachability_mst(const std::vector<std::vector<double>>& unit,
                                                    const std::vector<double>& core) {
  const std::size_t n = unit.size();
  std::vector<MstEdge> edges;
  if (n < 2) return edges;
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> parent(n, 0);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 1; step < n; ++step) {
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double w = std::max({core[current], core[v], detail::cosine_distance_unit(unit[current], unit[v])});
      if (w < best[v]) {
        best[v] = w;
        parent[v] = current;
      }
    }
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && (next == n || best[v] < best[next])) next = v;
    in_tree[next] = true;
    edges.push_back({parent[next], next, best[next]});
    current = next;
  }
  return edges;
}

/// Cuts the MST level by level and returns local cluster ids (kNoise for
/// members of undersized components).
inline std::vector<std::uint32_t> extract_density_clusters(std::size_t n, const std::vector<MstEdge>& edges,
                                                           std::size_t min_cluster_size) {
  std::vector<std::uint32_t> out(n, kNoise);
  if (n == 0 || n < min_cluster_size) return out;

  std::vector<double> levels;
  for (const auto& e : edges) levels.push_back(e.weight);
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  // Partition keeping only edges strictly lighter than `cut`; +inf keeps all.
  auto partition = [&](double cut) {
    detail::DisjointSets ds(n);
    for (const auto& e : edges)
      if (e.weight < cut) ds.unite(e.a, e.b);
    return ds;
  };
  auto valid_count = [&](detail::DisjointSets& ds) {
    std::size_t count = 0;
    for (std::size_t v = 0; v < n; ++v)
      if (ds.find(v) == v && ds.size_of(v) >= min_cluster_size) ++count;
    return count;
  };

  double best_cut = std::numeric_limits<double>::infinity();
  {
    auto ds = partition(best_cut);
    std::size_t best_count = valid_count(ds);
    for (double level : levels) {
      auto next = partition(level);
      const std::size_t count = valid_count(next);
      if (count == 0) break;
      if (count > best_count) {
        best_count = count;
        best_cut = level;
      }
    }
  }

  auto ds = partition(best_cut);
  std::vector<std::uint32_t> root_id(n, kNoise);
  std::uint32_t next_id = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t r = ds.find(v);
    if (ds.size_of(r) < min_cluster_size) continue;
    if (root_id[r] == kNoise) root_id[r] = next_id++;
    out[v] = root_id[r];
  }
  return out;
}

inline ClusterAssignment density_cluster_per_class(const EmbeddingSet& set, std::uint32_t min_cluster_size,
                                                   unsigned jobs = 1) {
  if (set.empty()) throw ValidationError("cannot cluster an empty set");
  if (min_cluster_size == 0) throw ValidationError("min_cluster_size must be at least 1");
  const auto members = set.members_by_class();
  std::vector<std::vector<std::uint32_t>> local(members.size());
  parallel_for(members.size(), jobs, [&](std::size_t label) {
    const auto& pos = members[label];
    if (pos.empty()) return;
    std::vector<std::vector<double>> unit;
    unit.reserve(pos.size());
    for (auto p : pos) unit.push_back(unit_vector(set[p].vector));
    const auto core = core_distances(unit, min_cluster_size);
    const auto mst = mutual_reachability_mst(unit, core);
    local[label] = extract_density_clusters(pos.size(), mst, min_cluster_size);
  });
  return detail::merge_class_clusters(set.size(), members, local);
}

// ---------------------------------------------------------------------------
// Uniform baseline and composed selection
// ---------------------------------------------------------------------------

/// ceil(fraction * n) records uniformly without replacement, per class when
/// balanced. Entries keep input order.
inline Subset select_uniform(const EmbeddingSet& set, double fraction, bool balanced, std::uint64_t seed) {
  if (set.empty()) throw ValidationError("cannot select from an empty set");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("fraction must be in (0, 1]");
  Rng rng(seed);
  std::vector<std::size_t> picks;
  if (balanced) {
    for (const auto& members : set.members_by_class())
      for (auto i : sample_without_replacement(members.size(), budget_count(fraction, members.size()), rng))
        picks.push_back(members[i]);
  } else {
    picks = sample_without_replacement(set.size(), budget_count(fraction, set.size()), rng);
  }
  std::sort(picks.begin(), picks.end());
  return subset_of_records(set, picks, balanced ? "uniform-balanced" : "uniform",
                           {{"fraction", fraction}, {"balanced", balanced}}, seed);
}

enum class ClusterMethod { kmeans, density };
enum class Representative { centroid, medoid };

inline std::string_view to_string(ClusterMethod m) { return m == ClusterMethod::kmeans ? "kmeans" : "density"; }
inline std::string_view to_string(Representative r) { return r == Representative::centroid ? "centroid" : "medoid"; }

struct ClusterParams {
  /// k-means: fixed clusters per class; used when k_fraction is 0.
  std::uint32_t k_per_class = 20;
  /// k-means: when positive, class c gets ceil(k_fraction * n_c) clusters.
  double k_fraction = 0.0;
  std::uint32_t max_iters = 100;
  std::uint64_t seed = 0;
  std::uint32_t min_cluster_size = 3;
  unsigned jobs = 1;
};

inline nlohmann::ordered_json to_json(ClusterMethod method, Representative rep, const ClusterParams& p) {
  nlohmann::ordered_json j;
  j["cluster_method"] = to_string(method);
  j["representative"] = to_string(rep);
  if (method == ClusterMethod::kmeans) {
    if (p.k_fraction > 0.0)
      j["k_fraction"] = p.k_fraction;
    else
      j["k_per_class"] = p.k_per_class;
    j["max_iters"] = p.max_iters;
    j["seed"] = p.seed;
  } else {
    j["min_cluster_size"] = p.min_cluster_size;
  }
  return j;
}

inline ClusterAssignment cluster_per_class(const EmbeddingSet& features, ClusterMethod method, const ClusterParams& p) {
  if (method == ClusterMethod::density) return density_cluster_per_class(features, p.min_cluster_size, p.jobs);
  if (p.k_fraction > 0.0) {
    const double f = p.k_fraction;
    return kmeans_per_class(features, [f](std::size_t n) { return std::max<std::size_t>(1, budget_count(f, n)); },
                            p.max_iters, p.seed, p.jobs);
  }
  return kmeans_per_class(features, p.k_per_class, p.max_iters, p.seed, p.jobs);
}

/// Clusters `features` (same records, possibly another space) and takes
/// representatives from `set`.
inline Subset select_clustered(const EmbeddingSet& set, const EmbeddingSet& features, ClusterMethod method,
                               Representative rep, const ClusterParams& p) {
  if (features.size() != set.size()) throw ValidationError("feature set and record set differ in size");
  const auto assignment = cluster_per_class(features, method, p);
  Subset s = rep == Representative::centroid ? centroids_of(assignment, set) : medoids_of(assignment, set);
  s.method = std::string(to_string(method)) + "-" + std::string(to_string(rep));
  s.params = to_json(method, rep, p);
  if (method == ClusterMethod::kmeans) s.seed = p.seed;
  return s;
}

inline Subset select_clustered(const EmbeddingSet& set, ClusterMethod method, Representative rep,
                               const ClusterParams& p) {
  return select_clustered(set, set, method, rep, p);
}

}  // namespace repsel
