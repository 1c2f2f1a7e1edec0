#pragma once

// Retrieval evaluation: top-k hit rates, latency curves and parameter sweeps
// over selection methods.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"
#include "repsel/index.hpp"
#include "repsel/pipeline.hpp"
#include "repsel/subset.hpp"

namespace repsel {

using Json = nlohmann::ordered_json;

struct EvalReport {
  Json config = Json::object();
  /// "top1", "top5", ... -> hit rate in [0, 1].
  std::map<std::string, double> metrics;
  std::size_t db_size = 0;
  double mean_query_micros = 0.0;
  /// Label name -> top-1 accuracy over that class's test records.
  std::map<std::string, double> per_class_top1;

  double metric(std::size_t k) const {
    auto it = metrics.find("top" + std::to_string(k));
    if (it == metrics.end()) throw ValidationError("report has no top" + std::to_string(k) + " metric");
    return it->second;
  }
};

inline Json to_json(const EvalReport& r) {
  Json j;
  j["config"] = r.config;
  j["metrics"] = Json(r.metrics);
  j["db_size"] = r.db_size;
  j["mean_query_micros"] = r.mean_query_micros;
  j["per_class_top1"] = Json(r.per_class_top1);
  return j;
}

/// For each k: fraction of test records with at least one same-label entry
/// among their top-k neighbors. Also per-class top-1 accuracy.
inline EvalReport evaluate_topk(const VectorIndex& index, const EmbeddingSet& test, std::vector<std::size_t> ks,
                                unsigned jobs = 1) {
  if (index.empty()) throw ValidationError("cannot evaluate against an empty index");
  if (test.empty()) throw ValidationError("cannot evaluate an empty test set");
  if (test.dimension() != index.dimension())
    throw ValidationError("test dimension " + std::to_string(test.dimension()) + " != index dimension " +
                          std::to_string(index.dimension()));
  if (ks.empty()) ks = {1};
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() == 0) throw ValidationError("k must be positive");
  const std::size_t kmax = ks.back();

  // first_hit[i]: 1-based rank of the first same-label neighbor, 0 if none.
  std::vector<std::size_t> first_hit(test.size(), 0);
  std::vector<std::uint32_t> top1_label(test.size(), 0);
  const auto t0 = std::chrono::steady_clock::now();
  parallel_for(test.size(), jobs, [&](std::size_t i) {
    const auto result = index.query_topk(test[i].vector, kmax);
    top1_label[i] = result[0].label;
    for (std::size_t r = 0; r < result.size(); ++r) {
      if (result[r].label == test[i].label) {
        first_hit[i] = r + 1;
        break;
      }
    }
  });
  const auto elapsed = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();

  EvalReport report;
  report.db_size = index.size();
  report.mean_query_micros = elapsed / static_cast<double>(test.size());
  for (auto k : ks) {
    std::size_t hits = 0;
    for (auto h : first_hit) hits += (h != 0 && h <= k) ? 1 : 0;
    report.metrics["top" + std::to_string(k)] = static_cast<double>(hits) / static_cast<double>(test.size());
  }
  std::vector<std::size_t> class_total(test.class_count(), 0), class_hits(test.class_count(), 0);
  for (std::size_t i = 0; i < test.size(); ++i) {
    ++class_total[test[i].label];
    class_hits[test[i].label] += top1_label[i] == test[i].label ? 1 : 0;
  }
  for (std::size_t c = 0; c < class_total.size(); ++c)
    if (class_total[c] > 0)
      report.per_class_top1[test.vocabulary()[c]] =
          static_cast<double>(class_hits[c]) / static_cast<double>(class_total[c]);
  return report;
}

// ---------------------------------------------------------------------------
// Latency
// ---------------------------------------------------------------------------

struct TimingPoint {
  std::size_t size = 0;
  double mean_query_micros = 0.0;
  double stddev = 0.0;
  double median = 0.0;
};

/// For each size, indexes the first `size` records of `set` and times top-1
/// queries for the whole batch `repetitions` times after one warm-up pass.
inline std::vector<TimingPoint> timing_curve(const EmbeddingSet& set, const std::vector<std::size_t>& sizes,
                                             const EmbeddingSet& query_batch, std::uint32_t repetitions) {
  if (query_batch.empty()) throw ValidationError("query batch is empty");
  if (repetitions == 0) throw ValidationError("repetitions must be positive");
  std::vector<TimingPoint> out;
  for (auto size : sizes) {
    if (size == 0) throw ValidationError("index size must be positive");
    if (size > set.size())
      throw ValidationError("size " + std::to_string(size) + " exceeds set of " + std::to_string(set.size()));
    VectorIndex index(set.dimension());
    for (std::size_t i = 0; i < size; ++i) index.add(set[i].id, set[i].label, set[i].vector);

    std::size_t sink = 0;
    auto run_batch = [&] {
      for (const auto& q : query_batch.records()) sink += index.query_topk(q.vector, 1)[0].label;
    };
    run_batch();
    std::vector<double> samples;
    for (std::uint32_t r = 0; r < repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      run_batch();
      const auto us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count();
      samples.push_back(us / static_cast<double>(query_batch.size()));
    }
    static volatile std::size_t keep_alive;
    keep_alive = sink;

    TimingPoint tp;
    tp.size = size;
    tp.mean_query_micros = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - tp.mean_query_micros) * (s - tp.mean_query_micros);
    tp.stddev = samples.size() > 1 ? std::sqrt(var / static_cast<double>(samples.size() - 1)) : 0.0;
    std::sort(samples.begin(), samples.end());
    const std::size_t mid = samples.size() / 2;
    tp.median = samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
    out.push_back(tp);
  }
  return out;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares y = slope * x + intercept.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("line fit needs two or more paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("line fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepSpec {
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::string> methods{"uniform"};
  /// Only used by "cs-" methods.
  std::vector<std::uint32_t> cscore_neighbors{10};
  std::vector<double> thresholds{0.5};
  /// PCA components for scoring/clustering; 0 means no reduction.
  std::vector<std::uint32_t> components{0};
  /// Explicit seeds; when empty, seeds base_seed .. base_seed+repetitions-1.
  std::vector<std::uint64_t> seeds;
  std::uint32_t repetitions = 1;
  std::uint64_t base_seed = 0;
  std::vector<std::size_t> ks{1, 5, 20};
  bool balanced = true;
  std::uint32_t min_keep_per_class = 1;
  std::uint32_t min_cluster_size = 3;
  std::uint32_t max_iters = 100;
  ProbeParams probe;
  unsigned jobs = 1;

  std::vector<std::uint64_t> effective_seeds() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out;
    for (std::uint32_t r = 0; r < repetitions; ++r) out.push_back(base_seed + r);
    return out;
  }

  void validate() const {
    if (fractions.empty() || methods.empty()) throw ValidationError("sweep needs at least one fraction and one method");
    for (double f : fractions)
      if (!(f > 0.0 && f <= 1.0)) throw ValidationError("sweep fractions must be in (0, 1]");
    for (double h : thresholds)
      if (!(h >= 0.0 && h <= 1.0)) throw ValidationError("sweep thresholds must be in [0, 1]");
    for (auto n : cscore_neighbors)
      if (n == 0) throw ValidationError("sweep neighbor counts must be positive");
    for (const auto& m : methods) parse_method(m);
    if (seeds.empty() && repetitions == 0) throw ValidationError("repetitions must be positive");
    if (ks.empty()) throw ValidationError("sweep needs at least one k");
  }
};

inline Json to_json(const SelectionSpec& s) {
  Json j;
  j["method"] = s.method;
  j["fraction"] = s.fraction;
  j["balanced"] = s.balanced;
  j["seed"] = s.seed;
  j["n_neighbors"] = s.filter.n_neighbors;
  j["threshold"] = s.filter.threshold;
  j["min_keep_per_class"] = s.filter.min_keep_per_class;
  j["components"] = s.components;
  j["k_per_class"] = s.k_per_class;
  j["max_iters"] = s.max_iters;
  j["min_cluster_size"] = s.min_cluster_size;
  j["probe_epochs"] = s.probe.epochs;
  j["probe_learning_rate"] = s.probe.learning_rate;
  j["probe_weight_decay"] = s.probe.weight_decay;
  j["probe_batch_size"] = s.probe.batch_size;
  return j;
}

inline SelectionSpec selection_spec_from_json(const Json& j) {
  SelectionSpec s;
  s.method = j.at("method").get<std::string>();
  s.fraction = j.at("fraction").get<double>();
  s.balanced = j.at("balanced").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.filter.n_neighbors = j.at("n_neighbors").get<std::uint32_t>();
  s.filter.threshold = j.at("threshold").get<double>();
  s.filter.min_keep_per_class = j.at("min_keep_per_class").get<std::uint32_t>();
  s.components = j.at("components").get<std::uint32_t>();
  s.k_per_class = j.at("k_per_class").get<std::uint32_t>();
  s.max_iters = j.at("max_iters").get<std::uint32_t>();
  s.min_cluster_size = j.at("min_cluster_size").get<std::uint32_t>();
  s.probe.epochs = j.at("probe_epochs").get<std::uint32_t>();
  s.probe.learning_rate = j.at("probe_learning_rate").get<double>();
  s.probe.weight_decay = j.at("probe_weight_decay").get<double>();
  s.probe.batch_size = j.at("probe_batch_size").get<std::uint32_t>();
  return s;
}

/// Expands the sweep grid. Neighbor/threshold axes apply to "cs-" methods
/// only and the components axis to filtered or clustering methods; other
/// methods get a single cell for those axes (recorded as 0).
inline std::vector<SelectionSpec> expand_cells(const SweepSpec& spec) {
  spec.validate();
  std::vector<SelectionSpec> cells;
  for (const auto& method : spec.methods) {
    const auto m = parse_method(method);
    const std::vector<std::uint32_t> ns = m.filtered ? spec.cscore_neighbors : std::vector<std::uint32_t>{0};
    const std::vector<double> hs = m.filtered ? spec.thresholds : std::vector<double>{0.0};
    const std::vector<std::uint32_t> cs =
        (m.filtered || m.clusters()) ? spec.components : std::vector<std::uint32_t>{0};
    for (double fraction : spec.fractions)
      for (auto n : ns)
        for (double h : hs)
          for (auto c : cs)
            for (auto seed : spec.effective_seeds()) {
              SelectionSpec s;
              s.method = method;
              s.fraction = fraction;
              s.balanced = spec.balanced;
              s.seed = seed;
              s.filter = {n, h, spec.min_keep_per_class};
              s.components = c;
              s.max_iters = spec.max_iters;
              s.min_cluster_size = spec.min_cluster_size;
              s.probe = spec.probe;
              cells.push_back(s);
            }
  }
  return cells;
}

/// Selection, indexing and evaluation of one cell.
inline EvalReport run_cell(const SelectionSpec& cell, const EmbeddingSet& train, const EmbeddingSet& test,
                           const std::vector<std::size_t>& ks) {
  const Subset subset = run_selection(train, cell);
  const VectorIndex index = build_index(subset);
  EvalReport r = evaluate_topk(index, test, ks);
  r.config = to_json(cell);
  r.config["train_digest"] = hex64(digest(train));
  r.config["test_digest"] = hex64(digest(test));
  r.config["train_size"] = train.size();
  return r;
}

struct SweepResult {
  /// One report per (cell, seed), in grid order.
  std::vector<EvalReport> cells;
  /// Seed-averaged reports, one per grid point without the seed axis.
  std::vector<EvalReport> summary;
  /// Method -> best summary row by mean top-1.
  std::map<std::string, EvalReport> best;
};

inline SweepResult run_sweep(const SweepSpec& spec, const EmbeddingSet& train, const EmbeddingSet& test) {
  if (train.empty() || test.empty()) throw ValidationError("sweep needs non-empty train and test sets");
  const auto cells = expand_cells(spec);
  SweepResult out;
  out.cells.resize(cells.size());
  parallel_for(cells.size(), spec.jobs, [&](std::size_t i) { out.cells[i] = run_cell(cells[i], train, test, spec.ks); });

  // Cells of one grid point are consecutive (seed is the innermost axis).
  const std::size_t per_point = spec.effective_seeds().size();
  for (std::size_t start = 0; start < out.cells.size(); start += per_point) {
    EvalReport avg;
    avg.config = out.cells[start].config;
    avg.config.erase("seed");
    avg.config["seeds"] = Json::array();
    Json per_seed = Json::object();
    double db = 0.0;
    for (std::size_t i = start; i < start + per_point; ++i) {
      const auto& r = out.cells[i];
      avg.config["seeds"].push_back(r.config["seed"]);
      for (const auto& [name, v] : r.metrics) {
        avg.metrics[name] += v / static_cast<double>(per_point);
        per_seed[name].push_back(v);
      }
      for (const auto& [name, v] : r.per_class_top1) avg.per_class_top1[name] += v / static_cast<double>(per_point);
      db += static_cast<double>(r.db_size) / static_cast<double>(per_point);
      avg.mean_query_micros += r.mean_query_micros / static_cast<double>(per_point);
    }
    avg.config["per_seed"] = per_seed;
    avg.config["mean_db_size"] = db;
    avg.db_size = static_cast<std::size_t>(std::llround(db));
    out.summary.push_back(std::move(avg));
  }
  const std::string key = "top" + std::to_string(*std::min_element(spec.ks.begin(), spec.ks.end()));
  for (const auto& s : out.summary) {
    const auto method = s.config["method"].get<std::string>();
    auto it = out.best.find(method);
    if (it == out.best.end() || s.metrics.at(key) > it->second.metrics.at(key)) out.best[method] = s;
  }
  return out;
}

inline constexpr std::string_view kSweepCsvHeader =
    "method,fraction,n_neighbors,threshold,reducer,components,seed,db_size,top1,top5,top20,mean_query_micros";

/// One row per cell. With `include_timing` false the timing column is left
/// empty so files can be compared byte for byte.
inline std::string sweep_to_csv(const std::vector<EvalReport>& cells, bool include_timing = true) {
  std::string out(kSweepCsvHeader);
  out += '\n';
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  auto metric = [&](const EvalReport& r, const char* name) {
    auto it = r.metrics.find(name);
    return it == r.metrics.end() ? std::string() : num(it->second);
  };
  for (const auto& r : cells) {
    const auto& c = r.config;
    const auto comps = c.at("components").get<std::uint32_t>();
    out += c.at("method").get<std::string>() + ',' + num(c.at("fraction").get<double>()) + ',' +
           std::to_string(c.at("n_neighbors").get<std::uint32_t>()) + ',' + num(c.at("threshold").get<double>()) +
           ',' + (comps > 0 ? "pca" : "none") + ',' + std::to_string(comps) + ',' +
           std::to_string(c.at("seed").get<std::uint64_t>()) + ',' + std::to_string(r.db_size) + ',' +
           metric(r, "top1") + ',' + metric(r, "top5") + ',' + metric(r, "top20") + ',' +
           (include_timing ? num(r.mean_query_micros) : std::string()) + '\n';
  }
  return out;
}

inline Json sweep_to_json(const SweepResult& result) {
  Json j;
  j["cells"] = Json::array();
  for (const auto& r : result.cells) j["cells"].push_back(to_json(r));
  j["summary"] = Json::array();
  for (const auto& r : result.summary) j["summary"].push_back(to_json(r));
  j["best"] = Json::object();
  for (const auto& [m, r] : result.best) j["best"][m] = to_json(r);
  return j;
}

}  // namespace repsel
