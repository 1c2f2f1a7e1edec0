// repsel: command-line front end for building, filtering, selecting and
// evaluating representative embedding databases.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "repsel/repsel.hpp"

namespace fs = std::filesystem;
using namespace repsel;

namespace {

bool g_verbose = false;

void log(const std::string& msg) {
  if (g_verbose) std::cerr << "[repsel] " << msg << '\n';
}

/// Validation failure attributed to a specific flag.
class FlagError : public ValidationError {
 public:
  FlagError(const std::string& flag, const std::string& what) : ValidationError(flag + ": " + what) {}
};

EmbeddingSet load_any(const std::string& path) {
  if (path.ends_with(".csv")) return load_embeddings_csv(path);
  return load_embeddings(path);
}

void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

std::string class_summary(const EmbeddingSet& set) {
  return std::to_string(set.size()) + " records, " + std::to_string(set.populated_class_count()) + " classes";
}

struct Common {
  std::string in;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_seed) {
  cmd->add_option("--in", c.in, "Input file")->required();
  cmd->add_option("--out", c.out, "Output file")->required();
  if (with_seed) cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

std::uint64_t require_seed(const Common& c, const std::string& why) {
  if (!c.seed) throw FlagError("--seed", "required " + why);
  return *c.seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"repsel: representative selection for labeled embedding databases"};
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", g_verbose, "Log progress to stderr");

  // ingest / export -------------------------------------------------------
  Common ingest_args;
  auto* ingest = app.add_subcommand("ingest", "Convert a CSV fixture to the binary format");
  ingest->add_option("--in", ingest_args.in, "CSV input (id,label_name,split,v0..)")->required();
  ingest->add_option("--out", ingest_args.out, "EMB1 output")->required();

  Common export_args;
  auto* exporter = app.add_subcommand("export", "Convert a binary set to CSV");
  exporter->add_option("--in", export_args.in, "EMB1 input")->required();
  exporter->add_option("--out", export_args.out, "CSV output")->required();

  // synth / split ---------------------------------------------------------
  SyntheticConfig synth_cfg;
  std::string synth_out, synth_noise_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-view labeled set");
  synth->add_option("--classes", synth_cfg.class_count, "Class count")->check(CLI::PositiveNumber);
  synth->add_option("--views", synth_cfg.views_per_class, "Views per class")->check(CLI::PositiveNumber);
  synth->add_option("--points", synth_cfg.points_per_view, "Points per view")->check(CLI::PositiveNumber);
  synth->add_option("--dim", synth_cfg.dimension, "Dimension")->check(CLI::PositiveNumber);
  synth->add_option("--view-spread", synth_cfg.view_spread, "Within-view standard deviation");
  synth->add_option("--class-spread", synth_cfg.class_spread, "Between-view spread");
  synth->add_option("--noise", synth_cfg.noise_fraction, "Fraction of relocated (label-noise) records")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--seed", synth_seed, "Random seed")->required();
  synth->add_option("--out", synth_out, "EMB1 output")->required();
  synth->add_option("--noise-out", synth_noise_out, "Noise id sidecar (default: <out>.noise.txt)");

  std::string split_in, split_train, split_test;
  double split_fraction = 0.0;
  std::uint64_t split_seed = 0;
  auto* split = app.add_subcommand("split", "Per-class random train/test split");
  split->add_option("--in", split_in, "Input set")->required();
  split->add_option("--test-fraction", split_fraction, "Per-class test fraction in (0,1)")->required();
  split->add_option("--seed", split_seed, "Random seed")->required();
  split->add_option("--out-train", split_train, "Train output")->required();
  split->add_option("--out-test", split_test, "Test output")->required();

  // score / filter ----------------------------------------------------------
  Common score_args;
  std::uint32_t score_neighbors = 10, score_components = 0;
  auto* score = app.add_subcommand("score", "Neighbor label-homogeneity score per record (CSV id,score)");
  add_common(score, score_args, false);
  score->add_option("--neighbors", score_neighbors, "Neighbor count N")->required()->check(CLI::PositiveNumber);
  score->add_option("--components", score_components, "Score in a PCA space of this many components (0 = off)");

  Common filter_args;
  FilterParams filter_params;
  std::string filter_scores;
  std::uint32_t filter_components = 0;
  auto* filter = app.add_subcommand("filter", "Drop records whose homogeneity score is below a threshold");
  add_common(filter, filter_args, false);
  filter->add_option("--neighbors", filter_params.n_neighbors, "Neighbor count N")->required()->check(CLI::PositiveNumber);
  filter->add_option("--threshold", filter_params.threshold, "Keep scores >= threshold")->required()->check(CLI::Range(0.0, 1.0));
  filter->add_option("--min-keep", filter_params.min_keep_per_class, "Per-class survivor floor");
  filter->add_option("--scores", filter_scores, "Reuse a score CSV instead of recomputing");
  filter->add_option("--components", filter_components, "Score in a PCA space (0 = off)");

  // select ---------------------------------------------------------------------
  Common select_args;
  SelectionSpec sel;
  std::optional<std::string> select_rep;
  bool select_global = false;
  auto* select = app.add_subcommand("select", "Select representatives; writes a subset file and <out>.json provenance");
  add_common(select, select_args, true);
  select->add_option("--method", sel.method, "uniform|kmeans|density|kcenter|herding|ue-low|ue-high, optional cs- prefix")
      ->required();
  select->add_option("--representative", select_rep, "centroid|medoid for clustering methods");
  select->add_option("--fraction", sel.fraction, "Budget fraction in (0,1]");
  select->add_flag("--global", select_global, "Budget over the whole set instead of per class");
  select->add_option("--k", sel.k_per_class, "k-means clusters per class (overrides --fraction)");
  select->add_option("--max-iters", sel.max_iters, "k-means iteration cap")->check(CLI::PositiveNumber);
  select->add_option("--min-cluster", sel.min_cluster_size, "Density clustering minimum cluster size")
      ->check(CLI::PositiveNumber);
  select->add_option("--neighbors", sel.filter.n_neighbors, "Homogeneity neighbor count (cs- methods)");
  select->add_option("--threshold", sel.filter.threshold, "Homogeneity threshold (cs- methods)")->check(CLI::Range(0.0, 1.0));
  select->add_option("--min-keep", sel.filter.min_keep_per_class, "Per-class survivor floor (cs- methods)");
  select->add_option("--components", sel.components, "PCA components for scoring/clustering (0 = off)");
  select->add_option("--probe-epochs", sel.probe.epochs, "Probe epochs (ue- methods)");
  select->add_option("--probe-lr", sel.probe.learning_rate, "Probe learning rate (ue- methods)");

  // eval --------------------------------------------------------------------------
  Common eval_args;
  std::string eval_test, eval_csv;
  std::vector<std::size_t> eval_ks{1, 5, 20};
  auto* eval = app.add_subcommand("eval", "Top-k hit rates of a database against a test set (JSON report)");
  add_common(eval, eval_args, false);
  eval->add_option("--test", eval_test, "Test set")->required();
  eval->add_option("--ks", eval_ks, "k values")->delimiter(',');
  eval->add_option("--csv", eval_csv, "Also write a one-row CSV");

  // sweep ---------------------------------------------------------------------------
  std::string sweep_config, sweep_out;
  std::optional<unsigned> sweep_jobs;
  auto* sweep = app.add_subcommand("sweep", "Run a configured grid of selection methods");
  sweep->add_option("--config", sweep_config, "Sweep config file")->required();
  sweep->add_option("--out", sweep_out, "Output directory (overrides the config's out)");
  sweep->add_option("--jobs", sweep_jobs, "Concurrent cells")->check(CLI::PositiveNumber);

  // bench ---------------------------------------------------------------------------
  Common bench_args;
  std::vector<std::size_t> bench_sizes;
  std::size_t bench_queries = 64;
  std::uint32_t bench_reps = 5;
  auto* bench = app.add_subcommand("bench", "Query latency against index size (CSV)");
  add_common(bench, bench_args, true);
  bench->add_option("--sizes", bench_sizes, "Index sizes (default: powers of two from 1024)")->delimiter(',');
  bench->add_option("--queries", bench_queries, "Queries per batch")->check(CLI::PositiveNumber);
  bench->add_option("--reps", bench_reps, "Timed repetitions")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      const auto set = load_embeddings_csv(ingest_args.in);
      ensure_parent(ingest_args.out);
      save_embeddings(set, ingest_args.out);
      std::cout << class_summary(set) << '\n';
    } else if (*exporter) {
      const auto set = load_embeddings(export_args.in);
      ensure_parent(export_args.out);
      detail::write_file(export_args.out, to_csv(set));
      std::cout << class_summary(set) << '\n';
    } else if (*synth) {
      synth_cfg.seed = *synth_seed;
      const auto data = generate_synthetic(synth_cfg);
      ensure_parent(synth_out);
      save_embeddings(data.set, synth_out);
      save_noise_sidecar(data.noise_ids, synth_noise_out.empty() ? synth_out + ".noise.txt" : synth_noise_out);
      std::cout << class_summary(data.set) << ", " << data.noise_ids.size() << " noise\n";
    } else if (*split) {
      if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw FlagError("--test-fraction", "must be in (0, 1)");
      const auto tt = split_per_class(load_any(split_in), split_fraction, split_seed);
      ensure_parent(split_train);
      ensure_parent(split_test);
      save_embeddings(tt.train, split_train);
      save_embeddings(tt.test, split_test);
      std::cout << "train: " << class_summary(tt.train) << "; test: " << class_summary(tt.test) << '\n';
    } else if (*score) {
      const auto set = load_any(score_args.in);
      const auto space = score_components > 0 ? transform(fit_projection(set, score_components), set) : set;
      log("scoring " + class_summary(set));
      const auto table = homogeneity_scores(space, score_neighbors, score_args.jobs);
      ensure_parent(score_args.out);
      save_scores_csv(table, score_args.out);
      std::cout << table.size() << " scores\n";
    } else if (*filter) {
      const auto set = load_any(filter_args.in);
      const auto space = filter_components > 0 ? transform(fit_projection(set, filter_components), set) : set;
      const auto table = filter_scores.empty() ? homogeneity_scores(space, filter_params.n_neighbors, filter_args.jobs)
                                               : load_scores_csv(filter_scores, filter_params.n_neighbors);
      const auto kept = filter_by_threshold(set, table, filter_params);
      ensure_parent(filter_args.out);
      save_embeddings(kept, filter_args.out);
      std::cout << "kept " << class_summary(kept) << " of " << set.size() << '\n';
    } else if (*select) {
      MethodName method;
      try {
        method = parse_method(sel.method);
      } catch (const ValidationError& e) {
        throw FlagError("--method", e.what());
      }
      if (select_rep) {
        if (!method.clusters()) throw FlagError("--representative", "only applies to kmeans and density methods");
        if (*select_rep != "centroid" && *select_rep != "medoid") throw FlagError("--representative", "must be centroid or medoid");
        sel.method = std::string(method.filtered ? "cs-" : "") +
                     (method.base == BaseMethod::kmeans ? "kmeans-" : "density-") + *select_rep;
      }
      if (!(sel.fraction > 0.0 && sel.fraction <= 1.0)) throw FlagError("--fraction", "must be in (0, 1]");
      if (method.stochastic()) sel.seed = require_seed(select_args, "for method " + sel.method);
      sel.balanced = !select_global;
      sel.jobs = select_args.jobs;
      const auto set = load_any(select_args.in);
      log("selecting from " + class_summary(set) + " with " + sel.method);
      const auto subset = run_selection(set, sel);
      ensure_parent(select_args.out);
      save_subset(subset, select_args.out);
      std::cout << subset.size() << " representatives (" << sel.method << ")\n";
    } else if (*eval) {
      const auto db = load_any(eval_args.in);
      const auto test = load_any(eval_test);
      auto report = evaluate_topk(build_index(db), test, eval_ks, eval_args.jobs);
      report.config = {{"database", eval_args.in},
                       {"test", eval_test},
                       {"database_digest", hex64(digest(db))},
                       {"test_digest", hex64(digest(test))}};
      ensure_parent(eval_args.out);
      detail::write_file(eval_args.out, to_json(report).dump(2) + "\n");
      if (!eval_csv.empty()) {
        std::string csv = "db_size";
        std::string row = std::to_string(report.db_size);
        for (const auto& [name, v] : report.metrics) {
          csv += "," + name;
          row += "," + std::to_string(v);
        }
        detail::write_file(eval_csv, csv + ",mean_query_micros\n" + row + "," + std::to_string(report.mean_query_micros) + "\n");
      }
      for (const auto& [name, v] : report.metrics) std::cout << name << " " << v << '\n';
    } else if (*sweep) {
      auto cfg = load_pipeline_config(sweep_config);
      if (!sweep_out.empty()) cfg.out_dir = sweep_out;
      if (cfg.out_dir.empty()) throw FlagError("--out", "no output directory given (flag or config key 'out')");
      if (sweep_jobs) cfg.sweep.jobs = *sweep_jobs;
      EmbeddingSet train, test;
      if (!cfg.input.empty()) {
        auto tt = split_per_class(load_any(cfg.input), cfg.test_fraction, cfg.split_seed);
        train = std::move(tt.train);
        test = std::move(tt.test);
      } else {
        train = load_any(cfg.train);
        test = load_any(cfg.test);
      }
      log("sweeping " + std::to_string(expand_cells(cfg.sweep).size()) + " cells");
      const auto result = run_sweep(cfg.sweep, train, test);
      fs::create_directories(cfg.out_dir);
      const auto dir = fs::path(cfg.out_dir);
      detail::write_file((dir / "sweep.csv").string(), sweep_to_csv(result.cells));
      detail::write_file((dir / "sweep.json").string(), sweep_to_json(result).dump(2) + "\n");
      std::cout << result.cells.size() << " cells\n";
      for (const auto& [m, r] : result.best)
        std::cout << "best " << m << ": top1 " << r.metrics.begin()->second << " (db " << r.db_size << ")\n";
    } else if (*bench) {
      const auto seed = require_seed(bench_args, "to sample the query batch");
      const auto set = load_any(bench_args.in);
      if (bench_sizes.empty())
        for (std::size_t s = 1024; s <= set.size(); s *= 2) bench_sizes.push_back(s);
      if (bench_sizes.empty()) throw FlagError("--sizes", "set is smaller than the default minimum size 1024");
      Rng rng(seed);
      auto picks = sample_without_replacement(set.size(), bench_queries, rng);
      const auto batch = set.select(picks);
      const auto curve = timing_curve(set, bench_sizes, batch, bench_reps);
      std::string csv = "size,mean_query_micros,stddev,median\n";
      std::vector<double> xs, ys;
      char buf[128];
      for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", p.size, p.mean_query_micros, p.stddev, p.median);
        csv += buf;
        xs.push_back(static_cast<double>(p.size));
        ys.push_back(p.mean_query_micros);
      }
      ensure_parent(bench_args.out);
      detail::write_file(bench_args.out, csv);
      if (xs.size() >= 2) {
        const auto fit = fit_line(xs, ys);
        std::cout << "slope " << fit.slope << " us/entry, R^2 " << fit.r_squared << '\n';
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
