#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mncastle/castle.hpp"
#include "mncastle/metrics.hpp"
#include "mncastle/mndag.hpp"
#include "mncastle_cli/bundle.hpp"

namespace mncastle::cli {

/// A generated MN-DAG, its series and ground-truth spectrum.
struct Dataset {
  mndag::MnDag dag;
  Tensor values;    // N x T
  Tensor spectrum;  // J x T x N x N
};

/// Draws the graph from Rng(config.seed, "generate").split("dag") and the
/// series from the "data" split using the named wavelet family.
Dataset make_dataset(const mndag::GenConfig& config, const std::string& wavelet);

struct BenchPlan {
  std::vector<std::pair<double, double>> cells;  // (tau, mu)
  int seeds = 20;
  std::size_t nodes = 5;
  std::size_t samples = 100;
  double delta = 0.5;
  std::string kernel = "rbf(0.1,1/tau)";
  std::string wavelet = "haar";
  std::uint64_t seed = 0;
  castle::InferConfig infer;
  double baseline_density = 0.5;
  /// PL draws per seed for the ordering metrics.
  std::size_t ordering_draws = 100;
  std::size_t ndcg_k = 5;

  /// The full grid {0, 0.5, 0.9} x {0, 0.5, 0.9}.
  static std::vector<std::pair<double, double>> default_cells();
  /// Generation settings of one (cell, seed) job.
  mndag::GenConfig dataset_config(double tau, double mu, int seed) const;
};

/// Parses "tau,mu;tau,mu;...".
std::vector<std::pair<double, double>> parse_cells(const std::string& text);

struct BenchRow {
  double tau = 0.0;
  double mu = 0.0;
  int seed = 0;
  std::uint64_t dataset_seed = 0;
  std::string model;
  /// "ok" or "failed: <reason>".
  std::string status = "ok";
  int scales = 0;
  metrics::AdjacencyScores adjacency;
  std::optional<double> kendall;
  std::optional<double> spearman;
  std::optional<double> ndcg;
  std::optional<double> tau_hat;
};

struct JobResult {
  std::vector<BenchRow> rows;
  /// Per-draw nDCG@k of PL(theta-hat) and of uniform-score orderings.
  std::vector<double> model_ndcg;
  std::vector<double> baseline_ndcg;
  /// Step-2 ELBO trace of the MN-CASTLE run.
  std::vector<double> elbo2;
};

/// Runs MN-CASTLE and the random-edge baseline on one (cell, seed) dataset.
/// Failures are reported through the rows' status, never thrown.
JobResult run_job(const BenchPlan& plan, double tau, double mu, int seed);

/// Predictions from another method: per-scale directed edge lists.
struct ImportedPrediction {
  std::string model;
  double tau = 0.0;
  double mu = 0.0;
  int seed = 0;
  /// edges[j] holds (from, to) pairs at scale j.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> edges;
  std::optional<std::vector<std::size_t>> ordering;
};

/// {"model": name, "predictions": [{"tau", "mu", "seed", "edges": [[[from, to], ...], ...],
///   "ordering": [...]?}, ...]}
std::vector<ImportedPrediction> parse_imports(const Json& doc);

BenchRow score_import(const BenchPlan& plan, const ImportedPrediction& pred);

struct BenchOutcome {
  std::vector<BenchRow> rows;
  std::vector<JobResult> jobs;
};

/// Runs every (cell, seed) job on a pool of `jobs` workers. Rows are sorted
/// by cell, seed and model so the output does not depend on scheduling.
BenchOutcome run_bench(const BenchPlan& plan, int jobs, const std::vector<ImportedPrediction>& imports = {},
                       bool progress = false);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace mncastle::cli
