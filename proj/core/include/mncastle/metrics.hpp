#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mncastle/plackett_luce.hpp"
#include "mncastle/rng.hpp"
#include "mncastle/tensor.hpp"

namespace mncastle::metrics {

using stochastic::CausalOrdering;

enum class EdgeKind { Directed, Undirected };

/// A predicted edge at one scale. Directed edges point from -> to;
/// undirected edges ignore the order of the two endpoints.
struct Edge {
  std::size_t scale = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  EdgeKind kind = EdgeKind::Directed;
};

struct PredictedGraph {
  std::size_t scales = 0;
  std::size_t nodes = 0;
  std::vector<Edge> edges;
};

/// Raw tallies and rates for one scale or the aggregate. Rates are empty
/// where their denominator is zero.
struct AdjacencyScores {
  std::size_t positives = 0;  // P
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t directed = 0;    // D
  std::size_t undirected = 0;  // U
  std::size_t shd = 0;

  std::optional<double> tpr() const;
  std::optional<double> fdr() const;
  std::optional<double> f1() const;
  /// SHD / P.
  std::optional<double> shd_normalized() const;
  /// (D + U) / P.
  std::optional<double> nnz_ratio() const;
  /// U / (D + U).
  std::optional<double> fraction_undirected() const;
  bool degenerate() const { return positives == 0; }

  AdjacencyScores& operator+=(const AdjacencyScores& other);
};

struct AdjacencyReport {
  std::vector<AdjacencyScores> per_scale;
  AdjacencyScores aggregate;
};

/// Scores `predicted` against a J x N x N truth adjacency (entry (j, n, m) = 1
/// for m -> n). Scales missing on either side are treated as empty.
AdjacencyReport adjacency_scores(const PredictedGraph& predicted, const Tensor& truth);

/// Predicted graph holding every edge of a truth-style adjacency tensor.
PredictedGraph graph_from_adjacency(const Tensor& adjacency);

double kendall_tau(const CausalOrdering& a, const CausalOrdering& b);
/// 1 - 6 sum_i (rank_a(i) - rank_b(i))^2 / (N (N^2 - 1)).
double spearman(const CausalOrdering& a, const CausalOrdering& b);
/// Min-max scaled nDCG of the first k predicted items; truth scores run N..1.
double ndcg_at_k(const CausalOrdering& predicted, const CausalOrdering& truth, std::size_t k);

struct OrderingReport {
  double kendall = 0.0;
  double spearman = 0.0;
  /// One value per requested k.
  std::vector<double> ndcg;
};

OrderingReport ordering_report(const CausalOrdering& predicted, const CausalOrdering& truth,
                               std::span<const std::size_t> ks);

struct OrderingEvaluation {
  std::vector<OrderingReport> model;
  std::vector<OrderingReport> baseline;
};

/// Scores `draws` orderings from PL(theta_hat) and `draws` orderings from
/// PL(theta_bar) with fresh theta_bar_i ~ U(0, N) per draw.
OrderingEvaluation ordering_eval(std::span<const double> theta_hat, const CausalOrdering& truth, std::size_t draws,
                                 std::span<const std::size_t> ks, Rng& rng);

/// Random-edge baseline: an ordering from PL with U(0, N) scores, then each
/// edge the ordering permits is kept with probability `density` per scale.
PredictedGraph random_graph(std::size_t scales, std::size_t nodes, double density, Rng& rng);

double median(std::vector<double> values);

}  // namespace mncastle::metrics
