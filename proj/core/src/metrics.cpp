#include "mncastle/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mncastle/errors.hpp"

namespace mncastle::metrics {

std::optional<double> AdjacencyScores::tpr() const {
  if (positives == 0) return std::nullopt;
  return static_cast<double>(true_positives) / static_cast<double>(positives);
}

std::optional<double> AdjacencyScores::fdr() const {
  const std::size_t denom = true_positives + false_positives;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(false_positives) / static_cast<double>(denom);
}

std::optional<double> AdjacencyScores::f1() const {
  const auto recall = tpr();
  if (!recall) return std::nullopt;
  const auto rate = fdr();
  if (!rate || true_positives == 0) return 0.0;
  const double precision = 1.0 - *rate;
  return 2.0 * *recall * precision / (*recall + precision);
}

std::optional<double> AdjacencyScores::shd_normalized() const {
  if (positives == 0) return std::nullopt;
  return static_cast<double>(shd) / static_cast<double>(positives);
}

std::optional<double> AdjacencyScores::nnz_ratio() const {
  if (positives == 0) return std::nullopt;
  return static_cast<double>(directed + undirected) / static_cast<double>(positives);
}

std::optional<double> AdjacencyScores::fraction_undirected() const {
  const std::size_t nnz = directed + undirected;
  if (nnz == 0) return std::nullopt;
  return static_cast<double>(undirected) / static_cast<double>(nnz);
}

AdjacencyScores& AdjacencyScores::operator+=(const AdjacencyScores& o) {
  positives += o.positives;
  true_positives += o.true_positives;
  false_positives += o.false_positives;
  directed += o.directed;
  undirected += o.undirected;
  shd += o.shd;
  return *this;
}

namespace {

// Pair state seen from the lower index a of {a, b}.
enum class PairState { None, Forward, Backward, Both, Undirected };

PairState combine(PairState s, PairState add) {
  if (s == PairState::None) return add;
  if (s == add) return s;
  return PairState::Both;
}

}  // namespace

AdjacencyReport adjacency_scores(const PredictedGraph& predicted, const Tensor& truth) {
  if (truth.rank() != 3 || truth.dim(1) != truth.dim(2)) throw ShapeMismatch("truth adjacency must be J x N x N");
  const std::size_t n = truth.dim(1);
  if (predicted.nodes != n) throw ShapeMismatch("predicted and truth graphs disagree on node count");
  const std::size_t scales = std::max(truth.dim(0), predicted.scales);

  // pred[j][a][b] for a < b.
  std::vector<PairState> pred(scales * n * n, PairState::None);
  for (const Edge& e : predicted.edges) {
    if (e.scale >= scales || e.from >= n || e.to >= n || e.from == e.to) {
      throw InvalidArgument("predicted edge out of range");
    }
    const std::size_t a = std::min(e.from, e.to);
    const std::size_t b = std::max(e.from, e.to);
    PairState s = e.kind == EdgeKind::Undirected ? PairState::Undirected
                  : e.from == a                  ? PairState::Forward
                                                 : PairState::Backward;
    auto& slot = pred[(e.scale * n + a) * n + b];
    slot = combine(slot, s);
  }

  AdjacencyReport report;
  report.per_scale.resize(scales);
  for (std::size_t j = 0; j < scales; ++j) {
    AdjacencyScores& sc = report.per_scale[j];
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a + 1; b < n; ++b) {
        // Truth: entry (n, m) = 1 means m -> n.
        const bool fwd = j < truth.dim(0) && truth[(j * n + b) * n + a] != 0.0;  // a -> b
        const bool bwd = j < truth.dim(0) && truth[(j * n + a) * n + b] != 0.0;  // b -> a
        const bool in_skeleton = fwd || bwd;
        sc.positives += (fwd ? 1 : 0) + (bwd ? 1 : 0);
        PairState p = pred[(j * n + a) * n + b];
        if (p == PairState::Both) p = PairState::Undirected;
        if (p == PairState::Forward || p == PairState::Backward) {
          ++sc.directed;
          const bool match = (p == PairState::Forward && fwd) || (p == PairState::Backward && bwd);
          if (match) ++sc.true_positives;
          if (!in_skeleton) ++sc.false_positives;
        } else if (p == PairState::Undirected) {
          ++sc.undirected;
          if (!in_skeleton) ++sc.false_positives;
        }
        // Structural Hamming distance: one edit per mismatching pair.
        const bool pred_none = p == PairState::None;
        if (!in_skeleton) {
          if (!pred_none) ++sc.shd;
        } else if (pred_none) {
          ++sc.shd;
        } else if (fwd && bwd) {
          if (p != PairState::Undirected) ++sc.shd;
        } else {
          const bool same = (fwd && p == PairState::Forward) || (bwd && p == PairState::Backward);
          if (!same) ++sc.shd;
        }
      }
    report.aggregate += sc;
  }
  return report;
}

PredictedGraph graph_from_adjacency(const Tensor& adjacency) {
  if (adjacency.rank() != 3 || adjacency.dim(1) != adjacency.dim(2)) {
    throw ShapeMismatch("adjacency must be J x N x N");
  }
  PredictedGraph g{adjacency.dim(0), adjacency.dim(1), {}};
  const std::size_t n = g.nodes;
  for (std::size_t j = 0; j < g.scales; ++j)
    for (std::size_t to = 0; to < n; ++to)
      for (std::size_t from = 0; from < n; ++from)
        if (adjacency[(j * n + to) * n + from] != 0.0) g.edges.push_back({j, from, to, EdgeKind::Directed});
  return g;
}

namespace {

void check_lengths(const CausalOrdering& a, const CausalOrdering& b) {
  if (a.size() != b.size()) throw LengthMismatch("orderings have different lengths");
}

}  // namespace

double kendall_tau(const CausalOrdering& a, const CausalOrdering& b) {
  check_lengths(a, b);
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  const auto pa = a.positions();
  const auto pb = b.positions();
  long concordant = 0;
  long discordant = 0;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) {
      const bool ua = pa[u] < pa[v];
      const bool ub = pb[u] < pb[v];
      (ua == ub ? concordant : discordant) += 1;
    }
  return static_cast<double>(concordant - discordant) / static_cast<double>(concordant + discordant);
}

double spearman(const CausalOrdering& a, const CausalOrdering& b) {
  check_lengths(a, b);
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  const auto pa = a.positions();
  const auto pb = b.positions();
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    sq += d * d;
  }
  const double nd = static_cast<double>(n);
  return 1.0 - 6.0 * sq / (nd * (nd * nd - 1.0));
}

double ndcg_at_k(const CausalOrdering& predicted, const CausalOrdering& truth, std::size_t k) {
  check_lengths(predicted, truth);
  const std::size_t n = truth.size();
  if (k < 1 || k > n) throw InvalidArgument("k must lie in [1, N]");
  const auto pos = truth.positions();
  double dcg = 0.0, ideal = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double discount = std::log2(static_cast<double>(i) + 2.0);
    dcg += static_cast<double>(n - pos[predicted[i]]) / discount;
    ideal += static_cast<double>(n - i) / discount;
    worst += static_cast<double>(i + 1) / discount;
  }
  if (ideal == worst) return 1.0;
  return (dcg - worst) / (ideal - worst);
}

OrderingReport ordering_report(const CausalOrdering& predicted, const CausalOrdering& truth,
                               std::span<const std::size_t> ks) {
  OrderingReport r;
  r.kendall = kendall_tau(predicted, truth);
  r.spearman = spearman(predicted, truth);
  for (std::size_t k : ks) r.ndcg.push_back(ndcg_at_k(predicted, truth, k));
  return r;
}

OrderingEvaluation ordering_eval(std::span<const double> theta_hat, const CausalOrdering& truth, std::size_t draws,
                                 std::span<const std::size_t> ks, Rng& rng) {
  if (draws == 0) throw InvalidArgument("ordering_eval needs at least one draw");
  if (theta_hat.size() != truth.size()) throw LengthMismatch("score vector and truth ordering differ in length");
  OrderingEvaluation ev;
  Rng model_rng = rng.split("model");
  Rng base_rng = rng.split("baseline");
  ev.model.reserve(draws);
  ev.baseline.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    ev.model.push_back(ordering_report(stochastic::pl_sample(theta_hat, model_rng), truth, ks));
    const auto theta_bar = stochastic::uniform_scores(truth.size(), base_rng);
    ev.baseline.push_back(ordering_report(stochastic::pl_sample(theta_bar, base_rng), truth, ks));
  }
  return ev;
}

PredictedGraph random_graph(std::size_t scales, std::size_t nodes, double density, Rng& rng) {
  const auto scores = stochastic::uniform_scores(nodes, rng);
  const auto order = stochastic::pl_sample(scores, rng);
  PredictedGraph g{scales, nodes, {}};
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t a = 0; a < nodes; ++a)
      for (std::size_t b = a + 1; b < nodes; ++b)
        if (rng.uniform() < density) g.edges.push_back({j, order[a], order[b], EdgeKind::Directed});
  return g;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

}  // namespace mncastle::metrics
