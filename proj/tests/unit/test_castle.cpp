#include <gtest/gtest.h>

#include <cmath>

#include "mncastle/castle.hpp"
#include "mncastle/errors.hpp"
#include "mncastle/kernel.hpp"
#include "mncastle/mndag.hpp"
#include "mncastle/synth.hpp"
#include "mncastle/wavelet.hpp"
#include "step2_micro.hpp"
#include "test_util.hpp"

namespace mncastle::castle {
namespace {

using testing::micro_instance;
using testing::MicroInstance;

/// J x T x N x N tensor whose every slice is `slice`.
Tensor tile(std::size_t scales, std::size_t samples, const Tensor& slice) {
  const std::size_t nn = slice.size();
  Tensor out(Shape{scales, samples, slice.dim(0), slice.dim(1)});
  for (std::size_t b = 0; b < scales * samples; ++b)
    for (std::size_t e = 0; e < nn; ++e) out[b * nn + e] = slice[e];
  return out;
}

/// Two nodes, x1 = weight * x0 + noise.
Tensor two_node_data(double weight, std::size_t samples, Rng& rng) {
  Tensor x(Shape{2, samples});
  for (std::size_t t = 0; t < samples; ++t) {
    x[t] = rng.normal();
    x[samples + t] = weight * x[t] + rng.normal();
  }
  return x;
}

InferConfig quick_config(int iterations) {
  InferConfig c;
  c.iterations = iterations;
  c.particles = 4;
  c.decision_samples = 200;
  return c;
}

TEST(Castle, CoefficientIndexRoundTrip) {
  const std::size_t n = 4;
  std::vector<bool> seen(2 * n * (n - 1), false);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t to = 0; to < n; ++to)
      for (std::size_t from = 0; from < n; ++from) {
        if (to == from) continue;
        const std::size_t k = coefficient_index(j, to, from, n);
        ASSERT_LT(k, seen.size());
        EXPECT_FALSE(seen[k]);
        seen[k] = true;
      }
  EXPECT_THROW(coefficient_index(0, 1, 1, n), InvalidArgument);
}

TEST(Castle, PermittedCoefficientsFollowOrdering) {
  const CausalOrdering o({2, 0, 1});
  const auto permitted = permitted_coefficients(o, 2);
  EXPECT_EQ(permitted.size(), 2u * 3u);
  for (std::size_t j = 0; j < 2; ++j) {
    for (auto [to, from] : {std::pair{0, 2}, std::pair{1, 2}, std::pair{1, 0}})
      EXPECT_NE(std::find(permitted.begin(), permitted.end(), coefficient_index(j, to, from, 3)), permitted.end());
  }
}

TEST(Castle, ParameterTally) {
  EXPECT_EQ(parameter_tally(5, 6, 64), 5 + 6 * 20 * (1 + 64 + 64 * 65 / 2) + 2 + 64u);
  for (std::size_t n : {2, 3, 5})
    for (std::size_t j : {1, 3}) {
      const auto s = init_state(n, j, 32, InferConfig{}, false);
      EXPECT_EQ(s.inducing_count, 21u);
      EXPECT_EQ(s.parameter_count(), parameter_tally(n, j, s.inducing_count));
    }
}

TEST(Castle, InitialState) {
  InferConfig c;
  const auto s = init_state(3, 2, 16, c, false);
  EXPECT_NEAR(s.kernel_variance(), 0.1, 1e-12);
  EXPECT_NEAR(s.kernel_lengthscale(), 1.0, 1e-12);
  EXPECT_NEAR(s.step2.inducing[0], 0.0, 1e-15);
  EXPECT_NEAR(s.step2.inducing[s.inducing_count - 1], 10.0 * 15.0 / 16.0, 1e-12);
  const auto st = init_state(3, 2, 16, c, true);
  EXPECT_NEAR(st.kernel_lengthscale(), 1e3, 1e-6);
}

TEST(Castle, ConfigValidation) {
  InferConfig c;
  c.level = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = InferConfig{};
  c.particles = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(init_state(1, 1, 16, InferConfig{}, false), InvalidArgument);
}

TEST(Castle, TwoNodeOrderingRecovery) {
  const std::size_t t = 200;
  const Tensor mixing = tile(1, t, Tensor::from_rows({{1.0, 0.0}, {2.0, 1.0}}));
  const auto sys = wavelet::build_system(wavelet::Family::Haar, 1);
  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng data(seed, "two-node");
    const Tensor x = synth::generate(mixing, sys, data);
    InferConfig c;
    auto state = init_state(2, 1, t, c, false);
    Rng rng(seed, "svi1");
    for (int it = 0; it < c.iterations; ++it) svi1_step(x, state, c, rng);
    recovered += stochastic::pl_mode(state.step1.theta.values()) == CausalOrdering({0, 1});
  }
  EXPECT_GE(recovered, 18);
}

TEST(Castle, BaselineSeededByFirstObjective) {
  Rng data(1, "baseline");
  const Tensor x = two_node_data(1.0, 64, data);
  InferConfig c;
  auto state = init_state(2, 1, 64, c, false);
  EXPECT_FALSE(state.baseline_seeded);
  Rng rng(2, "svi1");
  const double f1 = svi1_step(x, state, c, rng);
  EXPECT_TRUE(state.baseline_seeded);
  EXPECT_NEAR(state.baseline, f1, 1e-9 * std::abs(f1));
  const double f2 = svi1_step(x, state, c, rng);
  EXPECT_NEAR(state.baseline, 0.9 * f1 + 0.1 * f2, 1e-9 * std::abs(f1));
}

TEST(Castle, BaselineLeavesScoreFunctionMeanUnchanged) {
  Rng data(3, "reinforce");
  Tensor x(Shape{3, 64});
  for (std::size_t t = 0; t < 64; ++t) {
    x[t] = data.normal();
    x[64 + t] = 1.5 * x[t] + data.normal();
    x[128 + t] = -0.7 * x[64 + t] + data.normal();
  }
  auto state = init_state(3, 1, 64, InferConfig{}, false);
  state.step1.theta = Tensor::vector({0.3, -0.2, 0.1});
  const std::size_t particles = 10000;
  Rng probe(4, "probe");
  const double baseline = svi1_step(x, state, InferConfig{}, probe);
  state.step1.theta = Tensor::vector({0.3, -0.2, 0.1});
  Rng a(5, "draws"), b(5, "draws");
  const Tensor plain = reinforce_samples(x, state, 0.0, particles, a);
  const Tensor centred = reinforce_samples(x, state, baseline, particles, b);
  for (std::size_t i = 0; i < 3; ++i) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t p = 0; p < particles; ++p) {
      const double d = centred[p * 3 + i] - plain[p * 3 + i];
      mean += d;
      sq += d * d;
    }
    mean /= particles;
    const double se = std::sqrt((sq / particles - mean * mean) / particles);
    EXPECT_LE(std::abs(mean), 3.0 * se) << "component " << i;
  }
  for (std::size_t p = 0; p < particles; ++p)
    EXPECT_NEAR(plain[p * 3] + plain[p * 3 + 1] + plain[p * 3 + 2], 0.0,
                1e-9 * std::max(1.0, std::abs(plain[p * 3])));
}

TEST(Castle, GaussianKlOfPriorIsZero) {
  Rng rng(5, "kl");
  const Tensor k = testing::random_spd(4, rng);
  const std::vector<double> zero(4, 0.0);
  EXPECT_NEAR(gaussian_kl(zero, cholesky(k), k), 0.0, 1e-12);
  const std::vector<double> shifted{1.0, 0.0, 0.0, 0.0};
  EXPECT_GT(gaussian_kl(shifted, cholesky(k), k), 0.0);
  // One dimension: KL(N(m, s^2) || N(0, v)).
  const Tensor v = Tensor::from_rows({{2.0}});
  const Tensor s = Tensor::from_rows({{0.5}});
  const std::vector<double> m{0.7};
  EXPECT_NEAR(gaussian_kl(m, s, v), 0.5 * (0.25 / 2.0 + 0.49 / 2.0 - 1.0 + std::log(2.0 / 0.25)), 1e-12);
}

TEST(Castle, WhitenedPriorHasZeroKl) {
  const MicroInstance m = micro_instance(1.0);
  ad::Tape tape;
  const auto obj = step2_objective(tape, m.state, m.s_hat, m.permitted, m.noise, m.config);
  EXPECT_NEAR(obj.kl.value().item(), 0.0, 1e-10);
  EXPECT_NEAR(obj.elbo.value().item(), obj.log_likelihood.value().item(), 1e-8);
}

TEST(Castle, Step2GradientMatchesFiniteDifferences) {
  ASSERT_EQ(micro_instance(0.1).state.inducing_count, 8u);
  EXPECT_LE(testing::step2_gradient_error(), 1e-4);
}

TEST(Castle, ForbiddenCoefficientsGetNoGradient) {
  const MicroInstance m = micro_instance(0.1);
  ad::Tape tape;
  const auto obj = step2_objective(tape, m.state, m.s_hat, m.permitted, m.noise, m.config);
  const auto grads = tape.grad(obj.elbo, obj.leaves);
  const std::size_t forbidden = coefficient_index(0, 0, 1, 2);
  const std::size_t tt = m.state.inducing_count;
  EXPECT_EQ(grads.adjoints[0][forbidden], 0.0);
  for (std::size_t i = 0; i < tt; ++i) {
    EXPECT_EQ(grads.adjoints[1][forbidden * tt + i], 0.0);
    EXPECT_EQ(grads.adjoints[3][forbidden * tt + i], 0.0);
  }
}

TEST(Castle, QuantileInterpolates) {
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile({4, 1, 3, 2}, 1.0), 4.0);
  EXPECT_THROW(quantile({}, 0.5), InvalidArgument);
}

TEST(Castle, EdgeDecisions) {
  const std::size_t n = 3, draws = 400;
  std::vector<std::vector<double>> rows(n * (n - 1), std::vector<double>(draws, 0.01));
  // 0 -> 1 clearly present.
  rows[coefficient_index(0, 1, 0, n)].assign(draws, 0.5);
  // 1 <-> 2 in both directions.
  rows[coefficient_index(0, 2, 1, n)].assign(draws, 0.4);
  rows[coefficient_index(0, 1, 2, n)].assign(draws, 0.3);
  // 0 -> 2 strong but with 2% of draws near zero: the 1% quantile fails.
  auto& weak = rows[coefficient_index(0, 2, 0, n)];
  weak.assign(draws, 0.8);
  for (std::size_t d = 0; d < 8; ++d) weak[d] = 0.0;
  const auto edges = decide_edges(rows, 1, n, 0.1, 0.99);
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(edges[0].from, 0u);
  EXPECT_EQ(edges[0].to, 1u);
  EXPECT_EQ(edges[0].kind, metrics::EdgeKind::Directed);
  EXPECT_NEAR(edges[0].lower_bound, 0.5, 1e-15);
  EXPECT_EQ(edges[1].kind, metrics::EdgeKind::Undirected);
  EXPECT_NEAR(edges[1].lower_bound, 0.3, 1e-15);

  // Two near-zero draws out of 400 still leave the 1% quantile above threshold.
  for (std::size_t d = 2; d < 8; ++d) weak[d] = 0.8;
  EXPECT_EQ(decide_edges(rows, 1, n, 0.1, 0.99).size(), 3u);
  rows[0].resize(100);
  EXPECT_THROW(decide_edges(rows, 1, n, 0.1, 0.99), InvalidArgument);
}

TEST(Castle, NullSpectrumYieldsNoEdges) {
  const std::size_t n = 3, scales = 2, t = 64;
  Rng data(8, "null");
  Tensor x(Shape{n, t});
  for (double& v : x.values()) v = data.normal();
  const Tensor s_hat = tile(scales, t, Tensor::identity(n));
  Rng rng(9, "infer");
  const Posterior post = train(x, s_hat, InferConfig{}, rng);
  EXPECT_TRUE(post.stationary);
  EXPECT_TRUE(post.edges.empty()) << post.edges.size() << " spurious edges";
  double worst = 0.0;
  for (const auto& c : post.coefficients)
    for (double v : c.mean) worst = std::max(worst, std::abs(v));
  EXPECT_LT(worst, 0.1);
}

TEST(Castle, MasksCoefficientsOutsideMode) {
  const std::size_t n = 3, t = 32;
  Rng data(10, "mask");
  Tensor x(Shape{n, t});
  for (double& v : x.values()) v = data.normal();
  Rng rng(11, "infer");
  const Posterior post = train(x, tile(1, t, Tensor::identity(n)), quick_config(5), rng);
  ASSERT_EQ(post.coefficients.size(), 6u);
  std::size_t permitted = 0;
  for (const auto& c : post.coefficients) {
    EXPECT_EQ(c.permitted, post.mode.precedes(c.from, c.to));
    permitted += c.permitted;
    if (!c.permitted)
      for (std::size_t s = 0; s < t; ++s) {
        EXPECT_EQ(c.mean[s], 0.0);
        EXPECT_EQ(c.lower[s], 0.0);
        EXPECT_EQ(c.upper[s], 0.0);
      }
  }
  EXPECT_EQ(permitted, 3u);
  EXPECT_EQ(post.elbo1.size(), 5u);
  EXPECT_EQ(post.elbo2.size(), 5u);
  EXPECT_NEAR(post.tau_hat, 1.0 / post.kernel_lengthscale, 1e-15);
}

// Fraction of all (j, n, m, t) cells whose true coefficient lies in the 99%
// band after fitting step 2 to the exact spectrum under the true ordering.
double band_coverage(std::uint64_t seed) {
  const std::size_t n = 3, scales = 2, t = 64;
  Rng rng(seed, "coverage");
  Rng order_rng = rng.split("ordering");
  const auto scores = stochastic::uniform_scores(n, order_rng);
  const CausalOrdering ordering = stochastic::pl_sample(scores, order_rng);
  const auto times = mndag::time_axis(t, mndag::kDefaultAxisScale);
  Rng w_rng = rng.split("weights");
  const auto weights = mndag::sample_weights(scales, t, n, 0.5, 0.5, stochastic::parse_kernel("rbf(0.1,1/tau)", 0.5),
                                             times, w_rng);
  Rng m_rng = rng.split("mask");
  const auto causal = mndag::assemble_causal(weights, mndag::sample_mask(scales, n, 0.5, m_rng), ordering);
  const Tensor s_hat = mndag::ground_truth_spectrum(mndag::mixing(causal));

  InferConfig c;
  VariationalState state = init_state(n, scales, t, c, false);
  Rng fit = rng.split("svi2");
  for (int it = 0; it < c.iterations; ++it) svi2_step(s_hat, ordering, state, c, fit);
  for (std::size_t pos = 0; pos < n; ++pos) state.step1.theta[ordering[pos]] = static_cast<double>(n - pos);
  Rng post_rng = rng.split("posterior");
  const Posterior post = summarize(state, c, post_rng);
  EXPECT_EQ(post.mode, ordering);

  std::size_t covered = 0, total = 0;
  for (const auto& cs : post.coefficients)
    for (std::size_t s = 0; s < t; ++s) {
      const double truth = causal[((cs.scale * t + s) * n + cs.to) * n + cs.from];
      covered += cs.lower[s] <= truth && truth <= cs.upper[s];
      ++total;
    }
  return static_cast<double>(covered) / static_cast<double>(total);
}

TEST(Castle, BandsCoverGroundTruth) {
  std::vector<double> coverage;
  for (std::uint64_t seed = 0; seed < 8; ++seed) coverage.push_back(band_coverage(seed));
  int passing = 0;
  for (double v : coverage) passing += v >= 0.8;
  EXPECT_GE(passing, 6);
  EXPECT_GE(metrics::median(coverage), 0.8);
}

TEST(Castle, TrainingIsDeterministic) {
  Rng data(15, "det");
  const Tensor x = two_node_data(1.0, 32, data);
  const Tensor s_hat = tile(1, 32, Tensor::from_rows({{1.0, 1.0}, {1.0, 2.0}}));
  Rng a(16, "infer"), b(16, "infer");
  const Posterior p = train(x, s_hat, quick_config(10), a);
  const Posterior q = train(x, s_hat, quick_config(10), b);
  EXPECT_EQ(p.theta, q.theta);
  EXPECT_EQ(p.elbo1, q.elbo1);
  EXPECT_EQ(p.elbo2, q.elbo2);
  EXPECT_EQ(p.kernel_lengthscale, q.kernel_lengthscale);
}

TEST(Castle, StationarityDetection) {
  Rng data(17, "stat");
  const Tensor x = two_node_data(1.0, 32, data);
  Tensor varying = tile(1, 32, Tensor::identity(2));
  varying[5 * 4] = 1.5;
  Rng a(18, "infer"), b(18, "infer");
  EXPECT_TRUE(train(x, tile(1, 32, Tensor::identity(2)), quick_config(2), a).stationary);
  const Posterior p = train(x, varying, quick_config(2), b);
  EXPECT_FALSE(p.stationary);
  InferConfig forced = quick_config(2);
  forced.stationary = true;
  Rng c(18, "infer");
  const Posterior f = train(x, varying, forced, c);
  EXPECT_TRUE(f.stationary);
  EXPECT_GT(f.kernel_lengthscale, 100.0);
}

TEST(Castle, ShapeChecks) {
  Rng rng(19, "shape");
  EXPECT_THROW(train(Tensor(Shape{2, 16}), Tensor(Shape{1, 8, 2, 2}), quick_config(1), rng), ShapeMismatch);
  EXPECT_THROW(train(Tensor(Shape{2, 16}), Tensor(Shape{1, 16, 3, 3}), quick_config(1), rng), ShapeMismatch);
}

}  // namespace
}  // namespace mncastle::castle
