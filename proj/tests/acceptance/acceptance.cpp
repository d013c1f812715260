// Acceptance suite: one PASS/FAIL line per criterion.
//
//   mncastle_acceptance [--jobs N] [criterion ids...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "autodiff_cases.hpp"
#include "mncastle/metrics.hpp"
#include "mncastle/mndag.hpp"
#include "mncastle/plackett_luce.hpp"
#include "mncastle/spectrum.hpp"
#include "mncastle/synth.hpp"
#include "mncastle/wavelet.hpp"
#include "mncastle_cli/bench.hpp"
#include "mncastle_cli/bundle.hpp"
#include "mncastle_cli/commands.hpp"
#include "oracles.hpp"
#include "step2_micro.hpp"
#include "test_util.hpp"

using namespace mncastle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int g_jobs = 8;

// ---- 1 ----------------------------------------------------------------------

Outcome ma1_identity() {
  const std::size_t t = std::size_t{1} << 14;
  const Tensor mixing(Shape{1, t, 1, 1}, 1.0);
  Rng rng(1, "acceptance-ma1");
  const Tensor x = synth::generate(mixing, wavelet::build_system("haar", 1), rng);
  const auto acv = synth::autocovariance(x.values(), 3);
  const double expected[] = {1.0, -0.5, 0.0, 0.0};
  double worst = 0.0;
  for (int l = 0; l <= 3; ++l) worst = std::max(worst, std::abs(acv[static_cast<std::size_t>(l)] - expected[l]));
  return {worst <= 0.05, fmt("acv = (%.4f, %.4f, %.4f, %.4f), max error %.4f <= 0.05", acv[0], acv[1], acv[2],
                             acv[3], worst)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome plackett_luce() {
  const std::vector<double> theta{1.0, 0.0, -1.0};
  const int draws = 100000;
  Rng rng(2, "acceptance-pl");
  std::map<std::vector<std::size_t>, int> counts;
  for (int i = 0; i < draws; ++i) ++counts[stochastic::pl_sample(theta, rng).nodes()];
  std::vector<std::size_t> perm{0, 1, 2};
  double worst_z = 0.0;
  do {
    const double p = std::exp(stochastic::pl_log_prob(theta, stochastic::CausalOrdering(perm)));
    const double se = std::sqrt(p * (1.0 - p) / draws);
    worst_z = std::max(worst_z, std::abs(counts[perm] / static_cast<double>(draws) - p) / se);
  } while (std::next_permutation(perm.begin(), perm.end()));

  double worst_sum = 0.0;
  Rng score_rng(3, "acceptance-pl-sum");
  for (std::size_t n = 1; n <= 5; ++n)
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> th(n);
      for (double& v : th) v = score_rng.normal(0.0, 2.0);
      std::vector<std::size_t> p(n);
      std::iota(p.begin(), p.end(), 0);
      double total = 0.0;
      do total += std::exp(stochastic::pl_log_prob(th, stochastic::CausalOrdering(p)));
      while (std::next_permutation(p.begin(), p.end()));
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
  return {worst_z <= 3.0 && worst_sum <= 1e-10,
          fmt("max |freq - p| = %.2f sigma (<= 3); max |sum p - 1| = %.1e (<= 1e-10)", worst_z, worst_sum)};
}

// ---- 3 ----------------------------------------------------------------------

Outcome nilpotent_inverse_check() {
  Rng rng(4, "acceptance-nilpotent");
  double worst = 0.0;
  int slices = 0;
  for (int trial = 0; slices < 1000; ++trial) {
    mndag::GenConfig c;
    c.nodes = 2 + static_cast<std::size_t>(trial % 7);
    c.samples = 16;
    c.mu = 0.5;
    c.tau = 0.5;
    c.delta = rng.uniform(0.3, 1.0);
    c.seed = static_cast<std::uint64_t>(trial);
    Rng dag_rng(c.seed, "acceptance-dag");
    const auto dag = mndag::sample_mndag(c, dag_rng);
    const std::size_t n = c.nodes, nn = n * n;
    for (std::size_t j = 0; j < static_cast<std::size_t>(dag.scales) && slices < 1000; ++j)
      for (std::size_t t = 0; t < c.samples && slices < 1000; t += 4, ++slices) {
        const std::size_t off = (j * c.samples + t) * nn;
        const Tensor cslice(Shape{n, n}, std::vector<double>(dag.causal.values().begin() + static_cast<long>(off),
                                                             dag.causal.values().begin() + static_cast<long>(off + nn)));
        const Tensor m = nilpotent_inverse(cslice);
        const Tensor oracle = testing::gauss_solve(Tensor::identity(n) - cslice, Tensor::identity(n));
        worst = std::max(worst, max_abs_diff(m, oracle));
      }
  }
  return {worst <= 1e-10, fmt("%d slices, N in [2, 8], max |M - solve| = %.2e (<= 1e-10)", slices, worst)};
}

// ---- 4 ----------------------------------------------------------------------

Outcome gradient_integrity() {
  double worst = 0.0;
  std::string worst_op;
  std::size_t ops = 0;
  for (const auto& op : testing::op_cases()) {
    ++ops;
    for (int trial = 0; trial < 20; ++trial) {
      Rng rng(static_cast<std::uint64_t>(trial), op.name);
      const double e = testing::max_gradient_error(op.f, op.inputs(rng));
      if (e > worst) {
        worst = e;
        worst_op = op.name;
      }
    }
  }
  const double step2 = testing::step2_gradient_error();
  return {worst <= 1e-4 && step2 <= 1e-4,
          fmt("%zu ops, worst %.1e (%s); step-2 micro-instance %.1e (<= 1e-4)", ops, worst, worst_op.c_str(), step2)};
}

// ---- 5 ----------------------------------------------------------------------

Outcome spectral_consistency() {
  const std::size_t n = 3, scales = 2, t = std::size_t{1} << 12;
  Tensor mixing(Shape{scales, t, n, n});
  for (std::size_t k = 0; k < t; ++k) {
    const double phase = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(t);
    const Tensor m1 = Tensor::from_rows({{1, 0, 0}, {0.8, 1, 0}, {-0.5, 0.6 + 0.3 * std::cos(phase), 1}});
    const Tensor m2 = Tensor::from_rows({{1, 0, 0}, {-0.4 * std::sin(phase), 1, 0}, {0.3, 0, 1}});
    std::copy(m1.values().begin(), m1.values().end(), mixing.values().begin() + static_cast<long>(k * 9));
    std::copy(m2.values().begin(), m2.values().end(), mixing.values().begin() + static_cast<long>((t + k) * 9));
  }
  const Tensor truth = matmul(mixing, transpose_last2(mixing));
  Rng rng(5, "acceptance-spectrum");
  const Tensor x = synth::generate(mixing, wavelet::build_system("haar", scales), rng);
  const auto est =
      spectrum::estimate(x, spectrum::EstimateOptions{"haar", 513, spectrum::kDefaultPdFloor, static_cast<int>(scales)});
  std::vector<double> medians;
  for (std::size_t j = 0; j < scales; ++j) {
    std::vector<double> rel(t);
    for (std::size_t k = 0; k < t; ++k) {
      const Tensor d = testing::slice(est.values, j, k) - testing::slice(truth, j, k);
      rel[k] = frobenius_norm(d) / frobenius_norm(testing::slice(truth, j, k));
    }
    medians.push_back(metrics::median(rel));
  }
  const double worst = *std::max_element(medians.begin(), medians.end());
  return {worst <= 0.25,
          fmt("haar, width 513, time-median relative error per scale (%.3f, %.3f) <= 0.25", medians[0], medians[1])};
}

// ---- 6, 7 -------------------------------------------------------------------

cli::BenchOutcome& reference_cell() {
  static cli::BenchOutcome outcome = [] {
    cli::BenchPlan plan;
    plan.cells = {{0.5, 0.5}};
    plan.seeds = 20;
    return cli::run_bench(plan, g_jobs);
  }();
  return outcome;
}

Outcome benchmark_superiority() {
  const auto& outcome = reference_cell();
  std::vector<double> f1_model, f1_base, ndcg_model, ndcg_base;
  std::size_t failed = 0;
  for (const auto& r : outcome.rows) {
    if (r.status != "ok") {
      ++failed;
      continue;
    }
    (r.model == "mncastle" ? f1_model : f1_base).push_back(r.adjacency.f1().value_or(0.0));
  }
  for (const auto& j : outcome.jobs) {
    ndcg_model.insert(ndcg_model.end(), j.model_ndcg.begin(), j.model_ndcg.end());
    ndcg_base.insert(ndcg_base.end(), j.baseline_ndcg.begin(), j.baseline_ndcg.end());
  }
  if (f1_model.empty() || f1_base.empty() || ndcg_model.empty()) return {false, "no successful runs"};
  const double fm = metrics::median(f1_model), fb = metrics::median(f1_base);
  const double nm = metrics::median(ndcg_model), nb = metrics::median(ndcg_base);
  return {failed == 0 && fm > fb && nm > nb,
          fmt("median F1 %.3f vs baseline %.3f; median nDCG@5 %.3f vs uniform %.3f; %zu failed rows", fm, fb, nm, nb,
              failed)};
}

Outcome tau_recovery() {
  std::vector<double> tau;
  for (const auto& r : reference_cell().rows)
    if (r.model == "mncastle" && r.tau_hat) tau.push_back(*r.tau_hat);
  if (tau.size() != 20) return {false, fmt("only %zu seeds produced tau-hat", tau.size())};
  const double mean = std::accumulate(tau.begin(), tau.end(), 0.0) / static_cast<double>(tau.size());
  return {mean >= 0.25 && mean <= 0.75, fmt("mean tau-hat over 20 seeds %.3f in [0.25, 0.75]", mean)};
}

/// Moving average of width `w` over the trace; the last value minus the first.
Outcome elbo_trend() {
  std::size_t rising = 0, total = 0;
  const std::size_t w = 50;
  for (const auto& j : reference_cell().jobs) {
    if (j.elbo2.size() < w) continue;
    ++total;
    const double first = std::accumulate(j.elbo2.begin(), j.elbo2.begin() + w, 0.0) / w;
    const double last = std::accumulate(j.elbo2.end() - w, j.elbo2.end(), 0.0) / w;
    rising += last >= first;
  }
  return {rising >= 18, fmt("smoothed step-2 ELBO final >= initial on %zu/%zu seeds (>= 18)", rising, total)};
}

// ---- 8 ----------------------------------------------------------------------

Outcome metric_suite() {
  Rng rng(8, "acceptance-metrics");
  double worst = 0.0;
  std::size_t count_mismatch = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
    const auto a = testing::random_ordering(n, rng), b = testing::random_ordering(n, rng);
    worst = std::max(worst, std::abs(metrics::kendall_tau(a, b) - testing::kendall_oracle(a, b)));
    worst = std::max(worst, std::abs(metrics::spearman(a, b) - testing::spearman_oracle(a, b)));
    for (std::size_t k = 1; k <= n; ++k)
      worst = std::max(worst, std::abs(metrics::ndcg_at_k(a, b, k) - testing::ndcg_oracle(a, b, k)));

    testing::Arcs truth(n, std::vector<bool>(n, false)), pred = truth, undirected = truth;
    Tensor truth_t(Shape{1, n, n});
    metrics::PredictedGraph g{1, n, {}};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (rng.uniform() < 0.5) {
          truth[b[i]][b[j]] = true;
          truth_t[b[j] * n + b[i]] = 1.0;
        }
        const double r = rng.uniform();
        if (r < 0.3) {
          pred[i][j] = true;
          g.edges.push_back({0, i, j, metrics::EdgeKind::Directed});
        } else if (r < 0.6) {
          pred[j][i] = true;
          g.edges.push_back({0, j, i, metrics::EdgeKind::Directed});
        } else if (r < 0.7) {
          pred[i][j] = pred[j][i] = undirected[i][j] = undirected[j][i] = true;
          g.edges.push_back({0, i, j, metrics::EdgeKind::Undirected});
        }
      }
    const auto o = testing::confusion_oracle(truth, pred, undirected);
    const auto s = metrics::adjacency_scores(g, truth_t).aggregate;
    count_mismatch += s.shd != o.shd || s.true_positives != o.true_positives ||
                      s.false_positives != o.false_positives || s.positives != o.positives;
  }
  return {worst <= 1e-12 && count_mismatch == 0,
          fmt("500 cases, N <= 5: max |closed form - enumeration| %.1e (<= 1e-12); SHD/TP/FP mismatches %zu", worst,
              count_mismatch)};
}

// ---- 9 ----------------------------------------------------------------------

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), a));
  std::size_t other = 0;
  for (const auto& e : fs::recursive_directory_iterator(b)) other += e.is_regular_file();
  if (files.size() != other) {
    why = "file count differs";
    return false;
  }
  for (const auto& f : files)
    if (cli::read_file(a / f) != cli::read_file(b / f)) {
      why = f.string() + " differs";
      return false;
    }
  return true;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "mncastle-acceptance-determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string r = root.string();
  bool ok = true;
  std::vector<std::string> notes;
  std::string why;
  // Same bundle name in both runs: the posterior records it.
  for (const char* run : {"a", "b"}) {
    const std::string dir = r + "/" + run + "/gen";
    ok &= cli({"generate", "--n", "4", "--t", "64", "--mu", "0.5", "--tau", "0.5", "--seed", "21", "--out", dir}) == 0;
    ok &= cli({"infer", "--bundle", dir, "--spectrum", "ground-truth", "--seed", "3", "--iterations", "200"}) == 0;
  }
  if (ok && !same_tree(r + "/a", r + "/b", why)) {
    ok = false;
    notes.push_back("generate/infer: " + why);
  }
  const std::vector<std::string> bench{"bench", "--cells", "0.5,0.5;0.9,0", "--seeds", "3", "--iterations", "150",
                                       "--quiet"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = bench;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  const bool ran = cli(with({"--jobs", "1", "--out", r + "/bench-1.csv"})) == 0 &&
                   cli(with({"--jobs", "8", "--out", r + "/bench-8.csv"})) == 0;
  const bool bench_same = ran && cli::read_file(r + "/bench-1.csv") == cli::read_file(r + "/bench-8.csv");
  if (!bench_same) notes.push_back(ran ? "bench output depends on --jobs" : "bench failed");
  ok &= bench_same;
  fs::remove_all(root);
  std::string detail = "generate + infer reruns byte-identical; bench --jobs 1 vs 8 byte-identical";
  if (!notes.empty()) {
    detail.clear();
    for (const auto& n : notes) detail += n + "; ";
  }
  return {ok, detail};
}

struct Criterion {
  std::string id;
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> only;
  g_jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--jobs" && i + 1 < argc) {
      g_jobs = std::max(1, std::atoi(argv[++i]));
    } else {
      only.push_back(a);
    }
  }

  const std::vector<Criterion> criteria{
      {"1", "MA(1) autocovariance identity", ma1_identity},
      {"2", "Plackett-Luce correctness", plackett_luce},
      {"3", "Nilpotent inverse", nilpotent_inverse_check},
      {"4", "Gradient integrity", gradient_integrity},
      {"5", "Spectral pipeline consistency", spectral_consistency},
      {"6", "Benchmark superiority", benchmark_superiority},
      {"6e", "Step-2 ELBO trend on benchmark seeds", elbo_trend},
      {"7", "Tau recovery", tau_recovery},
      {"8", "Metric unit suite", metric_suite},
      {"9", "Determinism", determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s [%s] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id.c_str(), c.name.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
