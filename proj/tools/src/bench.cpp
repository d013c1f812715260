#include "mncastle_cli/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "mncastle/errors.hpp"
#include "mncastle/synth.hpp"
#include "mncastle/wavelet.hpp"

namespace mncastle::cli {

Dataset make_dataset(const mndag::GenConfig& config, const std::string& wavelet) {
  Rng root(config.seed, "generate");
  Rng dag_rng = root.split("dag");
  Dataset d;
  d.dag = mndag::sample_mndag(config, dag_rng);
  const auto system = wavelet::build_system(wavelet, d.dag.scales);
  Rng data_rng = root.split("data");
  d.values = synth::generate(d.dag.mixing, system, data_rng);
  d.spectrum = mndag::ground_truth_spectrum(d.dag.mixing);
  return d;
}

std::vector<std::pair<double, double>> BenchPlan::default_cells() {
  std::vector<std::pair<double, double>> cells;
  for (double tau : {0.0, 0.5, 0.9})
    for (double mu : {0.0, 0.5, 0.9}) cells.emplace_back(tau, mu);
  return cells;
}

namespace {

BenchRow make_row(double tau, double mu, int seed, std::uint64_t dataset_seed, std::string model) {
  BenchRow r;
  r.tau = tau;
  r.mu = mu;
  r.seed = seed;
  r.dataset_seed = dataset_seed;
  r.model = std::move(model);
  return r;
}

std::string cell_label(double tau, double mu) { return "tau=" + format_double(tau) + ",mu=" + format_double(mu); }

}  // namespace

mndag::GenConfig BenchPlan::dataset_config(double tau, double mu, int s) const {
  mndag::GenConfig g;
  g.nodes = nodes;
  g.samples = samples;
  g.tau = tau;
  g.mu = mu;
  g.delta = delta;
  g.kernel = kernel;
  g.seed = Rng(seed, "bench").split(cell_label(tau, mu)).split(static_cast<std::uint64_t>(s)).key();
  return g;
}

std::vector<std::pair<double, double>> parse_cells(const std::string& text) {
  std::vector<std::pair<double, double>> cells;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw InvalidArgument("cell '" + item + "' is not of the form tau,mu");
    try {
      std::size_t used = 0;
      const std::string a = item.substr(0, comma);
      const std::string b = item.substr(comma + 1);
      const double tau = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument(a);
      const double mu = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument(b);
      cells.emplace_back(tau, mu);
    } catch (const std::logic_error&) {
      throw InvalidArgument("cell '" + item + "' is not of the form tau,mu");
    }
  }
  if (cells.empty()) throw InvalidArgument("no cells given");
  return cells;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct OrderingMeans {
  double kendall = 0.0;
  double spearman = 0.0;
  double ndcg = 0.0;
  std::vector<double> ndcg_draws;
};

OrderingMeans summarize_orderings(const std::vector<metrics::OrderingReport>& reports) {
  OrderingMeans m;
  std::vector<double> kt, sp;
  for (const auto& r : reports) {
    kt.push_back(r.kendall);
    sp.push_back(r.spearman);
    m.ndcg_draws.push_back(r.ndcg.at(0));
  }
  m.kendall = mean_of(kt);
  m.spearman = mean_of(sp);
  m.ndcg = mean_of(m.ndcg_draws);
  return m;
}

}  // namespace

JobResult run_job(const BenchPlan& plan, double tau, double mu, int seed) {
  JobResult out;
  const mndag::GenConfig config = plan.dataset_config(tau, mu, seed);
  BenchRow model = make_row(tau, mu, seed, config.seed, "mncastle");
  BenchRow base = make_row(tau, mu, seed, config.seed, "random");
  Dataset data;
  try {
    data = make_dataset(config, plan.wavelet);
  } catch (const std::exception& e) {
    model.status = base.status = std::string("failed: generate: ") + e.what();
    out.rows = {model, base};
    return out;
  }
  const Tensor truth = data.dag.adjacency();
  model.scales = base.scales = data.dag.scales;
  const std::size_t k = std::min(plan.ndcg_k, plan.nodes);
  const std::size_t ks[] = {k};

  Rng base_rng(config.seed, "baseline");
  const auto graph = metrics::random_graph(static_cast<std::size_t>(data.dag.scales), plan.nodes,
                                           plan.baseline_density, base_rng);
  base.adjacency = metrics::adjacency_scores(graph, truth).aggregate;

  try {
    Rng infer_rng(config.seed, "infer");
    const auto post = castle::train(data.values, data.spectrum, plan.infer, infer_rng);
    model.adjacency = metrics::adjacency_scores(post.graph(), truth).aggregate;
    model.tau_hat = post.tau_hat;
    out.elbo2 = post.elbo2;
    Rng eval_rng(config.seed, "ordering-eval");
    const auto ev = metrics::ordering_eval(post.theta, data.dag.ordering, plan.ordering_draws, ks, eval_rng);
    auto m = summarize_orderings(ev.model);
    auto b = summarize_orderings(ev.baseline);
    model.kendall = m.kendall;
    model.spearman = m.spearman;
    model.ndcg = m.ndcg;
    base.kendall = b.kendall;
    base.spearman = b.spearman;
    base.ndcg = b.ndcg;
    out.model_ndcg = std::move(m.ndcg_draws);
    out.baseline_ndcg = std::move(b.ndcg_draws);
  } catch (const std::exception& e) {
    model.status = std::string("failed: ") + e.what();
  }
  out.rows = {model, base};
  return out;
}

std::vector<ImportedPrediction> parse_imports(const Json& doc) {
  std::vector<ImportedPrediction> preds;
  try {
    const std::string model = doc.at("model").get<std::string>();
    for (const auto& p : doc.at("predictions")) {
      ImportedPrediction ip;
      ip.model = model;
      ip.tau = p.at("tau").get<double>();
      ip.mu = p.at("mu").get<double>();
      ip.seed = p.at("seed").get<int>();
      for (const auto& scale : p.at("edges")) {
        auto& list = ip.edges.emplace_back();
        for (const auto& e : scale) list.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
      }
      if (p.contains("ordering")) ip.ordering = p["ordering"].get<std::vector<std::size_t>>();
      preds.push_back(std::move(ip));
    }
  } catch (const Json::exception& e) {
    throw InvalidArgument(std::string("bad import file: ") + e.what());
  }
  return preds;
}

BenchRow score_import(const BenchPlan& plan, const ImportedPrediction& pred) {
  const mndag::GenConfig config = plan.dataset_config(pred.tau, pred.mu, pred.seed);
  BenchRow row = make_row(pred.tau, pred.mu, pred.seed, config.seed, pred.model);
  try {
    Rng root(config.seed, "generate");
    Rng dag_rng = root.split("dag");
    const auto dag = mndag::sample_mndag(config, dag_rng);
    row.scales = dag.scales;
    metrics::PredictedGraph g{std::max(pred.edges.size(), static_cast<std::size_t>(dag.scales)), plan.nodes, {}};
    for (std::size_t j = 0; j < pred.edges.size(); ++j)
      for (const auto& [from, to] : pred.edges[j]) g.edges.push_back({j, from, to, metrics::EdgeKind::Directed});
    row.adjacency = metrics::adjacency_scores(g, dag.adjacency()).aggregate;
    if (pred.ordering) {
      const stochastic::CausalOrdering order(*pred.ordering);
      row.kendall = metrics::kendall_tau(order, dag.ordering);
      row.spearman = metrics::spearman(order, dag.ordering);
      row.ndcg = metrics::ndcg_at_k(order, dag.ordering, std::min(plan.ndcg_k, plan.nodes));
    }
  } catch (const std::exception& e) {
    row.status = std::string("failed: ") + e.what();
  }
  return row;
}

BenchOutcome run_bench(const BenchPlan& plan, int jobs, const std::vector<ImportedPrediction>& imports,
                       bool progress) {
  struct Task {
    std::size_t cell;
    int seed;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < plan.cells.size(); ++c)
    for (int s = 0; s < plan.seeds; ++s) tasks.push_back({c, s});

  BenchOutcome outcome;
  outcome.jobs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex collector;
  std::size_t done = 0;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto [tau, mu] = plan.cells[tasks[i].cell];
      JobResult r = run_job(plan, tau, mu, tasks[i].seed);
      std::lock_guard lock(collector);
      outcome.jobs[i] = std::move(r);
      ++done;
      if (progress) {
        std::cerr << "[" << done << "/" << tasks.size() << "] tau=" << tau << " mu=" << mu
                  << " seed=" << tasks[i].seed << "\n";
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& j : outcome.jobs) outcome.rows.insert(outcome.rows.end(), j.rows.begin(), j.rows.end());
  for (const auto& p : imports) outcome.rows.push_back(score_import(plan, p));

  auto cell_index = [&](const BenchRow& r) {
    for (std::size_t c = 0; c < plan.cells.size(); ++c)
      if (plan.cells[c] == std::pair(r.tau, r.mu)) return c;
    return plan.cells.size();
  };
  std::stable_sort(outcome.rows.begin(), outcome.rows.end(), [&](const BenchRow& a, const BenchRow& b) {
    const auto ca = cell_index(a), cb = cell_index(b);
    if (ca != cb) return ca < cb;
    if (a.tau != b.tau) return a.tau < b.tau;
    if (a.mu != b.mu) return a.mu < b.mu;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.model < b.model;
  });
  return outcome;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out =
      "tau,mu,seed,dataset_seed,model,status,scales,positives,true_positives,false_positives,directed,undirected,"
      "shd,tpr,fdr,f1,shd_normalized,nnz_ratio,fraction_undirected,kendall,spearman,ndcg,tau_hat\n";
  for (const auto& r : rows) {
    const auto& a = r.adjacency;
    const bool ok = r.status == "ok";
    std::ostringstream line;
    line << format_double(r.tau) << ',' << format_double(r.mu) << ',' << r.seed << ',' << r.dataset_seed << ','
         << csv_quote(r.model) << ',' << csv_quote(r.status) << ',' << r.scales << ',';
    if (ok) {
      line << a.positives << ',' << a.true_positives << ',' << a.false_positives << ',' << a.directed << ','
           << a.undirected << ',' << a.shd << ',' << opt(a.tpr()) << ',' << opt(a.fdr()) << ',' << opt(a.f1())
           << ',' << opt(a.shd_normalized()) << ',' << opt(a.nnz_ratio()) << ',' << opt(a.fraction_undirected());
    } else {
      line << ",,,,,,,,,,,";
    }
    line << ',' << opt(r.kendall) << ',' << opt(r.spearman) << ',' << opt(r.ndcg) << ',' << opt(r.tau_hat) << '\n';
    out += line.str();
  }
  return out;
}

}  // namespace mncastle::cli
