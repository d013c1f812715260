#include "mncastle_cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "mncastle/castle.hpp"
#include "mncastle/errors.hpp"
#include "mncastle/metrics.hpp"
#include "mncastle/spectrum.hpp"
#include "mncastle/synth.hpp"
#include "mncastle/wavelet.hpp"
#include "mncastle_cli/bench.hpp"
#include "mncastle_cli/bundle.hpp"

namespace mncastle::cli {

namespace fs = std::filesystem;

namespace {

/// Carries an exit code out of a command.
struct CommandError : std::runtime_error {
  CommandError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

fs::path default_out_dir() {
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "mncastle-out";
}

Json stats_json(const synth::StatsReport& report, const std::vector<std::string>& names) {
  Json doc;
  doc["max_lag"] = report.max_lag;
  doc["band"] = report.band;
  doc["series"] = Json::array();
  for (std::size_t i = 0; i < report.series.size(); ++i) {
    const auto& s = report.series[i];
    std::size_t acf_hits = 0, abs_hits = 0;
    for (std::size_t l = 1; l < s.acf.size(); ++l) {
      acf_hits += std::abs(s.acf[l]) > report.band;
      abs_hits += std::abs(s.abs_acf[l]) > report.band;
    }
    doc["series"].push_back({{"name", names.at(i)},
                             {"mean", s.mean},
                             {"variance", s.variance},
                             {"skewness", s.skewness},
                             {"kurtosis", s.kurtosis},
                             {"excess_kurtosis", s.excess_kurtosis()},
                             {"jarque_bera", s.jarque_bera},
                             {"jb_pvalue", s.jb_pvalue},
                             {"acf_lags_outside_band", acf_hits},
                             {"abs_acf_lags_outside_band", abs_hits},
                             {"acf", s.acf},
                             {"abs_acf", s.abs_acf}});
  }
  return doc;
}

std::vector<std::string> default_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

// ---- generate ---------------------------------------------------------------

struct GenerateArgs {
  mndag::GenConfig config;
  std::string wavelet = "haar";
  std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  Dataset data;
  try {
    data = make_dataset(a.config, a.wavelet);
  } catch (const Error& e) {
    throw CommandError(kBadFlags, e.what());
  }
  const auto& g = data.dag;
  const fs::path dir = a.out.empty() ? default_out_dir() / ("generate-seed" + std::to_string(a.config.seed)) : fs::path(a.out);
  const auto names = default_names(g.config.nodes);

  Bundle b(dir);
  Json& m = b.manifest();
  m["format"] = "mncastle-bundle";
  m["toolkit_version"] = kToolkitVersion;
  m["source"] = "generate";
  m["config"] = {{"nodes", g.config.nodes},   {"samples", g.config.samples}, {"mu", g.config.mu},
                 {"tau", g.config.tau},       {"delta", g.config.delta},     {"kernel", g.config.kernel},
                 {"axis_scale", g.config.axis_scale}, {"seed", g.config.seed}};
  m["wavelet"] = a.wavelet;
  m["scales"] = g.scales;
  m["nodes"] = g.config.nodes;
  m["samples"] = g.config.samples;
  m["series"] = names;
  m["ordering"] = g.ordering.nodes();
  m["ordering_scores"] = g.scores;
  m["seeds"] = {{"master", g.config.seed},
                {"graph", "Rng(seed, \"generate\").split(\"dag\")"},
                {"series", "Rng(seed, \"generate\").split(\"data\")"}};
  m["axis_scale_decision"] = {{"axis", "nu_t = s * t / T"}, {"s", g.config.axis_scale}};
  m["payloads"] = Json::object();
  b.put_text(kValuesName, encode_values(data.values, names));
  b.put_tensor(kCausalName, g.causal);
  b.put_tensor(kMixingName, g.mixing);
  b.put_tensor(kAdjacencyName, g.adjacency());
  b.put_tensor(kTruthSpectrumName, data.spectrum);
  if (g.config.samples >= 8) b.put_text("stats.json", stats_json(synth::stats(data.values), names).dump(2) + "\n");
  b.save();

  out << "wrote " << dir.string() << ": N=" << g.config.nodes << " T=" << g.config.samples << " J=" << g.scales
      << " ordering";
  for (std::size_t n : g.ordering.nodes()) out << ' ' << n;
  out << '\n';
  return kOk;
}

// ---- spectrum ---------------------------------------------------------------

struct SpectrumArgs {
  std::string bundle;
  std::string csv;
  std::string out;
  std::string export_csv;
  spectrum::EstimateOptions options;
};

/// Long-format CSV (scale, row, col, t, value) of the lower triangle.
std::string spectrum_csv(const Tensor& s) {
  const std::size_t scales = s.dim(0), samples = s.dim(1), n = s.dim(2);
  std::string out = "scale,row,col,t,value\n";
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c <= r; ++c)
        for (std::size_t t = 0; t < samples; ++t) {
          out += std::to_string(j) + "," + std::to_string(r) + "," + std::to_string(c) + "," + std::to_string(t) +
                 "," + format_double(s[((j * samples + t) * n + r) * n + c]) + "\n";
        }
  return out;
}

/// Per scale, the largest time-median |S_nm| over off-diagonal entries. A
/// magnitude summary used to pick scales by hand.
Json cross_spectrum_report(const Tensor& s) {
  const std::size_t scales = s.dim(0), samples = s.dim(1), n = s.dim(2);
  Json rows = Json::array();
  std::vector<double> series(samples);
  for (std::size_t j = 0; j < scales; ++j) {
    double worst = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < r; ++c) {
        for (std::size_t t = 0; t < samples; ++t) series[t] = std::abs(s[((j * samples + t) * n + r) * n + c]);
        worst = std::max(worst, metrics::median(series));
      }
    rows.push_back({{"scale", j}, {"max_median_abs_cross", worst}});
  }
  return rows;
}

int cmd_spectrum(const SpectrumArgs& a, std::ostream& out) {
  if (a.bundle.empty() == a.csv.empty()) throw CommandError(kBadFlags, "give exactly one of --bundle or --csv");
  Bundle b = a.bundle.empty() ? Bundle(a.out.empty() ? default_out_dir() / "spectrum" : fs::path(a.out))
                              : Bundle::load(a.bundle);
  Tensor x;
  if (!a.csv.empty()) {
    std::vector<std::string> names;
    x = decode_values(read_file(a.csv), &names);
    Json& m = b.manifest();
    m["format"] = "mncastle-bundle";
    m["toolkit_version"] = kToolkitVersion;
    m["source"] = "csv";
    m["nodes"] = x.dim(0);
    m["samples"] = x.dim(1);
    m["series"] = names;
    m["payloads"] = Json::object();
    b.put_text(kValuesName, encode_values(x, names));
  } else {
    x = b.values();
  }
  const std::size_t t = x.dim(1);
  if (!wavelet::is_power_of_two(t)) {
    const std::size_t p = t >= 1 ? std::size_t{1} << wavelet::floor_log2(t) : 0;
    throw CommandError(kBadLength, "series length " + std::to_string(t) +
                                       " is not a power of two; truncate to the largest power-of-two prefix (" +
                                       std::to_string(p) + " samples)");
  }
  spectrum::SpectralTensor s;
  try {
    s = spectrum::estimate(x, a.options);
  } catch (const BadLength& e) {
    throw CommandError(kBadLength, e.what());
  } catch (const Error& e) {
    throw CommandError(kBadFlags, e.what());
  }
  b.put_tensor(kEstimatedSpectrumName, s.values);
  b.manifest()["spectrum_estimate"] = {{"wavelet", s.wavelet},
                                       {"width_requested", a.options.width},
                                       {"width", s.smoothing_width},
                                       {"bias_corrected", s.bias_corrected},
                                       {"pd_floor", s.pd_floor.value_or(0.0)},
                                       {"scales", s.scales()}};
  const Json report = cross_spectrum_report(s.values);
  b.manifest()["cross_spectrum_report"] = report;
  if (!a.export_csv.empty()) write_file(a.export_csv, spectrum_csv(s.values));
  b.save();
  out << "estimated spectrum for " << b.dir().string() << ": J=" << s.scales() << " wavelet " << s.wavelet
      << " width " << s.smoothing_width << " floor " << s.pd_floor.value_or(0.0) << '\n';
  for (const auto& row : report) {
    out << "  scale " << row["scale"].get<std::size_t>() << ": max time-median |cross| "
        << row["max_median_abs_cross"].get<double>() << '\n';
  }
  return kOk;
}

// ---- ingest -----------------------------------------------------------------

struct IngestArgs {
  std::string prices;
  std::string out;
};

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  const auto last = s.find_last_not_of(" \t\r");
  return first == std::string::npos ? "" : s.substr(first, last - first + 1);
}

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  std::istringstream in(read_file(a.prices));
  std::string line;
  if (!std::getline(in, line)) throw CommandError(kBadPrices, "price file is empty");
  std::vector<std::string> header;
  {
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(trim(cell));
  }
  if (header.size() < 2) throw CommandError(kBadPrices, "price file needs a date column and at least one index");
  const std::size_t n = header.size() - 1;
  std::vector<std::vector<double>> prices(n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() != header.size()) {
      throw CommandError(kBadPrices, "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                         " fields, got " + std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      std::size_t used = 0;
      try {
        v = std::stod(cells[i + 1], &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used == 0 || used != cells[i + 1].size() || !std::isfinite(v)) {
        throw CommandError(kBadPrices, "row " + std::to_string(row) + ": unparsable price '" + cells[i + 1] + "'");
      }
      if (v <= 0.0) throw CommandError(kBadPrices, "row " + std::to_string(row) + ": nonpositive price " + cells[i + 1]);
      prices[i].push_back(v);
    }
  }
  const std::size_t rows = prices[0].size();
  if (rows < 2) throw CommandError(kBadPrices, "need at least two price rows");
  const std::size_t returns = rows - 1;
  const std::size_t kept = std::size_t{1} << wavelet::floor_log2(returns);
  const std::size_t dropped = returns - kept;
  Tensor r(Shape{n, kept});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < kept; ++k) {
      const std::size_t t = dropped + k + 1;
      r[i * kept + k] = std::log(prices[i][t] / prices[i][t - 1]);
    }
  const std::vector<std::string> names(header.begin() + 1, header.end());
  const fs::path dir = a.out.empty() ? default_out_dir() / "ingest" : fs::path(a.out);
  Bundle b(dir);
  Json& m = b.manifest();
  m["format"] = "mncastle-bundle";
  m["toolkit_version"] = kToolkitVersion;
  m["source"] = "ingest";
  m["nodes"] = n;
  m["samples"] = kept;
  m["series"] = names;
  m["ingest"] = {{"price_rows", rows}, {"returns", returns}, {"dropped_rows", dropped},
                 {"transform", "r_t = ln(P_t / P_{t-1}), most recent power-of-two suffix"}};
  m["payloads"] = Json::object();
  b.put_text(kValuesName, encode_values(r, names));
  b.save();
  out << "ingested " << n << " series: " << returns << " returns, kept " << kept << ", dropped " << dropped
      << " oldest rows\n";
  return kOk;
}

// ---- infer ------------------------------------------------------------------

struct InferArgs {
  std::string bundle;
  std::string spectrum = "estimated";
  std::string out;
  std::uint64_t seed = 0;
  int scales = 0;
  castle::InferConfig config;
};

const char* kind_name(metrics::EdgeKind k) { return k == metrics::EdgeKind::Directed ? "directed" : "undirected"; }

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const Bundle b = Bundle::load(a.bundle);
  const Tensor x = b.values();
  Tensor s;
  if (a.spectrum == "ground-truth") {
    s = b.get_tensor(kTruthSpectrumName);
  } else if (a.spectrum == "estimated") {
    if (!b.has(kEstimatedSpectrumName)) {
      throw CommandError(kIoFailure, "bundle has no estimated spectrum; run `spectrum --bundle " + a.bundle + "` first");
    }
    s = b.get_tensor(kEstimatedSpectrumName);
  } else {
    throw CommandError(kBadFlags, "--spectrum must be ground-truth or estimated");
  }
  if (a.scales > 0 && static_cast<std::size_t>(a.scales) < s.dim(0)) {
    const std::size_t keep = static_cast<std::size_t>(a.scales);
    const std::size_t per = s.size() / s.dim(0);
    Shape shape = s.shape();
    shape[0] = keep;
    s = Tensor(shape, std::vector<double>(s.values().begin(), s.values().begin() + keep * per));
  }
  try {
    a.config.validate();
  } catch (const Error& e) {
    throw CommandError(kBadFlags, e.what());
  }

  castle::Posterior post;
  try {
    Rng rng(a.seed, "infer");
    post = castle::train(x, s, a.config, rng);
  } catch (const std::exception& e) {
    throw CommandError(kInferenceFailed, e.what());
  }

  Json doc;
  doc["toolkit_version"] = kToolkitVersion;
  doc["bundle"] = fs::path(a.bundle).filename().string();
  doc["spectrum"] = a.spectrum;
  doc["seed"] = a.seed;
  doc["config"] = {{"iterations", a.config.iterations},
                   {"particles", a.config.particles},
                   {"inducing_fraction", a.config.inducing_fraction},
                   {"obs_scale", a.config.obs_scale},
                   {"learning_rate", a.config.adam.learning_rate},
                   {"lr_decay", a.config.adam.decay},
                   {"clip_norm", a.config.adam.clip_norm},
                   {"threshold", a.config.threshold},
                   {"level", a.config.level},
                   {"decision_samples", a.config.decision_samples},
                   {"axis_scale", a.config.axis_scale}};
  doc["nodes"] = post.nodes;
  doc["scales"] = post.scales;
  doc["samples"] = post.samples;
  doc["theta"] = post.theta;
  doc["ordering"] = post.mode.nodes();
  doc["tau_hat"] = post.tau_hat;
  doc["kernel_variance"] = post.kernel_variance;
  doc["kernel_lengthscale"] = post.kernel_lengthscale;
  doc["stationary"] = post.stationary;
  std::size_t directed = 0, undirected = 0;
  doc["edges"] = Json::array();
  for (const auto& e : post.edges) {
    (e.kind == metrics::EdgeKind::Directed ? directed : undirected) += 1;
    doc["edges"].push_back({{"scale", e.scale},
                            {"from", e.from},
                            {"to", e.to},
                            {"kind", kind_name(e.kind)},
                            {"lower_bound", e.lower_bound}});
  }
  doc["coefficients"] = Json::array();
  for (const auto& c : post.coefficients) {
    if (!c.permitted) continue;
    doc["coefficients"].push_back({{"scale", c.scale},
                                   {"from", c.from},
                                   {"to", c.to},
                                   {"mean", c.mean},
                                   {"lower", c.lower},
                                   {"upper", c.upper}});
  }
  std::optional<metrics::AdjacencyScores> scores;
  if (b.has(kAdjacencyName)) {
    const Tensor truth = b.get_tensor(kAdjacencyName);
    scores = metrics::adjacency_scores(post.graph(), truth).aggregate;
    doc["evaluation"] = {{"f1", scores->f1() ? Json(*scores->f1()) : Json()},
                         {"shd", scores->shd},
                         {"true_positives", scores->true_positives},
                         {"false_positives", scores->false_positives},
                         {"positives", scores->positives}};
  }

  const fs::path dir = a.out.empty() ? fs::path(a.bundle) / "posterior" : fs::path(a.out);
  write_file(dir / "posterior.json", doc.dump(2) + "\n");
  std::string trace = "iteration,elbo_ordering,elbo_gp\n";
  for (std::size_t i = 0; i < post.elbo1.size(); ++i) {
    trace += std::to_string(i) + "," + format_double(post.elbo1[i]) + "," + format_double(post.elbo2[i]) + "\n";
  }
  write_file(dir / "elbo.csv", trace);

  out << "ordering";
  for (std::size_t n : post.mode.nodes()) out << ' ' << n;
  out << " | tau_hat " << post.tau_hat << " | edges " << directed << " directed, " << undirected << " undirected";
  if (scores && scores->f1()) out << " | F1 " << *scores->f1();
  out << '\n';
  return kOk;
}

// ---- bench ------------------------------------------------------------------

struct BenchArgs {
  BenchPlan plan;
  std::string cells;
  int jobs = 1;
  std::string import_file;
  std::string out;
  bool quiet = false;
};

int cmd_bench(BenchArgs a, std::ostream& out) {
  try {
    a.plan.cells = a.cells.empty() ? BenchPlan::default_cells() : parse_cells(a.cells);
    a.plan.infer.validate();
  } catch (const Error& e) {
    throw CommandError(kBadFlags, e.what());
  }
  std::vector<ImportedPrediction> imports;
  if (!a.import_file.empty()) {
    Json doc;
    try {
      doc = Json::parse(read_file(a.import_file));
    } catch (const Json::exception& e) {
      throw CommandError(kIoFailure, std::string("cannot parse ") + a.import_file + ": " + e.what());
    }
    try {
      imports = parse_imports(doc);
    } catch (const Error& e) {
      throw CommandError(kBadFlags, e.what());
    }
  }
  const auto outcome = run_bench(a.plan, a.jobs, imports, !a.quiet);
  const fs::path path = a.out.empty() ? default_out_dir() / "bench.csv" : fs::path(a.out);
  write_file(path, bench_csv(outcome.rows));
  std::size_t failed = 0;
  for (const auto& r : outcome.rows) failed += r.status != "ok";
  out << "wrote " << outcome.rows.size() << " rows to " << path.string();
  if (failed) out << " (" << failed << " failed)";
  out << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiscale non-stationary causal structure learning"};
  app.name("mncastle");
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Sample an MN-DAG and its series into a bundle");
  generate->add_option("--n", gen.config.nodes, "Number of nodes")->check(CLI::Range(2, 1000));
  generate->add_option("--t", gen.config.samples, "Series length")->check(CLI::Range(2, 1 << 24));
  generate->add_option("--mu", gen.config.mu, "Multiscale level")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--tau", gen.config.tau, "Non-stationarity level")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--delta", gen.config.delta, "Edge density")->check(CLI::Range(0.0, 1.0));
  generate->add_option("--seed", gen.config.seed, "Master seed");
  generate->add_option("--kernel", gen.config.kernel, "Temporal kernel expression");
  generate->add_option("--axis-scale", gen.config.axis_scale, "GP time axis multiplier")
      ->check(CLI::PositiveNumber);
  generate->add_option("--wavelet", gen.wavelet, "Synthesis wavelet (haar, d4, d6, d8)");
  generate->add_option("--out", gen.out, "Bundle directory");

  SpectrumArgs est;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Estimate the local wavelet spectral matrix");
  spectrum_cmd->add_option("--bundle", est.bundle, "Bundle to read and update");
  spectrum_cmd->add_option("--csv", est.csv, "Values CSV (t column plus one column per series)");
  spectrum_cmd->add_option("--out", est.out, "Bundle directory when reading --csv");
  spectrum_cmd->add_option("--wavelet", est.options.wavelet, "Analysis wavelet");
  spectrum_cmd->add_option("--export-csv", est.export_csv, "Also write the estimate as long-format CSV");
  spectrum_cmd->add_option("--width", est.options.width, "Smoothing window width")->check(CLI::PositiveNumber);
  spectrum_cmd->add_option("--pd-floor", est.options.pd_floor, "Eigenvalue floor")->check(CLI::PositiveNumber);
  spectrum_cmd->add_option("--scales", est.options.scales, "Number of scales (0: log2 T)")
      ->check(CLI::NonNegativeNumber);

  IngestArgs ing;
  auto* ingest = app.add_subcommand("ingest", "Turn a price CSV into a bundle of log returns");
  ingest->add_option("--prices", ing.prices, "CSV with a date column and one column per index")->required();
  ingest->add_option("--out", ing.out, "Bundle directory");

  InferArgs inf;
  auto* infer = app.add_subcommand("infer", "Fit MN-CASTLE to a bundle");
  infer->add_option("--bundle", inf.bundle, "Bundle directory")->required();
  infer->add_option("--spectrum", inf.spectrum, "ground-truth or estimated")
      ->check(CLI::IsMember({"ground-truth", "estimated"}));
  infer->add_option("--out", inf.out, "Output directory (default <bundle>/posterior)");
  infer->add_option("--seed", inf.seed, "Inference seed");
  infer->add_option("--scales", inf.scales, "Use only the first J scales of the spectrum")
      ->check(CLI::NonNegativeNumber);
  infer->add_option("--iterations", inf.config.iterations, "SVI iterations");
  infer->add_option("--particles", inf.config.particles, "Particles per step");
  infer->add_option("--inducing-fraction", inf.config.inducing_fraction, "Inducing points as a fraction of T");
  infer->add_option("--threshold", inf.config.threshold, "Edge threshold on the time-mean |c|");
  infer->add_option("--level", inf.config.level, "Credibility level of edge decisions");
  infer->add_option("--decision-samples", inf.config.decision_samples, "Posterior draws for decisions");
  infer->add_option("--lr", inf.config.adam.learning_rate, "Adam learning rate");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run the (tau, mu) benchmark grid");
  bench_cmd->add_option("--cells", bench.cells, "Cells as \"tau,mu;tau,mu\" (default: full 3x3 grid)");
  bench_cmd->add_option("--seeds", bench.plan.seeds, "Seeds per cell")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--n", bench.plan.nodes, "Number of nodes")->check(CLI::Range(2, 1000));
  bench_cmd->add_option("--t", bench.plan.samples, "Series length")->check(CLI::Range(2, 1 << 24));
  bench_cmd->add_option("--delta", bench.plan.delta, "Edge density")->check(CLI::Range(0.0, 1.0));
  bench_cmd->add_option("--kernel", bench.plan.kernel, "Temporal kernel expression");
  bench_cmd->add_option("--wavelet", bench.plan.wavelet, "Synthesis wavelet");
  bench_cmd->add_option("--seed", bench.plan.seed, "Master seed of the plan");
  bench_cmd->add_option("--iterations", bench.plan.infer.iterations, "SVI iterations per dataset");
  bench_cmd->add_option("--particles", bench.plan.infer.particles, "Particles per step");
  bench_cmd->add_option("--ordering-draws", bench.plan.ordering_draws, "PL draws per dataset")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--jobs", bench.jobs, "Worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--import", bench.import_file, "External predictions (JSON edge lists)");
  bench_cmd->add_option("--out", bench.out, "Result CSV path");
  bench_cmd->add_flag("--quiet", bench.quiet, "No progress output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, out);
    if (spectrum_cmd->parsed()) return cmd_spectrum(est, out);
    if (ingest->parsed()) return cmd_ingest(ing, out);
    if (infer->parsed()) return cmd_infer(inf, out);
    if (bench_cmd->parsed()) return cmd_bench(bench, out);
  } catch (const CommandError& e) {
    err << "error: " << e.what() << '\n';
    return e.code;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kBadFlags;
  }
  return kBadFlags;
}

}  // namespace mncastle::cli
