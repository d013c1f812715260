#include "mncastle/synth.hpp"

#include <cmath>

#include "mncastle/errors.hpp"

namespace mncastle::synth {

namespace {

// Filter folded onto the circle of length T, keeping only nonzero taps.
std::vector<std::pair<std::size_t, double>> fold(const std::vector<double>& psi, std::size_t samples) {
  std::vector<double> folded(samples, 0.0);
  for (std::size_t k = 0; k < psi.size(); ++k) folded[k % samples] += psi[k];
  std::vector<std::pair<std::size_t, double>> taps;
  for (std::size_t s = 0; s < samples; ++s)
    if (folded[s] != 0.0) taps.emplace_back(s, folded[s]);
  return taps;
}

}  // namespace

Tensor generate(const Tensor& mixing, const wavelet::WaveletSystem& system, Rng& rng) {
  if (mixing.rank() != 4 || mixing.dim(2) != mixing.dim(3)) {
    throw ShapeMismatch("mixing tensor must be J x T x N x N");
  }
  const std::size_t scales = mixing.dim(0);
  const std::size_t samples = mixing.dim(1);
  const std::size_t n = mixing.dim(2);
  if (scales > static_cast<std::size_t>(system.max_scale())) {
    throw ShapeMismatch("mixing tensor has more scales than the wavelet system");
  }
  Tensor x(Shape{n, samples});
  std::vector<double> y(n * samples);  // node-major M z for one scale
  std::vector<double> z(n);
  for (std::size_t j = 0; j < scales; ++j) {
    for (std::size_t k = 0; k < samples; ++k) {
      for (double& v : z) v = rng.normal();
      const double* m = mixing.values().data() + (j * samples + k) * n * n;
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += m[r * n + c] * z[c];
        y[r * samples + k] = acc;
      }
    }
    const auto taps = fold(system.psi(static_cast<int>(j + 1)), samples);
    for (std::size_t r = 0; r < n; ++r) {
      double* xr = x.values().data() + r * samples;
      const double* yr = y.data() + r * samples;
      for (const auto& [shift, w] : taps)
        for (std::size_t t = 0; t < samples; ++t) xr[t] += w * yr[(t + samples - shift) % samples];
    }
  }
  return x;
}

std::vector<double> autocovariance(std::span<const double> x, int max_lag) {
  const std::size_t len = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(len);
  std::vector<double> out(static_cast<std::size_t>(max_lag) + 1, 0.0);
  for (std::size_t l = 0; l < out.size() && l < len; ++l) {
    double acc = 0.0;
    for (std::size_t t = 0; t + l < len; ++t) acc += (x[t] - mean) * (x[t + l] - mean);
    out[l] = acc / static_cast<double>(len);
  }
  return out;
}

std::vector<double> autocorrelation(std::span<const double> x, int max_lag) {
  auto acov = autocovariance(x, max_lag);
  const double c0 = acov[0];
  for (double& v : acov) v = c0 > 0.0 ? v / c0 : 0.0;
  acov[0] = 1.0;
  return acov;
}

StatsReport stats(const Tensor& values, int max_lag) {
  if (values.rank() != 2) throw ShapeMismatch("stats expects an N x T array");
  const std::size_t n = values.dim(0);
  const std::size_t samples = values.dim(1);
  if (samples < 8) throw InvalidArgument("stats needs at least 8 samples");
  StatsReport report;
  report.max_lag = max_lag;
  report.band = 1.96 / std::sqrt(static_cast<double>(samples));
  const double tn = static_cast<double>(samples);
  for (std::size_t r = 0; r < n; ++r) {
    std::span<const double> x(values.values().data() + r * samples, samples);
    SeriesStats s;
    for (double v : x) s.mean += v;
    s.mean /= tn;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
      const double d = v - s.mean;
      m2 += d * d;
      m3 += d * d * d;
      m4 += d * d * d * d;
    }
    m2 /= tn;
    m3 /= tn;
    m4 /= tn;
    s.variance = m2;
    if (m2 > 0.0) {
      s.skewness = m3 / std::pow(m2, 1.5);
      s.kurtosis = m4 / (m2 * m2);
    } else {
      s.kurtosis = 3.0;
    }
    const double ek = s.kurtosis - 3.0;
    s.jarque_bera = tn / 6.0 * (s.skewness * s.skewness + ek * ek / 4.0);
    s.jb_pvalue = std::exp(-s.jarque_bera / 2.0);
    s.acf = autocorrelation(x, max_lag);
    std::vector<double> ax(x.begin(), x.end());
    for (double& v : ax) v = std::abs(v);
    s.abs_acf = autocorrelation(ax, max_lag);
    report.series.push_back(std::move(s));
  }
  return report;
}

}  // namespace mncastle::synth
