#include "mncastle/spectrum.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mncastle/errors.hpp"

namespace mncastle::spectrum {

SpectralTensor raw_periodogram(const Tensor& x, const wavelet::WaveletSystem& system) {
  const Tensor d = wavelet::ndwt(x, system);  // J x T x N
  const std::size_t scales = d.dim(0);
  const std::size_t samples = d.dim(1);
  const std::size_t n = d.dim(2);
  SpectralTensor out;
  out.wavelet = system.name();
  out.values = Tensor(Shape{scales, samples, n, n});
  for (std::size_t b = 0; b < scales * samples; ++b) {
    const double* v = d.values().data() + b * n;
    double* s = out.values.values().data() + b * n * n;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) s[r * n + c] = v[r] * v[c];
  }
  return out;
}

SpectralTensor smooth(const SpectralTensor& s, std::size_t width) {
  if (width == 0) throw InvalidArgument("smoothing width must be at least 1");
  const std::size_t samples = s.samples();
  const std::size_t w = width % 2 == 0 ? width + 1 : width;
  if (width > samples || w > samples) {
    throw WidthTooLarge("smoothing width " + std::to_string(w) + " exceeds series length " + std::to_string(samples));
  }
  const std::size_t scales = s.scales();
  const std::size_t nn = s.nodes() * s.nodes();
  const std::size_t half = w / 2;
  SpectralTensor out = s;
  out.smoothing_width = w;
  std::vector<double> series(samples);
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t e = 0; e < nn; ++e) {
      for (std::size_t t = 0; t < samples; ++t) series[t] = s.values[(j * samples + t) * nn + e];
      double acc = 0.0;
      for (std::size_t d = 0; d < w; ++d) acc += series[(d + samples - half) % samples];
      for (std::size_t t = 0; t < samples; ++t) {
        out.values[(j * samples + t) * nn + e] = acc / static_cast<double>(w);
        acc += series[(t + half + 1) % samples] - series[(t + samples - half) % samples];
      }
    }
  return out;
}

SpectralTensor bias_correct(const SpectralTensor& s, const Tensor& inner_products) {
  const std::size_t scales = s.scales();
  if (inner_products.rank() != 2 || inner_products.dim(0) != scales || inner_products.dim(1) != scales) {
    throw ShapeMismatch("inner-product matrix must be J x J");
  }
  Eigen::MatrixXd a(scales, scales);
  for (std::size_t r = 0; r < scales; ++r)
    for (std::size_t c = 0; c < scales; ++c) a(r, c) = inner_products[r * scales + c];
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw SingularMatrix("inner-product matrix is singular");
  const Eigen::MatrixXd inv = lu.inverse();

  const std::size_t per_scale = s.samples() * s.nodes() * s.nodes();
  SpectralTensor out = s;
  out.bias_corrected = true;
  for (std::size_t i = 0; i < per_scale; ++i)
    for (std::size_t r = 0; r < scales; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < scales; ++c) acc += inv(r, c) * s.values[c * per_scale + i];
      out.values[r * per_scale + i] = acc;
    }
  return out;
}

SpectralTensor regularize_pd(const SpectralTensor& s, double floor) {
  if (!(floor > 0.0)) throw InvalidArgument("PD floor must be positive");
  const std::size_t n = s.nodes();
  const std::size_t batch = s.scales() * s.samples();
  SpectralTensor out = s;
  out.pd_floor = floor;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  Eigen::MatrixXd m(n, n);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = s.values.values().data() + b * n * n;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) m(r, c) = 0.5 * (src[r * n + c] + src[c * n + r]);
    solver.compute(m);
    Eigen::VectorXd ev = solver.eigenvalues();
    if (ev.minCoeff() >= floor) {
      double* dst = out.values.values().data() + b * n * n;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) dst[r * n + c] = m(r, c);
      continue;
    }
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), floor);
    const Eigen::MatrixXd& v = solver.eigenvectors();
    const Eigen::MatrixXd rebuilt = v * ev.asDiagonal() * v.transpose();
    double* dst = out.values.values().data() + b * n * n;
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) dst[r * n + c] = 0.5 * (rebuilt(r, c) + rebuilt(c, r));
  }
  return out;
}

SpectralTensor estimate(const Tensor& x, const EstimateOptions& options) {
  if (x.rank() != 2) throw ShapeMismatch("expected an N x T array");
  const std::size_t samples = x.dim(1);
  if (!wavelet::is_power_of_two(samples)) {
    throw BadLength("series length " + std::to_string(samples) + " is not a power of two");
  }
  const int scales = options.scales > 0 ? options.scales : wavelet::floor_log2(samples);
  const auto system = wavelet::build_system(options.wavelet, scales);
  const auto a = wavelet::inner_product_matrix(wavelet::autocorr(system), scales);
  SpectralTensor s = raw_periodogram(x, system);
  s = smooth(s, options.width);
  s = bias_correct(s, a);
  return regularize_pd(s, options.pd_floor);
}

double max_time_variation(const Tensor& spectral) {
  const std::size_t scales = spectral.dim(0);
  const std::size_t samples = spectral.dim(1);
  const std::size_t nn = spectral.dim(2) * spectral.dim(3);
  double worst = 0.0;
  for (std::size_t j = 0; j < scales; ++j)
    for (std::size_t t = 1; t < samples; ++t)
      for (std::size_t e = 0; e < nn; ++e)
        worst = std::max(worst, std::abs(spectral[(j * samples + t) * nn + e] - spectral[(j * samples) * nn + e]));
  return worst;
}

}  // namespace mncastle::spectrum
