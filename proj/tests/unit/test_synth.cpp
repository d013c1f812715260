#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mncastle/errors.hpp"
#include "mncastle/synth.hpp"
#include "test_util.hpp"

namespace mncastle::synth {
namespace {

/// Constant J x T x N x N mixing tensor repeating `slice`.
Tensor constant_mixing(std::size_t scales, std::size_t samples, const Tensor& slice) {
  const std::size_t nn = slice.size();
  Tensor m(Shape{scales, samples, slice.dim(0), slice.dim(1)});
  for (std::size_t b = 0; b < scales * samples; ++b)
    for (std::size_t e = 0; e < nn; ++e) m[b * nn + e] = slice[e];
  return m;
}

double cross_cov(const Tensor& x, std::size_t a, std::size_t b, std::size_t lag) {
  const std::size_t t = x.dim(1);
  double acc = 0.0;
  for (std::size_t s = 0; s < t; ++s) acc += x[a * t + s] * x[b * t + (s + lag) % t];
  return acc / static_cast<double>(t);
}

TEST(Generate, HaarMovingAverage) {
  const auto sys = wavelet::build_system(wavelet::Family::Haar, 1);
  Rng rng(1, "ma1");
  const std::size_t t = 1 << 14;
  const Tensor x = generate(constant_mixing(1, t, Tensor::identity(1)), sys, rng);
  const auto acov = autocovariance(x.values(), 5);
  EXPECT_NEAR(acov[0], 1.0, 0.05);
  EXPECT_NEAR(acov[1], -0.5, 0.05);
  for (std::size_t l = 2; l <= 5; ++l) EXPECT_NEAR(acov[l], 0.0, 0.05) << l;
}

TEST(Generate, ZeroMixingGivesZeroSeries) {
  const auto sys = wavelet::build_system("d8", 3);
  Rng rng(2, "zero");
  const Tensor x = generate(Tensor(Shape{3, 64, 2, 2}), sys, rng);
  for (double v : x.values()) EXPECT_EQ(v, 0.0);
}

TEST(Generate, MeanNearZero) {
  const auto sys = wavelet::build_system("d4", 3);
  Rng rng(3, "mean");
  const std::size_t t = 1 << 13;
  const Tensor x = generate(constant_mixing(3, t, Tensor::identity(2)), sys, rng);
  for (std::size_t r = 0; r < 2; ++r) {
    double mean = 0.0;
    for (std::size_t s = 0; s < t; ++s) mean += x[r * t + s];
    EXPECT_NEAR(mean / static_cast<double>(t), 0.0, 3.0 / std::sqrt(static_cast<double>(t)));
  }
}

TEST(Generate, MatchesDirectSum) {
  const std::size_t scales = 2, t = 16, n = 3;
  const auto sys = wavelet::build_system("d4", scales);
  Rng setup(4, "mix");
  Tensor mixing(Shape{scales, t, n, n});
  for (double& v : mixing.values()) v = setup.normal();
  Rng a(5, "draws");
  const Tensor x = generate(mixing, sys, a);

  Rng b(5, "draws");
  std::vector<double> z(scales * t * n);
  for (double& v : z) v = b.normal();
  Tensor oracle(Shape{n, t});
  for (std::size_t j = 0; j < scales; ++j) {
    const auto& psi = sys.psi(static_cast<int>(j + 1));
    for (std::size_t k = 0; k < t; ++k)
      for (std::size_t r = 0; r < n; ++r) {
        double mz = 0.0;
        for (std::size_t c = 0; c < n; ++c) mz += mixing[((j * t + k) * n + r) * n + c] * z[(j * t + k) * n + c];
        for (std::size_t s = 0; s < t; ++s)
          for (std::size_t q = 0; q < psi.size(); ++q)
            if ((k + q) % t == s) oracle[r * t + s] += mz * psi[q];
      }
  }
  EXPECT_LE(max_abs_diff(x, oracle), 1e-12);
}

TEST(Generate, AutocovarianceMatchesWaveletSum) {
  const std::size_t scales = 2, t = 1 << 14;
  const auto sys = wavelet::build_system(wavelet::Family::Haar, scales);
  const auto acw = wavelet::autocorr(sys);
  Rng rng(6, "acv");
  const Tensor x = generate(constant_mixing(scales, t, Tensor::identity(1)), sys, rng);
  for (long lag = 0; lag <= 4; ++lag) {
    const double expected = acw.at(1, lag) + acw.at(2, lag);
    EXPECT_NEAR(cross_cov(x, 0, 0, static_cast<std::size_t>(lag)), expected, 0.06) << lag;
  }
}

TEST(Generate, CrossCovarianceIsSpectrum) {
  const std::size_t t = 1 << 14;
  const auto sys = wavelet::build_system(wavelet::Family::Haar, 1);
  Rng rng(7, "cross");
  const Tensor m = Tensor::from_rows({{1.0, 0.0}, {0.5, 1.0}});
  const Tensor x = generate(constant_mixing(1, t, m), sys, rng);
  EXPECT_NEAR(cross_cov(x, 0, 0, 0), 1.0, 0.05);
  EXPECT_NEAR(cross_cov(x, 0, 1, 0), 0.5, 0.05);
  EXPECT_NEAR(cross_cov(x, 1, 1, 0), 1.25, 0.06);
}

TEST(Generate, RejectsTooManyScales) {
  const auto sys = wavelet::build_system(wavelet::Family::Haar, 1);
  Rng rng(8, "bad");
  EXPECT_THROW(generate(Tensor(Shape{2, 8, 1, 1}), sys, rng), ShapeMismatch);
}

TEST(Stats, ImpulseKurtosis) {
  Tensor x(Shape{1, 100});
  x[37] = 1.0;
  const auto report = stats(x, 5);
  const double p = 0.01;
  EXPECT_NEAR(report.series[0].kurtosis, (1 - 3 * p + 3 * p * p) / (p * (1 - p)), 1e-9);
  EXPECT_NEAR(report.series[0].jb_pvalue, 0.0, 1e-12);
}

TEST(Stats, JarqueBeraUnderNull) {
  Rng rng(9, "jb");
  const std::size_t trials = 100, t = 10000;
  Tensor x(Shape{trials, t});
  for (double& v : x.values()) v = rng.normal();
  const auto report = stats(x, 1);
  int accepted = 0;
  for (const auto& s : report.series) {
    EXPECT_NEAR(s.jb_pvalue, std::exp(-s.jarque_bera / 2.0), 1e-15);
    accepted += s.jb_pvalue > 0.01;
  }
  EXPECT_GE(accepted, 95);
}

TEST(Stats, WhiteNoiseAcfStaysInBand) {
  Rng rng(10, "acf");
  const std::size_t trials = 100, t = 1000;
  Tensor x(Shape{trials, t});
  for (double& v : x.values()) v = rng.normal();
  const auto report = stats(x, 40);
  EXPECT_NEAR(report.band, 1.96 / std::sqrt(1000.0), 1e-15);
  std::vector<double> inside;
  for (const auto& s : report.series) {
    EXPECT_EQ(s.acf[0], 1.0);
    int count = 0;
    for (int l = 1; l <= 40; ++l) count += std::abs(s.acf[static_cast<std::size_t>(l)]) <= report.band;
    inside.push_back(count);
  }
  std::nth_element(inside.begin(), inside.begin() + 50, inside.end());
  EXPECT_GE(inside[50], 36.0);
}

TEST(Stats, ConstantSeries) {
  const auto report = stats(Tensor(Shape{1, 16}, 2.0), 3);
  EXPECT_EQ(report.series[0].variance, 0.0);
  EXPECT_EQ(report.series[0].kurtosis, 3.0);
}

TEST(Stats, RejectsShortSeries) { EXPECT_THROW(stats(Tensor(Shape{1, 7}), 3), InvalidArgument); }

}  // namespace
}  // namespace mncastle::synth
