#pragma once

#include <cstddef>
#include <vector>

#include "mncastle/rng.hpp"
#include "mncastle/tensor.hpp"
#include "mncastle/wavelet.hpp"

namespace mncastle::synth {

/// Draws N x T series X[t] = sum_j sum_k M[j][k] z_{j,k} psi_j[(t - k) mod T]
/// from a J x T x N x N mixing tensor. The z_{j,k} are standard normal
/// N-vectors taken from `rng` in (j, k, n) order. J must not exceed the
/// system's number of scales.
Tensor generate(const Tensor& mixing, const wavelet::WaveletSystem& system, Rng& rng);

struct SeriesStats {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  /// Raw (non-excess) kurtosis; 3 for a Gaussian.
  double kurtosis = 0.0;
  double jarque_bera = 0.0;
  double jb_pvalue = 1.0;
  /// acf[l] for l = 0..max_lag, acf[0] = 1.
  std::vector<double> acf;
  std::vector<double> abs_acf;

  double excess_kurtosis() const { return kurtosis - 3.0; }
};

struct StatsReport {
  std::vector<SeriesStats> series;
  int max_lag = 40;
  /// Half-width of the 95% white-noise band, 1.96 / sqrt(T).
  double band = 0.0;
};

/// Sample autocorrelation of `x` at lags 0..max_lag.
std::vector<double> autocorrelation(std::span<const double> x, int max_lag);
/// Biased sample autocovariance (divisor T) at lags 0..max_lag.
std::vector<double> autocovariance(std::span<const double> x, int max_lag);

/// Moments, Jarque-Bera test and ACFs of every row of an N x T array.
/// Throws InvalidArgument when T < 8.
StatsReport stats(const Tensor& values, int max_lag = 40);

}  // namespace mncastle::synth
