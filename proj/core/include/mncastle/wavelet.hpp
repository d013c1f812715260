#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mncastle/tensor.hpp"

namespace mncastle::wavelet {

enum class Family { Haar, Daubechies };

/// Non-decimated wavelet filters psi_1..psi_J, each of unit l2 norm.
///
/// Scale j is the cascade h^(0) * h^(1) * ... * h^(j-2) * g^(j-1), where
/// h^(s) is the low-pass filter upsampled by 2^s and g the matching
/// high-pass filter; its support is (2^j - 1)(F - 1) + 1 taps.
struct WaveletSystem {
  Family family = Family::Haar;
  int filter_length = 2;
  std::vector<std::vector<double>> filters;

  int max_scale() const noexcept { return static_cast<int>(filters.size()); }
  /// Filter of scale j (1-based).
  const std::vector<double>& psi(int j) const { return filters.at(static_cast<std::size_t>(j - 1)); }
  /// "haar", "d4", "d6" or "d8".
  std::string name() const;
};

/// `filter_length` is ignored for Haar; Daubechies accepts 4, 6 and 8
/// (and 2, which is Haar). Throws UnsupportedFamily otherwise.
WaveletSystem build_system(Family family, int max_scale, int filter_length = 2);
/// Accepts "haar", "d2", "d4", "d6", "d8" (and "daub<F>").
WaveletSystem build_system(std::string_view name, int max_scale);

/// Low-pass Daubechies filter with F taps, summing to sqrt(2).
const std::vector<double>& daubechies_lowpass(int filter_length);

/// Discrete autocorrelation wavelets Psi_j[l] = sum_k psi_j[k] psi_j[k - l].
class AutocorrWavelet {
 public:
  AutocorrWavelet() = default;
  explicit AutocorrWavelet(std::vector<std::vector<double>> nonnegative_lags)
      : lags_(std::move(nonnegative_lags)) {}

  int max_scale() const noexcept { return static_cast<int>(lags_.size()); }
  /// Psi_j[lag]; zero beyond the support, symmetric in lag.
  double at(int j, long lag) const;
  /// Largest lag with a possibly nonzero value at scale j.
  long max_lag(int j) const { return static_cast<long>(lags_.at(static_cast<std::size_t>(j - 1)).size()) - 1; }

 private:
  std::vector<std::vector<double>> lags_;
};

AutocorrWavelet autocorr(const WaveletSystem& system);

/// J x J matrix A_jk = sum_l Psi_j[l] Psi_k[l]. Throws SingularMatrix when the
/// condition number exceeds 1e12.
Tensor inner_product_matrix(const AutocorrWavelet& acw, int max_scale);

/// Non-decimated transform of an N x T array: returns J x T x N coefficients
/// d_j[t] = sum_k psi_j[k] x[(t - k) mod T]. T must be a power of two with
/// log2(T) >= J; throws BadLength otherwise.
Tensor ndwt(const Tensor& x, const WaveletSystem& system);

bool is_power_of_two(std::size_t n) noexcept;
/// floor(log2(n)) for n >= 1.
int floor_log2(std::size_t n) noexcept;

}  // namespace mncastle::wavelet
