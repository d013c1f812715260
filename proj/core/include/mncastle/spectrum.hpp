#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "mncastle/tensor.hpp"
#include "mncastle/wavelet.hpp"

namespace mncastle::spectrum {

/// Local wavelet spectral matrix estimate, J x T x N x N, with the steps
/// that produced it.
struct SpectralTensor {
  Tensor values;
  std::string wavelet;
  /// Effective (odd) smoothing width; 0 when unsmoothed.
  std::size_t smoothing_width = 0;
  bool bias_corrected = false;
  /// Eigenvalue floor of the PD regularization, if applied.
  std::optional<double> pd_floor;

  std::size_t scales() const { return values.dim(0); }
  std::size_t samples() const { return values.dim(1); }
  std::size_t nodes() const { return values.dim(2); }
};

inline constexpr double kDefaultPdFloor = 1e-6;
inline constexpr std::size_t kDefaultWidth = 22;

/// I_{j,t} = d_j[t] d_j[t]^T from the non-decimated transform of an N x T
/// array. Throws BadLength unless T is a power of two with J <= log2 T.
SpectralTensor raw_periodogram(const Tensor& x, const wavelet::WaveletSystem& system);

/// Centered circular moving average over time. Even widths are rounded up to
/// the next odd integer. Throws WidthTooLarge when the width exceeds T and
/// InvalidArgument when it is zero.
SpectralTensor smooth(const SpectralTensor& s, std::size_t width);

/// Left-multiplies every across-scale J-vector by A^{-1}. Throws
/// SingularMatrix when A cannot be factored.
SpectralTensor bias_correct(const SpectralTensor& s, const Tensor& inner_products);

/// Clamps the eigenvalues of every slice to at least `floor` and rebuilds a
/// symmetric matrix.
SpectralTensor regularize_pd(const SpectralTensor& s, double floor = kDefaultPdFloor);

struct EstimateOptions {
  std::string wavelet = "d8";
  std::size_t width = kDefaultWidth;
  double pd_floor = kDefaultPdFloor;
  /// Number of scales; 0 selects floor(log2 T).
  int scales = 0;
};

/// periodogram -> smooth -> bias correction -> PD regularization.
SpectralTensor estimate(const Tensor& x, const EstimateOptions& options);

/// Largest absolute deviation of any entry from its value at t = 0.
double max_time_variation(const Tensor& spectral);

}  // namespace mncastle::spectrum
