#include "mncastle/wavelet.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>

#include "mncastle/errors.hpp"

namespace mncastle::wavelet {

namespace {

// Extremal-phase Daubechies low-pass coefficients (sum = sqrt 2, unit norm).
const std::vector<double> kHaar = {0.70710678118654757, 0.70710678118654757};
const std::vector<double> kD4 = {0.48296291314453416, 0.83651630373780794, 0.22414386804201339,
                                 -0.12940952255126037};
const std::vector<double> kD6 = {0.33267055295008263,  0.80689150931109255,  0.45987750211849154,
                                 -0.13501102001025458, -0.085441273882026658, 0.035226291885709533};
const std::vector<double> kD8 = {0.23037781330889651,   0.71484657055291567,  0.63088076792985892,
                                 -0.027983769416859854, -0.18703481171909309, 0.030841381835560764,
                                 0.032883011666885197,  -0.010597401785069032};

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::vector<double> upsample(const std::vector<double>& f, std::size_t factor) {
  std::vector<double> out((f.size() - 1) * factor + 1, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) out[i * factor] = f[i];
  return out;
}

}  // namespace

const std::vector<double>& daubechies_lowpass(int filter_length) {
  switch (filter_length) {
    case 2:
      return kHaar;
    case 4:
      return kD4;
    case 6:
      return kD6;
    case 8:
      return kD8;
    default:
      throw UnsupportedFamily("Daubechies filter length " + std::to_string(filter_length) +
                              " is not supported (use 2, 4, 6 or 8)");
  }
}

std::string WaveletSystem::name() const {
  if (family == Family::Haar || filter_length == 2) return "haar";
  return "d" + std::to_string(filter_length);
}

WaveletSystem build_system(Family family, int max_scale, int filter_length) {
  if (max_scale < 1) throw InvalidArgument("wavelet max scale must be >= 1");
  const int f = family == Family::Haar ? 2 : filter_length;
  const std::vector<double>& h = daubechies_lowpass(f);
  std::vector<double> g(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    g[k] = (k % 2 == 0 ? 1.0 : -1.0) * h[h.size() - 1 - k];
  }
  WaveletSystem sys;
  sys.family = f == 2 ? Family::Haar : Family::Daubechies;
  sys.filter_length = f;
  std::vector<double> low = {1.0};
  for (int j = 1; j <= max_scale; ++j) {
    const std::size_t factor = std::size_t{1} << (j - 1);
    sys.filters.push_back(convolve(low, upsample(g, factor)));
    low = convolve(low, upsample(h, factor));
  }
  return sys;
}

WaveletSystem build_system(std::string_view name, int max_scale) {
  std::string n(name);
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "haar") return build_system(Family::Haar, max_scale);
  std::string digits;
  if (n.rfind("daub", 0) == 0) {
    digits = n.substr(4);
  } else if (n.rfind("db", 0) == 0) {
    // db<k> is the k-vanishing-moment naming: 2k taps.
    const std::string k = n.substr(2);
    if (k.empty() || !std::all_of(k.begin(), k.end(), ::isdigit)) throw UnsupportedFamily("unknown wavelet '" + n + "'");
    return build_system(Family::Daubechies, max_scale, 2 * std::stoi(k));
  } else if (n.rfind('d', 0) == 0) {
    digits = n.substr(1);
  }
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
    throw UnsupportedFamily("unknown wavelet '" + n + "'");
  }
  return build_system(Family::Daubechies, max_scale, std::stoi(digits));
}

double AutocorrWavelet::at(int j, long lag) const {
  const auto& v = lags_.at(static_cast<std::size_t>(j - 1));
  const std::size_t l = static_cast<std::size_t>(lag < 0 ? -lag : lag);
  return l < v.size() ? v[l] : 0.0;
}

AutocorrWavelet autocorr(const WaveletSystem& system) {
  std::vector<std::vector<double>> out;
  for (const auto& psi : system.filters) {
    std::vector<double> lags(psi.size(), 0.0);
    for (std::size_t l = 0; l < psi.size(); ++l) {
      double s = 0.0;
      for (std::size_t k = l; k < psi.size(); ++k) s += psi[k] * psi[k - l];
      lags[l] = s;
    }
    out.push_back(std::move(lags));
  }
  return AutocorrWavelet(std::move(out));
}

Tensor inner_product_matrix(const AutocorrWavelet& acw, int max_scale) {
  if (max_scale < 1) throw InvalidArgument("inner product matrix needs J >= 1");
  if (max_scale > acw.max_scale()) throw InvalidArgument("autocorrelation wavelet has fewer scales than requested");
  const std::size_t jn = static_cast<std::size_t>(max_scale);
  Tensor a(Shape{jn, jn});
  for (int j = 1; j <= max_scale; ++j)
    for (int k = j; k <= max_scale; ++k) {
      const long reach = std::min(acw.max_lag(j), acw.max_lag(k));
      double s = acw.at(j, 0) * acw.at(k, 0);
      for (long l = 1; l <= reach; ++l) s += 2.0 * acw.at(j, l) * acw.at(k, l);
      a.at({static_cast<std::size_t>(j - 1), static_cast<std::size_t>(k - 1)}) = s;
      a.at({static_cast<std::size_t>(k - 1), static_cast<std::size_t>(j - 1)}) = s;
    }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(
      a.values().data(), static_cast<Eigen::Index>(jn), static_cast<Eigen::Index>(jn));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw SingularMatrix("autocorrelation inner-product matrix is ill-conditioned (eigenvalues " + std::to_string(lo) +
                         ".." + std::to_string(hi) + ")");
  }
  return a;
}

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

int floor_log2(std::size_t n) noexcept {
  int p = -1;
  while (n) {
    n >>= 1;
    ++p;
  }
  return p;
}

Tensor ndwt(const Tensor& x, const WaveletSystem& system) {
  if (x.rank() != 2) throw ShapeMismatch("ndwt expects an N x T array");
  const std::size_t n = x.dim(0);
  const std::size_t t_len = x.dim(1);
  const int jmax = system.max_scale();
  if (!is_power_of_two(t_len) || floor_log2(t_len) < jmax) {
    throw BadLength("series length " + std::to_string(t_len) + " must be a power of two 2^p with p >= " +
                    std::to_string(jmax));
  }
  Tensor d(Shape{static_cast<std::size_t>(jmax), t_len, n});
  for (int j = 1; j <= jmax; ++j) {
    // Fold the filter onto the circle first; long filters wrap.
    std::vector<double> folded(t_len, 0.0);
    const auto& psi = system.psi(j);
    for (std::size_t k = 0; k < psi.size(); ++k) folded[k % t_len] += psi[k];
    std::vector<std::pair<std::size_t, double>> taps;
    for (std::size_t k = 0; k < t_len; ++k)
      if (folded[k] != 0.0) taps.emplace_back(k, folded[k]);
    for (std::size_t s = 0; s < n; ++s) {
      const double* row = x.values().data() + s * t_len;
      for (std::size_t t = 0; t < t_len; ++t) {
        double acc = 0.0;
        for (const auto& [k, w] : taps) acc += w * row[(t + t_len - k) % t_len];
        d.at({static_cast<std::size_t>(j - 1), t, s}) = acc;
      }
    }
  }
  return d;
}

}  // namespace mncastle::wavelet
