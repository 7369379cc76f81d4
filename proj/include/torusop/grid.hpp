#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "torusop/fft.hpp"

namespace torusop {

struct NonHermitianInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidResolutionPair : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateReference : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Grid points per axis on [0,2pi)^2. Even n >= 4 keeps Nyquist handling
// unambiguous.
struct Resolution {
  int n = 0;

  Resolution() = default;
  explicit Resolution(int n_) : n(n_) {
    if (n < 4 || n % 2 != 0)
      throw std::invalid_argument("Resolution: n must be even and >= 4, got " +
                                  std::to_string(n));
  }
  bool operator==(const Resolution& o) const { return n == o.n; }
  bool operator!=(const Resolution& o) const { return n != o.n; }
};

// Real 2-channel sample of a 1-form's frame coefficients on the periodic
// grid. Layout: channel plane 0 then channel plane 1, each n*n row-major with
// the second axis fastest.
struct GridField {
  Resolution res;
  std::vector<double> data;

  GridField() = default;
  explicit GridField(Resolution r)
      : res(r), data(static_cast<size_t>(2) * r.n * r.n, 0.0) {}

  double& at(int ch, int i, int j) {
    return data[(static_cast<size_t>(ch) * res.n + i) * res.n + j];
  }
  double at(int ch, int i, int j) const {
    return data[(static_cast<size_t>(ch) * res.n + i) * res.n + j];
  }
  size_t size() const { return data.size(); }
};

// Complex Fourier coefficients of a GridField, stored in DFT index order
// (index m in [0,n) maps to wavenumber k = m for m < n/2, k = m - n
// otherwise). Hermitian-symmetric per channel when it comes from a real field.
struct SpectralField {
  Resolution res;
  std::vector<std::complex<double>> coeffs;

  SpectralField() = default;
  explicit SpectralField(Resolution r)
      : res(r), coeffs(static_cast<size_t>(2) * r.n * r.n) {}

  std::complex<double>& at(int ch, int m1, int m2) {
    return coeffs[(static_cast<size_t>(ch) * res.n + m1) * res.n + m2];
  }
  std::complex<double> at(int ch, int m1, int m2) const {
    return coeffs[(static_cast<size_t>(ch) * res.n + m1) * res.n + m2];
  }

  static int wavenumber(int m, int n) { return m < n / 2 ? m : m - n; }
  static int index_of(int k, int n) { return k >= 0 ? k : k + n; }
};

// Constant SPD metric tensor M, its inverse A and the resolvent shift alpha.
// The spectral symbol is lambda_g(k) = k^T A k.
struct MetricSpec {
  // Row-major 2x2 entries.
  double m[4] = {1, 0, 0, 1};
  double a[4] = {1, 0, 0, 1};
  double alpha = 1.0;

  static MetricSpec identity(double alpha) {
    MetricSpec ms;
    ms.alpha = alpha;
    ms.validate();
    return ms;
  }

  // Builds from the metric tensor entries (m12 = m21); computes A = M^{-1}.
  static MetricSpec from_matrix(double m11, double m12, double m22,
                                double alpha) {
    MetricSpec ms;
    ms.m[0] = m11;
    ms.m[1] = m12;
    ms.m[2] = m12;
    ms.m[3] = m22;
    double det = m11 * m22 - m12 * m12;
    if (det <= 0.0 || m11 <= 0.0)
      throw std::invalid_argument("MetricSpec: metric must be SPD");
    ms.a[0] = m22 / det;
    ms.a[1] = -m12 / det;
    ms.a[2] = -m12 / det;
    ms.a[3] = m11 / det;
    ms.alpha = alpha;
    ms.validate();
    return ms;
  }

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("MetricSpec: alpha <= 0");
    if (m[1] != m[2]) throw std::invalid_argument("MetricSpec: M not symmetric");
    double tr = m[0] + m[3], det = m[0] * m[3] - m[1] * m[2];
    if (!(tr > 0.0 && det > 0.0))
      throw std::invalid_argument("MetricSpec: M not positive definite");
    // a*m must be the identity to within 1e-12.
    double e00 = a[0] * m[0] + a[1] * m[2] - 1.0;
    double e01 = a[0] * m[1] + a[1] * m[3];
    double e10 = a[2] * m[0] + a[3] * m[2];
    double e11 = a[2] * m[1] + a[3] * m[3] - 1.0;
    double err = std::max(std::max(std::abs(e00), std::abs(e01)),
                          std::max(std::abs(e10), std::abs(e11)));
    if (err > 1e-12)
      throw std::invalid_argument("MetricSpec: a is not the inverse of m");
  }

  double symbol(int k1, int k2) const {
    return k1 * (a[0] * k1 + a[1] * k2) + k2 * (a[2] * k1 + a[3] * k2);
  }
};

struct SobolevIndex {
  double r = 0.0;
  SobolevIndex() = default;
  explicit SobolevIndex(double r_) : r(r_) {
    if (!std::isfinite(r))
      throw std::invalid_argument("SobolevIndex: r must be finite");
  }
};

inline double spectral_symbol(int k1, int k2, const MetricSpec& metric) {
  return metric.symbol(k1, k2);
}

// Forward transform, normalized so that coeffs(k) = (1/n^2) sum_x f(x)
// exp(-i k.x); coeffs(0,0) is the field mean.
inline SpectralField fft_forward(const GridField& f) {
  const int n = f.res.n;
  SpectralField out(f.res);
  std::vector<std::complex<double>> buf(static_cast<size_t>(n) * n);
  const double scale = 1.0 / (static_cast<double>(n) * n);
  for (int ch = 0; ch < 2; ++ch) {
    for (size_t i = 0; i < buf.size(); ++i)
      buf[i] = f.data[static_cast<size_t>(ch) * n * n + i];
    FftEngine::transform(buf.data(), n, FFTW_FORWARD);
    for (size_t i = 0; i < buf.size(); ++i)
      out.coeffs[static_cast<size_t>(ch) * n * n + i] = buf[i] * scale;
  }
  return out;
}

// Inverse transform (no normalization factor): f(x) = sum_k coeffs(k)
// exp(+i k.x). Throws NonHermitianInput if the imaginary residue exceeds
// 1e-10 of the field norm.
inline GridField fft_inverse(const SpectralField& F) {
  const int n = F.res.n;
  GridField out(F.res);
  std::vector<std::complex<double>> buf(static_cast<size_t>(n) * n);
  double imag_sq = 0.0, norm_sq = 0.0;
  for (int ch = 0; ch < 2; ++ch) {
    for (size_t i = 0; i < buf.size(); ++i)
      buf[i] = F.coeffs[static_cast<size_t>(ch) * n * n + i];
    FftEngine::transform(buf.data(), n, FFTW_BACKWARD);
    for (size_t i = 0; i < buf.size(); ++i) {
      imag_sq += buf[i].imag() * buf[i].imag();
      norm_sq += std::norm(buf[i]);
      out.data[static_cast<size_t>(ch) * n * n + i] = buf[i].real();
    }
  }
  if (norm_sq > 0.0 && std::sqrt(imag_sq) > 1e-10 * std::sqrt(norm_sq))
    throw NonHermitianInput("fft_inverse: imaginary residue " +
                            std::to_string(std::sqrt(imag_sq / norm_sq)) +
                            " relative to field norm");
  return out;
}

// L2 norm in the mean-square convention: ||f||^2 = (1/n^2) sum_x sum_ch f^2.
// Under the fft_forward normalization, Parseval reads
// ||f||^2 = sum_k sum_ch |coeffs(k)|^2.
inline double l2_norm(const GridField& f) {
  double s = 0.0;
  for (double v : f.data) s += v * v;
  return std::sqrt(s / (static_cast<double>(f.res.n) * f.res.n));
}

inline double sobolev_norm(const GridField& f, SobolevIndex r,
                           const MetricSpec& metric) {
  SpectralField F = fft_forward(f);
  const int n = f.res.n;
  double s = 0.0;
  for (int m1 = 0; m1 < n; ++m1) {
    int k1 = SpectralField::wavenumber(m1, n);
    for (int m2 = 0; m2 < n; ++m2) {
      int k2 = SpectralField::wavenumber(m2, n);
      double w = std::pow(1.0 + metric.symbol(k1, k2), r.r);
      s += w * (std::norm(F.at(0, m1, m2)) + std::norm(F.at(1, m1, m2)));
    }
  }
  return std::sqrt(s);
}

struct Metrics {
  double mse = 0.0;
  double rel_l2 = 0.0;
  double rel_energy = 0.0;
};

namespace detail {
// Multiplies Fourier coefficients by (lambda_g(k) + alpha) in place.
inline void apply_energy_symbol(SpectralField& F, const MetricSpec& metric) {
  const int n = F.res.n;
  for (int m1 = 0; m1 < n; ++m1) {
    int k1 = SpectralField::wavenumber(m1, n);
    for (int m2 = 0; m2 < n; ++m2) {
      int k2 = SpectralField::wavenumber(m2, n);
      double w = metric.symbol(k1, k2) + metric.alpha;
      F.at(0, m1, m2) *= w;
      F.at(1, m1, m2) *= w;
    }
  }
}

inline double spectral_l2(const SpectralField& F) {
  double s = 0.0;
  for (const auto& c : F.coeffs) s += std::norm(c);
  return std::sqrt(s);
}
}  // namespace detail

inline Metrics metrics_triplet(const GridField& u_hat, const GridField& u,
                               const MetricSpec& metric) {
  if (u_hat.res != u.res)
    throw std::invalid_argument("metrics_triplet: resolution mismatch");
  double ref = l2_norm(u);
  if (ref == 0.0)
    throw DegenerateReference("metrics_triplet: reference field has zero norm");
  GridField diff(u.res);
  double se = 0.0;
  for (size_t i = 0; i < u.data.size(); ++i) {
    diff.data[i] = u_hat.data[i] - u.data[i];
    se += diff.data[i] * diff.data[i];
  }
  Metrics m;
  m.mse = se / static_cast<double>(u.data.size());
  m.rel_l2 = l2_norm(diff) / ref;
  SpectralField de = fft_forward(diff);
  SpectralField ue = fft_forward(u);
  detail::apply_energy_symbol(de, metric);
  detail::apply_energy_symbol(ue, metric);
  m.rel_energy = detail::spectral_l2(de) / detail::spectral_l2(ue);
  return m;
}

// Applies R(theta)^T to the channel 2-vector at every grid point:
// (a,b) -> (c a + s b, -s a + c b) with c = cos theta, s = sin theta.
inline GridField rotate_frame(const GridField& f, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  GridField out(f.res);
  const size_t plane = static_cast<size_t>(f.res.n) * f.res.n;
  for (size_t i = 0; i < plane; ++i) {
    double a = f.data[i], b = f.data[plane + i];
    out.data[i] = c * a + s * b;
    out.data[plane + i] = -s * a + c * b;
  }
  return out;
}

// Spectral restriction: keep modes with |k_i| < n_coarse/2 on both axes
// (coarse Nyquist rows dropped), resample on the coarse grid.
inline GridField restrict_field(const GridField& f, Resolution coarse) {
  const int nf = f.res.n, nc = coarse.n;
  if (nc >= nf)
    throw InvalidResolutionPair("restrict_field: coarse resolution " +
                                std::to_string(nc) + " must be < fine " +
                                std::to_string(nf));
  SpectralField F = fft_forward(f);
  SpectralField C(coarse);
  for (int k1 = -(nc / 2 - 1); k1 <= nc / 2 - 1; ++k1)
    for (int k2 = -(nc / 2 - 1); k2 <= nc / 2 - 1; ++k2)
      for (int ch = 0; ch < 2; ++ch)
        C.at(ch, SpectralField::index_of(k1, nc),
             SpectralField::index_of(k2, nc)) =
            F.at(ch, SpectralField::index_of(k1, nf),
                 SpectralField::index_of(k2, nf));
  return fft_inverse(C);
}

// Spectral prolongation: zero-pad the spectrum onto the fine lattice. Coarse
// Nyquist rows are excluded (fields produced by this library never carry
// them; see the sampler's band conventions).
inline GridField prolong_field(const GridField& f, Resolution fine) {
  const int nc = f.res.n, nf = fine.n;
  if (nf <= nc)
    throw InvalidResolutionPair("prolong_field: fine resolution " +
                                std::to_string(nf) + " must be > coarse " +
                                std::to_string(nc));
  SpectralField C = fft_forward(f);
  SpectralField F(fine);
  for (int k1 = -(nc / 2 - 1); k1 <= nc / 2 - 1; ++k1)
    for (int k2 = -(nc / 2 - 1); k2 <= nc / 2 - 1; ++k2)
      for (int ch = 0; ch < 2; ++ch)
        F.at(ch, SpectralField::index_of(k1, nf),
             SpectralField::index_of(k2, nf)) =
            C.at(ch, SpectralField::index_of(k1, nc),
                 SpectralField::index_of(k2, nc));
  return fft_inverse(F);
}

}  // namespace torusop
