#pragma once

#include <complex>
#include <stdexcept>

#include "torusop/grid.hpp"

namespace torusop {

// Closed-form Fourier-domain ground truth: the shifted resolvent, the energy
// operator and the regularized Helmholtz-Hodge projectors. All three act
// mode-by-mode and are exact at band-limited fields.

// u with (Delta_g + alpha I)u = f: u_hat(k) = f_hat(k) / (k^T A k + alpha),
// applied per channel.
inline GridField resolvent_apply(const GridField& f, const MetricSpec& metric) {
  SpectralField F = fft_forward(f);
  const int n = f.res.n;
  for (int m1 = 0; m1 < n; ++m1) {
    int k1 = SpectralField::wavenumber(m1, n);
    for (int m2 = 0; m2 < n; ++m2) {
      int k2 = SpectralField::wavenumber(m2, n);
      double w = 1.0 / (metric.symbol(k1, k2) + metric.alpha);
      F.at(0, m1, m2) *= w;
      F.at(1, m1, m2) *= w;
    }
  }
  return fft_inverse(F);
}

// Inverse of resolvent_apply: multiplies coefficients by (lambda_g(k)+alpha).
inline GridField energy_apply(const GridField& u, const MetricSpec& metric) {
  SpectralField F = fft_forward(u);
  detail::apply_energy_symbol(F, metric);
  return fft_inverse(F);
}

// Exact + coexact + harmonic + residual reconstructs the input; the residual
// is the regularization gap and the harmonic part is the k=0 mode.
struct HodgeParts {
  GridField exact;
  GridField coexact;
  GridField harmonic;
  GridField residual;
};

// Regularized Helmholtz-Hodge decomposition under the Euclidean metric.
// For k != 0:
//   exact_hat(k)    = [k k^T / (|k|^2 + a_reg)] f_hat(k)
//   coexact_hat(k)  = [kp kp^T / (|k|^2 + a_reg)] f_hat(k),  kp = (-k2, k1)
//   residual_hat(k) = [a_reg / (|k|^2 + a_reg)] f_hat(k)
inline HodgeParts hodge_decompose(const GridField& f, double alpha_reg) {
  if (!(alpha_reg > 0.0))
    throw std::invalid_argument("hodge_decompose: alpha_reg must be > 0");
  const int n = f.res.n;
  SpectralField F = fft_forward(f);
  SpectralField E(f.res), C(f.res), H(f.res), R(f.res);
  for (int m1 = 0; m1 < n; ++m1) {
    int k1 = SpectralField::wavenumber(m1, n);
    for (int m2 = 0; m2 < n; ++m2) {
      int k2 = SpectralField::wavenumber(m2, n);
      std::complex<double> v0 = F.at(0, m1, m2), v1 = F.at(1, m1, m2);
      if (k1 == 0 && k2 == 0) {
        H.at(0, m1, m2) = v0;
        H.at(1, m1, m2) = v1;
        continue;
      }
      double lam = static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2;
      double den = lam + alpha_reg;
      std::complex<double> kdotv = static_cast<double>(k1) * v0 +
                                   static_cast<double>(k2) * v1;
      std::complex<double> pdotv = -static_cast<double>(k2) * v0 +
                                   static_cast<double>(k1) * v1;
      E.at(0, m1, m2) = k1 * kdotv / den;
      E.at(1, m1, m2) = k2 * kdotv / den;
      C.at(0, m1, m2) = -k2 * pdotv / den;
      C.at(1, m1, m2) = k1 * pdotv / den;
      R.at(0, m1, m2) = alpha_reg * v0 / den;
      R.at(1, m1, m2) = alpha_reg * v1 / den;
    }
  }
  HodgeParts parts;
  parts.exact = fft_inverse(E);
  parts.coexact = fft_inverse(C);
  parts.harmonic = fft_inverse(H);
  parts.residual = fft_inverse(R);
  return parts;
}

}  // namespace torusop
