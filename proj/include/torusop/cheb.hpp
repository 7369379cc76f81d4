#pragma once

#include <cstddef>
#include <vector>

namespace torusop {

// Chebyshev-of-the-first-kind helpers on t in [-1,1].

// Clenshaw evaluation of sum_j a_j T_j(t).
inline double cheb_clenshaw(const std::vector<double>& a, double t) {
  double b1 = 0.0, b2 = 0.0;
  for (size_t j = a.size(); j-- > 1;) {
    double b0 = a[j] + 2.0 * t * b1 - b2;
    b2 = b1;
    b1 = b0;
  }
  return a.empty() ? 0.0 : a[0] + t * b1 - b2;
}

// T_0(t) .. T_J(t) by the three-term recurrence.
inline void cheb_values(double t, int J, std::vector<double>& T) {
  T.resize(J + 1);
  T[0] = 1.0;
  if (J >= 1) T[1] = t;
  for (int j = 2; j <= J; ++j) T[j] = 2.0 * t * T[j - 1] - T[j - 2];
}

// U_0(t) .. U_J(t) (second kind); T_j'(t) = j * U_{j-1}(t).
inline void chebU_values(double t, int J, std::vector<double>& U) {
  U.resize(J + 1);
  U[0] = 1.0;
  if (J >= 1) U[1] = 2.0 * t;
  for (int j = 2; j <= J; ++j) U[j] = 2.0 * t * U[j - 1] - U[j - 2];
}

// Coefficients of d/dt sum_j a_j T_j in the T basis (exact, one degree lower).
inline std::vector<double> cheb_derivative_coeffs(const std::vector<double>& a) {
  const int J = static_cast<int>(a.size()) - 1;
  if (J <= 0) return {0.0};
  std::vector<double> d(J + 1, 0.0);
  for (int j = J; j >= 1; --j) {
    d[j - 1] = (j + 1 <= J - 1 ? d[j + 1] : 0.0) + 2.0 * j * a[j];
  }
  d[0] *= 0.5;
  d.resize(J);  // degree J-1
  return d;
}

}  // namespace torusop
