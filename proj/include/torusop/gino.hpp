#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "torusop/cheb.hpp"
#include "torusop/grid.hpp"
#include "torusop/sampler.hpp"

namespace torusop {

struct CacheMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Spectral multiplier m(lambda) = sum_j theta_j T_j(2 lambda/Lambda - 1) on
// [0, Lambda], hard-zero beyond Lambda (truncated functional calculus).
struct ChebMultiplier {
  std::vector<double> coeffs;  // theta_0 .. theta_J
  double lambda_max = 100.0;

  ChebMultiplier() = default;
  ChebMultiplier(std::vector<double> c, double lmax)
      : coeffs(std::move(c)), lambda_max(lmax) {
    if (coeffs.empty())
      throw std::invalid_argument("ChebMultiplier: need at least theta_0");
    if (!(lambda_max > 0.0))
      throw std::invalid_argument("ChebMultiplier: lambda_max must be > 0");
  }
  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
};

inline double cheb_eval(const ChebMultiplier& mult, double lambda) {
  if (lambda > mult.lambda_max) return 0.0;
  double t = 2.0 * lambda / mult.lambda_max - 1.0;
  return cheb_clenshaw(mult.coeffs, t);
}

// rho(r) = 1 + gain * tanh(w2 . tanh(w1 r + b1) + b2); |gain| <= 0.9 keeps the
// map bounded away from zero and Lipschitz.
struct RadialParams {
  std::vector<double> w1, b1, w2;
  double b2 = 0.0;
  double gain = 0.0;

  int width() const { return static_cast<int>(w1.size()); }

  void clamp_gain() {
    if (gain > 0.9) gain = 0.9;
    if (gain < -0.9) gain = -0.9;
  }

  double rho(double r) const {
    double z = b2;
    for (int i = 0; i < width(); ++i) z += w2[i] * std::tanh(w1[i] * r + b1[i]);
    return 1.0 + gain * std::tanh(z);
  }
};

struct GinoModel {
  ChebMultiplier mult1;
  RadialParams rho;
  ChebMultiplier mult2;
  MetricSpec metric_binding;
  // Optional pointwise scalar gate b(x), added to the first multiplier stage
  // as b(x) f(x). Disabled (null) by default and not trained.
  std::shared_ptr<std::vector<double>> gate;

  void validate() const {
    if (mult1.lambda_max != mult2.lambda_max)
      throw std::invalid_argument("GinoModel: multipliers must share lambda_max");
  }
};

struct GinoGradients {
  std::vector<double> d_coeffs1, d_coeffs2;
  std::vector<double> d_w1, d_b1, d_w2;
  double d_b2 = 0.0;
  double d_gain = 0.0;
};

struct GinoCache {
  Resolution res;
  SpectralField f_hat;         // input spectrum
  GridField y1;                // after first multiplier (+ gate)
  std::vector<double> r;       // pointwise channel norms of y1
  std::vector<double> h;       // hidden tanh activations, width per point
  std::vector<double> tz;      // tanh of the output preactivation per point
  SpectralField y2_hat;        // spectrum of the radial output
  int hidden = 0;
  int degree1 = 0, degree2 = 0;
};

namespace detail {

// out_hat(k) = m(lambda_g(k)) * in_hat(k) on both channels, zero beyond the
// truncation.
inline void multiply_spectrum(const ChebMultiplier& mult,
                              const MetricSpec& metric, SpectralField& F) {
  const int n = F.res.n;
  for (int m1 = 0; m1 < n; ++m1) {
    int k1 = SpectralField::wavenumber(m1, n);
    for (int m2 = 0; m2 < n; ++m2) {
      int k2 = SpectralField::wavenumber(m2, n);
      double m = cheb_eval(mult, metric.symbol(k1, k2));
      F.at(0, m1, m2) *= m;
      F.at(1, m1, m2) *= m;
    }
  }
}

// Accumulates d loss / d theta_j for a multiplier stage:
// n^2 * sum_{lambda_g(k) <= Lambda} T_j(t_k) Re(conj(g_hat) . in_hat).
inline void accumulate_multiplier_grads(const ChebMultiplier& mult,
                                        const MetricSpec& metric,
                                        const SpectralField& g_hat,
                                        const SpectralField& in_hat,
                                        std::vector<double>& d_theta) {
  const int n = g_hat.res.n;
  const int J = mult.degree();
  d_theta.assign(J + 1, 0.0);
  std::vector<double> T;
  const double n2 = static_cast<double>(n) * n;
  for (int m1 = 0; m1 < n; ++m1) {
    int k1 = SpectralField::wavenumber(m1, n);
    for (int m2 = 0; m2 < n; ++m2) {
      int k2 = SpectralField::wavenumber(m2, n);
      double lam = metric.symbol(k1, k2);
      if (lam > mult.lambda_max) continue;
      double w = (std::conj(g_hat.at(0, m1, m2)) * in_hat.at(0, m1, m2) +
                  std::conj(g_hat.at(1, m1, m2)) * in_hat.at(1, m1, m2))
                     .real() *
                 n2;
      double t = 2.0 * lam / mult.lambda_max - 1.0;
      cheb_values(t, J, T);
      for (int j = 0; j <= J; ++j) d_theta[j] += w * T[j];
    }
  }
}

}  // namespace detail

// Linear in f; commutes with rotate_frame for every theta since the action is
// a scalar per mode on both channels.
inline GridField multiplier_apply(const ChebMultiplier& mult,
                                  const GridField& f,
                                  const MetricSpec& metric) {
  SpectralField F = fft_forward(f);
  detail::multiply_spectrum(mult, metric, F);
  return fft_inverse(F);
}

// output(x) = rho(||u(x)||) u(x), with the Euclidean norm of the channel
// 2-vector; commutes with rotate_frame exactly in exact arithmetic.
inline GridField radial_apply(const RadialParams& rho, const GridField& u) {
  GridField out(u.res);
  const size_t plane = static_cast<size_t>(u.res.n) * u.res.n;
  for (size_t i = 0; i < plane; ++i) {
    double a = u.data[i], b = u.data[plane + i];
    double scale = rho.rho(std::sqrt(a * a + b * b));
    out.data[i] = scale * a;
    out.data[plane + i] = scale * b;
  }
  return out;
}

// u = mult2( radial( mult1(f) ) ). Resolution-independent: the symbol
// lambda_g(k) is evaluated on whatever lattice f lives on.
inline GridField gino_forward(const GinoModel& model, const GridField& f,
                              GinoCache* cache = nullptr) {
  const int n = f.res.n;
  const size_t plane = static_cast<size_t>(n) * n;
  const int H = model.rho.width();

  SpectralField f_hat = fft_forward(f);
  SpectralField y1_hat = f_hat;
  detail::multiply_spectrum(model.mult1, model.metric_binding, y1_hat);
  GridField y1 = fft_inverse(y1_hat);
  if (model.gate) {
    const std::vector<double>& g = *model.gate;
    for (size_t i = 0; i < plane; ++i) {
      y1.data[i] += g[i] * f.data[i];
      y1.data[plane + i] += g[i] * f.data[plane + i];
    }
  }

  GridField y2(f.res);
  std::vector<double> r(plane), h, tz;
  if (cache) {
    h.resize(plane * H);
    tz.resize(plane);
  }
  for (size_t i = 0; i < plane; ++i) {
    double a = y1.data[i], b = y1.data[plane + i];
    double ri = std::sqrt(a * a + b * b);
    r[i] = ri;
    double z = model.rho.b2;
    for (int q = 0; q < H; ++q) {
      double hq = std::tanh(model.rho.w1[q] * ri + model.rho.b1[q]);
      if (cache) h[i * H + q] = hq;
      z += model.rho.w2[q] * hq;
    }
    double t = std::tanh(z);
    if (cache) tz[i] = t;
    double scale = 1.0 + model.rho.gain * t;
    y2.data[i] = scale * a;
    y2.data[plane + i] = scale * b;
  }

  SpectralField y2_hat = fft_forward(y2);
  SpectralField out_hat = y2_hat;
  detail::multiply_spectrum(model.mult2, model.metric_binding, out_hat);
  GridField out = fft_inverse(out_hat);

  if (cache) {
    cache->res = f.res;
    cache->f_hat = std::move(f_hat);
    cache->y1 = std::move(y1);
    cache->r = std::move(r);
    cache->h = std::move(h);
    cache->tz = std::move(tz);
    cache->y2_hat = std::move(y2_hat);
    cache->hidden = H;
    cache->degree1 = model.mult1.degree();
    cache->degree2 = model.mult2.degree();
  }
  return out;
}

// Reverse mode through the fixed graph. Multiplier stages are self-adjoint
// per mode (real coefficients); the radial Jacobian is
// rho(r) I + rho'(r) (u u^T)/r with the analytic limit rho(0) I at r -> 0.
inline std::pair<GinoGradients, GridField> gino_backward(
    const GinoModel& model, const GinoCache& cache, const GridField& grad_out,
    bool want_grad_in = true) {
  if (cache.res != grad_out.res || cache.hidden != model.rho.width() ||
      cache.degree1 != model.mult1.degree() ||
      cache.degree2 != model.mult2.degree())
    throw CacheMismatch("gino_backward: cache does not match model/input");

  const int n = cache.res.n;
  const size_t plane = static_cast<size_t>(n) * n;
  const int H = model.rho.width();
  GinoGradients g;
  g.d_w1.assign(H, 0.0);
  g.d_b1.assign(H, 0.0);
  g.d_w2.assign(H, 0.0);

  SpectralField gout_hat = fft_forward(grad_out);
  detail::accumulate_multiplier_grads(model.mult2, model.metric_binding,
                                      gout_hat, cache.y2_hat, g.d_coeffs2);

  // Through the second multiplier (self-adjoint).
  SpectralField g2_hat = gout_hat;
  detail::multiply_spectrum(model.mult2, model.metric_binding, g2_hat);
  GridField g2 = fft_inverse(g2_hat);

  // Radial stage.
  GridField g1(cache.res);
  const double s = model.rho.gain;
  for (size_t i = 0; i < plane; ++i) {
    double a = cache.y1.data[i], b = cache.y1.data[plane + i];
    double ga = g2.data[i], gb = g2.data[plane + i];
    double ri = cache.r[i];
    double t = cache.tz[i];
    double rho_val = 1.0 + s * t;
    double q = ga * a + gb * b;  // g . u
    double sz = 1.0 - t * t;

    g.d_gain += q * t;
    g.d_b2 += q * s * sz;
    double dzdr = 0.0;
    for (int p = 0; p < H; ++p) {
      double hp = cache.h[i * H + p];
      double sech2 = 1.0 - hp * hp;
      g.d_w2[p] += q * s * sz * hp;
      g.d_b1[p] += q * s * sz * model.rho.w2[p] * sech2;
      g.d_w1[p] += q * s * sz * model.rho.w2[p] * sech2 * ri;
      dzdr += model.rho.w2[p] * sech2 * model.rho.w1[p];
    }
    double rho_prime = s * sz * dzdr;
    if (ri < 1e-12) {
      g1.data[i] = rho_val * ga;
      g1.data[plane + i] = rho_val * gb;
    } else {
      double c = rho_prime * q / ri;
      g1.data[i] = rho_val * ga + c * a;
      g1.data[plane + i] = rho_val * gb + c * b;
    }
  }

  SpectralField g1_hat = fft_forward(g1);
  detail::accumulate_multiplier_grads(model.mult1, model.metric_binding,
                                      g1_hat, cache.f_hat, g.d_coeffs1);

  GridField grad_in;
  if (want_grad_in) {
    SpectralField gin_hat = g1_hat;
    detail::multiply_spectrum(model.mult1, model.metric_binding, gin_hat);
    grad_in = fft_inverse(gin_hat);
    if (model.gate) {
      const std::vector<double>& gt = *model.gate;
      for (size_t i = 0; i < plane; ++i) {
        grad_in.data[i] += gt[i] * g1.data[i];
        grad_in.data[plane + i] += gt[i] * g1.data[plane + i];
      }
    }
  }
  return {std::move(g), std::move(grad_in)};
}

// max |m'(lambda)| over a 1024-point uniform grid on [0, Lambda], with m'
// from exact Chebyshev coefficient differentiation.
inline double roughness(const ChebMultiplier& mult) {
  std::vector<double> d = cheb_derivative_coeffs(mult.coeffs);
  const double scale = 2.0 / mult.lambda_max;  // dt/dlambda
  double worst = 0.0;
  const int N = 1024;
  for (int i = 0; i < N; ++i) {
    double t = 2.0 * i / (N - 1) - 1.0;
    worst = std::max(worst, std::abs(scale * cheb_clenshaw(d, t)));
  }
  return worst;
}

// integral_0^Lambda m'(lambda)^2 dlambda by 256-node composite trapezoid; the
// quadrature is a fixed quadratic form in theta so the gradient is exact.
inline std::pair<double, std::vector<double>> smoothness_penalty(
    const ChebMultiplier& mult) {
  const int J = mult.degree();
  const int N = 256;
  const double h = mult.lambda_max / (N - 1);
  std::vector<double> d = cheb_derivative_coeffs(mult.coeffs);
  const double scale = 2.0 / mult.lambda_max;

  double value = 0.0;
  std::vector<double> grad(J + 1, 0.0);
  std::vector<double> U;
  for (int i = 0; i < N; ++i) {
    double t = 2.0 * i / (N - 1) - 1.0;
    double w = (i == 0 || i == N - 1) ? 0.5 * h : h;
    double mp = scale * cheb_clenshaw(d, t);
    value += w * mp * mp;
    chebU_values(t, J, U);
    // d m'(lambda) / d theta_j = scale * j * U_{j-1}(t)
    for (int j = 1; j <= J; ++j)
      grad[j] += 2.0 * w * mp * scale * j * U[j - 1];
  }
  return {value, std::move(grad)};
}

// Parameter packing order: mult1 coeffs, mult2 coeffs, w1, b1, w2, b2, gain.
inline size_t gino_param_count(const GinoModel& m) {
  return m.mult1.coeffs.size() + m.mult2.coeffs.size() +
         3 * static_cast<size_t>(m.rho.width()) + 2;
}

inline std::vector<double> gino_pack(const GinoModel& m) {
  std::vector<double> p;
  p.reserve(gino_param_count(m));
  p.insert(p.end(), m.mult1.coeffs.begin(), m.mult1.coeffs.end());
  p.insert(p.end(), m.mult2.coeffs.begin(), m.mult2.coeffs.end());
  p.insert(p.end(), m.rho.w1.begin(), m.rho.w1.end());
  p.insert(p.end(), m.rho.b1.begin(), m.rho.b1.end());
  p.insert(p.end(), m.rho.w2.begin(), m.rho.w2.end());
  p.push_back(m.rho.b2);
  p.push_back(m.rho.gain);
  return p;
}

inline void gino_unpack(GinoModel& m, const std::vector<double>& p) {
  if (p.size() != gino_param_count(m))
    throw CacheMismatch("gino_unpack: parameter vector size mismatch");
  size_t o = 0;
  for (double& c : m.mult1.coeffs) c = p[o++];
  for (double& c : m.mult2.coeffs) c = p[o++];
  for (double& v : m.rho.w1) v = p[o++];
  for (double& v : m.rho.b1) v = p[o++];
  for (double& v : m.rho.w2) v = p[o++];
  m.rho.b2 = p[o++];
  m.rho.gain = p[o++];
  m.rho.clamp_gain();
}

inline std::vector<double> gino_grad_pack(const GinoModel& m,
                                          const GinoGradients& g) {
  std::vector<double> p;
  p.reserve(gino_param_count(m));
  p.insert(p.end(), g.d_coeffs1.begin(), g.d_coeffs1.end());
  p.insert(p.end(), g.d_coeffs2.begin(), g.d_coeffs2.end());
  p.insert(p.end(), g.d_w1.begin(), g.d_w1.end());
  p.insert(p.end(), g.d_b1.begin(), g.d_b1.end());
  p.insert(p.end(), g.d_w2.begin(), g.d_w2.end());
  p.push_back(g.d_b2);
  p.push_back(g.d_gain);
  return p;
}

// Starts near a sensible linear operator: theta_0 of the first stage is the
// resolvent's DC gain 1/alpha, the second stage starts near unity, the rest
// is small noise.
inline GinoModel init_gino(int J, double lambda_max, int hidden,
                           const MetricSpec& metric, SeededRng& rng) {
  auto noise = [&rng](double sigma) {
    double a, b;
    rng.next_gaussian_pair(a, b);
    return sigma * a;
  };
  GinoModel m;
  m.metric_binding = metric;
  std::vector<double> c1(J + 1), c2(J + 1);
  c1[0] = 1.0 / metric.alpha;
  c2[0] = 1.0;
  for (int j = 1; j <= J; ++j) {
    c1[j] = noise(0.01);
    c2[j] = noise(0.01);
  }
  m.mult1 = ChebMultiplier(std::move(c1), lambda_max);
  m.mult2 = ChebMultiplier(std::move(c2), lambda_max);
  m.rho.w1.resize(hidden);
  m.rho.b1.resize(hidden);
  m.rho.w2.resize(hidden);
  for (int q = 0; q < hidden; ++q) {
    m.rho.w1[q] = noise(0.5);
    m.rho.b1[q] = noise(0.5);
    m.rho.w2[q] = noise(0.5);
  }
  m.rho.b2 = noise(0.5);
  m.rho.gain = 0.1;
  m.rho.clamp_gain();
  m.validate();
  return m;
}

}  // namespace torusop
