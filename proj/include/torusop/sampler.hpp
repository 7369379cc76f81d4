#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "torusop/grid.hpp"

namespace torusop {

struct EmptyBand : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Keyed splitmix64 stream: the value sequence is a pure function of
// (seed, counter), so identical seeds reproduce samples bit-exactly within
// one build and per-sample child streams are schedule-independent.
struct SeededRng {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;

  SeededRng() = default;
  explicit SeededRng(std::uint64_t s) : seed(s) {}

  std::uint64_t next_u64() {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * ++counter;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in (0,1]; never 0 so Box-Muller's log is safe.
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // One Box-Muller pair of independent standard normals.
  void next_gaussian_pair(double& z0, double& z1) {
    double u1 = next_unit();
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    z0 = r * std::cos(2.0 * M_PI * u2);
    z1 = r * std::sin(2.0 * M_PI * u2);
  }

  static SeededRng derive(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed ^ (0xD1B54A32D192ED03ULL + 0x9E3779B97F4A7C15ULL * (index + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return SeededRng(z ^ (z >> 31));
  }
};

// Band-limited random forcing distribution: beta is the spectral decay
// exponent and lambda_cut the cutoff on lambda_g(k).
struct ForcingSpec {
  double beta = 2.0;
  double lambda_cut = 100.0;
  Resolution res;
  MetricSpec metric;

  ForcingSpec() = default;
  ForcingSpec(double beta_, double cut, Resolution r, MetricSpec m)
      : beta(beta_), lambda_cut(cut), res(r), metric(m) {
    if (!(lambda_cut > 0.0))
      throw std::invalid_argument("ForcingSpec: lambda_cut must be > 0");
    if (beta < 0.0)
      throw std::invalid_argument("ForcingSpec: beta must be >= 0");
  }
};

// Three-step recipe: (i) complex Gaussian white noise per mode and channel,
// (ii) scale by (1+lambda_g(k))^(-beta/2) and zero modes with
// lambda_g(k) > lambda_cut, (iii) Hermitian-symmetrize, inverse FFT and
// divide by the sample's grid RMS. Nyquist rows never carry data so the band
// transfers cleanly across resolutions.
inline GridField sample_forcing(const ForcingSpec& spec, SeededRng& rng) {
  const int n = spec.res.n;
  SpectralField F(spec.res);
  bool any_in_band = false;
  for (int ch = 0; ch < 2; ++ch) {
    for (int m1 = 0; m1 < n; ++m1) {
      int k1 = SpectralField::wavenumber(m1, n);
      for (int m2 = 0; m2 < n; ++m2) {
        int k2 = SpectralField::wavenumber(m2, n);
        double re, im;
        rng.next_gaussian_pair(re, im);  // always consume the stream
        if (k1 == -n / 2 || k2 == -n / 2) continue;
        double lam = spec.metric.symbol(k1, k2);
        if (lam > spec.lambda_cut) continue;
        any_in_band = true;
        double w = std::pow(1.0 + lam, -0.5 * spec.beta);
        F.at(ch, m1, m2) = std::complex<double>(re, im) * w;
      }
    }
  }
  if (!any_in_band)
    throw EmptyBand("sample_forcing: no mode satisfies the cutoff");

  // Hermitian symmetrization: F(k) <- (F(k) + conj(F(-k)))/2.
  SpectralField S(spec.res);
  for (int ch = 0; ch < 2; ++ch)
    for (int m1 = 0; m1 < n; ++m1)
      for (int m2 = 0; m2 < n; ++m2) {
        int p1 = (n - m1) % n, p2 = (n - m2) % n;
        S.at(ch, m1, m2) =
            0.5 * (F.at(ch, m1, m2) + std::conj(F.at(ch, p1, p2)));
      }

  GridField f = fft_inverse(S);
  double sq = 0.0;
  for (double v : f.data) sq += v * v;
  double rms = std::sqrt(sq / static_cast<double>(f.data.size()));
  if (rms == 0.0) throw EmptyBand("sample_forcing: degenerate zero sample");
  for (double& v : f.data) v /= rms;
  return f;
}

// The i-th element equals sample_forcing(spec, SeededRng::derive(rng.seed, i)),
// so the batch is a pure function of (seed, spec, count) and samples may be
// generated concurrently.
inline std::vector<GridField> sample_batch(const ForcingSpec& spec,
                                           const SeededRng& rng, int count) {
  if (count < 1) throw std::invalid_argument("sample_batch: count must be >= 1");
  std::vector<GridField> out(count);
  for (int i = 0; i < count; ++i) {
    SeededRng child = SeededRng::derive(rng.seed, static_cast<std::uint64_t>(i));
    out[i] = sample_forcing(spec, child);
  }
  return out;
}

}  // namespace torusop
