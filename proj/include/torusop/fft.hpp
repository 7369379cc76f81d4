#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace torusop {

// Thin wrapper around FFTW's complex-to-complex 2D transforms with a
// process-wide plan cache. Plans are created with FFTW_ESTIMATE|FFTW_UNALIGNED
// so planning is cheap and execution takes a single code path regardless of
// buffer alignment; fftw_execute_dft on distinct buffers is thread-safe, so
// transforms may run concurrently once the plan exists.
class FftEngine {
 public:
  // In-place square c2c transform of `buf` (size n*n, row-major, second index
  // fastest). sign = FFTW_FORWARD or FFTW_BACKWARD. No normalization.
  static void transform(std::complex<double>* buf, int n, int sign) {
    fftw_plan plan = plan_for(n, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(buf),
                     reinterpret_cast<fftw_complex*>(buf));
  }

 private:
  static fftw_plan plan_for(int n, int sign) {
    static std::mutex mu;
    static std::map<std::pair<int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::complex<double>> scratch(static_cast<size_t>(n) * n);
    fftw_plan plan = fftw_plan_dft_2d(
        n, n, reinterpret_cast<fftw_complex*>(scratch.data()),
        reinterpret_cast<fftw_complex*>(scratch.data()), sign,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, plan);
    return plan;
  }
};

}  // namespace torusop
