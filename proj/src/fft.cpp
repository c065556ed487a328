#include "specref/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace specref::fft {

namespace {

std::mutex g_planner_mutex;

using PlanKey = std::tuple<int, int, int, int>;  // kind, n/len, ncol, sign

fftw_plan get_plan_2d(int n, int sign) {
  static std::map<PlanKey, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(g_planner_mutex);
  PlanKey key{0, n, 0, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  CVec a(static_cast<size_t>(n) * n), b(a.size());
  fftw_plan p = fftw_plan_dft_2d(
      n, n, reinterpret_cast<fftw_complex*>(a.data()),
      reinterpret_cast<fftw_complex*>(b.data()), sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

fftw_plan get_plan_cols(int len, int ncol, int sign) {
  static std::map<PlanKey, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(g_planner_mutex);
  PlanKey key{1, len, ncol, sign};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  CVec a(static_cast<size_t>(len) * ncol), b(a.size());
  int n[] = {len};
  fftw_plan p = fftw_plan_many_dft(
      1, n, ncol, reinterpret_cast<fftw_complex*>(a.data()), nullptr, ncol, 1,
      reinterpret_cast<fftw_complex*>(b.data()), nullptr, ncol, 1, sign,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

}  // namespace

void fft2(const cplx* in, cplx* out, int n, int batch, bool forward) {
  fftw_plan p = get_plan_2d(n, forward ? FFTW_FORWARD : FFTW_BACKWARD);
  size_t sz = static_cast<size_t>(n) * n;
  double scale = 1.0 / static_cast<double>(sz);
  for (int b = 0; b < batch; ++b) {
    fftw_execute_dft(
        p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in) + b * sz),
        reinterpret_cast<fftw_complex*>(out + b * sz));
    if (!forward) {
      cplx* o = out + b * sz;
      for (size_t i = 0; i < sz; ++i) o[i] *= scale;
    }
  }
}

void fft_cols(const cplx* in, cplx* out, int len, int ncol, bool forward) {
  fftw_plan p = get_plan_cols(len, ncol, forward ? FFTW_FORWARD : FFTW_BACKWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
  if (!forward) {
    double scale = 1.0 / static_cast<double>(len);
    size_t sz = static_cast<size_t>(len) * ncol;
    for (size_t i = 0; i < sz; ++i) out[i] *= scale;
  }
}

void fft2_unnorm(const cplx* in, cplx* out, int n, int batch, bool forward) {
  fftw_plan p = get_plan_2d(n, forward ? FFTW_FORWARD : FFTW_BACKWARD);
  size_t sz = static_cast<size_t>(n) * n;
  for (int b = 0; b < batch; ++b)
    fftw_execute_dft(
        p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in) + b * sz),
        reinterpret_cast<fftw_complex*>(out + b * sz));
}

void fft_cols_unnorm(const cplx* in, cplx* out, int len, int ncol, bool forward) {
  fftw_plan p = get_plan_cols(len, ncol, forward ? FFTW_FORWARD : FFTW_BACKWARD);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace specref::fft
