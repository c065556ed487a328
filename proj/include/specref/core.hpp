#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace specref {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

// Thrown when a time-marching state turns non-finite or its norm explodes.
class BlowUpError : public std::runtime_error {
 public:
  explicit BlowUpError(const std::string& what, double t)
      : std::runtime_error(what), time(t) {}
  double time;
};

// Signed integer frequency for FFT bin j of an n-point transform.
inline int signed_freq(int j, int n) { return j < n / 2 ? j : j - n; }

// FFT bin holding signed frequency s of an n-point transform.
inline int freq_bin(int s, int n) { return s >= 0 ? s : s + n; }

}  // namespace specref
