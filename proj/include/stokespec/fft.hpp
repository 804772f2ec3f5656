#pragma once

#include <complex>

namespace stokespec {

// Unnormalized complex DFT pair behind a process-wide plan cache.
//   forward:  out[m] = sum_j in[j] exp(-2 pi i j m / n)
//   backward: out[j] = sum_m in[m] exp(+2 pi i j m / n)
// Plans are measured once per size and reused; execution goes through
// per-thread aligned buffers, so concurrent calls from different threads are
// safe and in/out may alias.
struct Fft {
  static void forward(const std::complex<double>* in, std::complex<double>* out, int n);
  static void backward(const std::complex<double>* in, std::complex<double>* out, int n);

  // Plan a size ahead of a timing-sensitive section.
  static void warm(int n);
};

}  // namespace stokespec
