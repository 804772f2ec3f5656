#include "stokespec/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>
#include <unordered_map>

namespace stokespec {
namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  int align = -1;
};

std::mutex plan_mutex;
std::unordered_map<int, PlanPair>& plan_cache() {
  static auto* cache = new std::unordered_map<int, PlanPair>;
  return *cache;
}

// FFTW_MEASURE scribbles on the planning buffers, so planning happens on
// dedicated arrays before any user data is touched.
PlanPair plans_for(int n) {
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  fftw_complex* a = fftw_alloc_complex(n);
  fftw_complex* b = fftw_alloc_complex(n);
  PlanPair p;
  p.fwd = fftw_plan_dft_1d(n, a, b, FFTW_FORWARD, FFTW_MEASURE);
  p.bwd = fftw_plan_dft_1d(n, a, b, FFTW_BACKWARD, FFTW_MEASURE);
  p.align = fftw_alignment_of(reinterpret_cast<double*>(a));
  fftw_free(a);
  fftw_free(b);
  cache.emplace(n, p);
  return p;
}

// Execution buffers: thread-local, fftw_malloc'd so their alignment class
// matches the planning arrays (required by the new-array execute API).
struct Buffers {
  std::unordered_map<int, std::pair<fftw_complex*, fftw_complex*>> by_size;
  std::pair<fftw_complex*, fftw_complex*> get(int n) {
    auto it = by_size.find(n);
    if (it != by_size.end()) return it->second;
    auto pair = std::make_pair(fftw_alloc_complex(n), fftw_alloc_complex(n));
    by_size.emplace(n, pair);
    return pair;
  }
  ~Buffers() {
    for (auto& [n, pair] : by_size) {
      fftw_free(pair.first);
      fftw_free(pair.second);
    }
  }
};

thread_local Buffers tl_buffers;

void run(const PlanPair& pp, fftw_plan plan, const std::complex<double>* in,
         std::complex<double>* out, int n) {
  // New-array execute on the caller's memory when the alignment class matches
  // the planning arrays; out-of-place c2c leaves the input intact.
  auto* uin = reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in));
  auto* uout = reinterpret_cast<fftw_complex*>(out);
  if (in != out && fftw_alignment_of(reinterpret_cast<double*>(uin)) == pp.align &&
      fftw_alignment_of(reinterpret_cast<double*>(uout)) == pp.align) {
    fftw_execute_dft(plan, uin, uout);
    return;
  }
  auto [bin, bout] = tl_buffers.get(n);
  std::memcpy(bin, in, sizeof(fftw_complex) * n);
  fftw_execute_dft(plan, bin, bout);
  std::memcpy(out, bout, sizeof(fftw_complex) * n);
}

}  // namespace

void Fft::forward(const std::complex<double>* in, std::complex<double>* out, int n) {
  const PlanPair pp = plans_for(n);
  run(pp, pp.fwd, in, out, n);
}

void Fft::backward(const std::complex<double>* in, std::complex<double>* out, int n) {
  const PlanPair pp = plans_for(n);
  run(pp, pp.bwd, in, out, n);
}

void Fft::warm(int n) { plans_for(n); }

}  // namespace stokespec
