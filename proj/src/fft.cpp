#include "spdesync/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

namespace spdesync::fft {
namespace {

struct FftwFree {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

template <class T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <class T>
FftwBuffer<T> allocate(std::size_t count) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * count)));
}

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex plan_mutex;

const PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(plan_mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  const std::size_t real_size = static_cast<std::size_t>(n) * n;
  const std::size_t complex_size = static_cast<std::size_t>(n) * (n / 2 + 1);
  auto r = allocate<double>(real_size);
  auto c = allocate<fftw_complex>(complex_size);
  PlanPair pair;
  pair.forward = fftw_plan_dft_r2c_2d(n, n, r.get(), c.get(), FFTW_ESTIMATE);
  pair.inverse = fftw_plan_dft_c2r_2d(n, n, c.get(), r.get(), FFTW_ESTIMATE);
  return cache.emplace(n, pair).first->second;
}

// Per-thread scratch with fftw_malloc alignment, grown on demand.
struct Scratch {
  FftwBuffer<double> real;
  FftwBuffer<fftw_complex> complex;
  std::size_t real_size = 0;
  std::size_t complex_size = 0;

  void reserve(int n) {
    const std::size_t rs = static_cast<std::size_t>(n) * n;
    const std::size_t cs = static_cast<std::size_t>(n) * (n / 2 + 1);
    if (rs > real_size) {
      real = allocate<double>(rs);
      real_size = rs;
    }
    if (cs > complex_size) {
      complex = allocate<fftw_complex>(cs);
      complex_size = cs;
    }
  }
};

Scratch& scratch(int n) {
  thread_local Scratch s;
  s.reserve(n);
  return s;
}

}  // namespace

void forward(int n, std::span<const double> in, std::span<std::complex<double>> out) {
  const PlanPair& p = plans_for(n);
  Scratch& s = scratch(n);
  std::copy(in.begin(), in.end(), s.real.get());
  fftw_execute_dft_r2c(p.forward, s.real.get(), s.complex.get());
  std::memcpy(static_cast<void*>(out.data()), s.complex.get(), out.size_bytes());
}

void inverse(int n, std::span<const std::complex<double>> in, std::span<double> out) {
  const PlanPair& p = plans_for(n);
  Scratch& s = scratch(n);
  std::memcpy(s.complex.get(), in.data(), in.size_bytes());
  fftw_execute_dft_c2r(p.inverse, s.complex.get(), s.real.get());
  std::copy(s.real.get(), s.real.get() + out.size(), out.begin());
}

}  // namespace spdesync::fft
