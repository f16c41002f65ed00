#pragma once

#include <complex>
#include <span>

namespace spdesync::fft {

// Thin wrapper over FFTW's 2-d real transforms. Plans are created once per
// size and shared; every call executes on caller-provided buffers, so the
// functions are safe to call concurrently.

/// Unnormalized forward transform of an n x n real array into n x (n/2+1).
void forward(int n, std::span<const double> in, std::span<std::complex<double>> out);

/// Unnormalized inverse transform; the result is scaled by n^2 relative to
/// the true inverse. `in` is not modified.
void inverse(int n, std::span<const std::complex<double>> in, std::span<double> out);

}  // namespace spdesync::fft
