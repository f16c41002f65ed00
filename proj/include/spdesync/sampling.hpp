#pragma once

#include <cstdint>
#include <string>

#include "spdesync/field.hpp"

namespace spdesync {

/// Families of deterministic random test fields.
enum class FieldKind {
  Constant,  ///< spatially constant, value ~ N(0, amplitude^2)
  Trig,      ///< few random Fourier modes with |k|_inf <= 4
  Smooth,    ///< all modes |k|_inf <= band with amplitudes ~ 1/(1+|k|^2)
  Rough,     ///< independent N(0, amplitude^2) at every grid point
};

const char* to_string(FieldKind kind) noexcept;

/// Random field of the given family; a pure function of (seed, index).
/// Trig and Smooth fields are rescaled to sup norm `amplitude`.
Field random_field(const TorusGrid& grid, FieldKind kind, std::uint64_t seed,
                   std::uint64_t index, double amplitude = 1.0, int band = 8);

/// Field with Fourier amplitudes drawn for |k|_inf <= band only; sampling
/// the same (seed, index, band) on different N gives the same continuum
/// function.
Field band_limited_field(const TorusGrid& grid, std::uint64_t seed, std::uint64_t index,
                         int band);

}  // namespace spdesync
