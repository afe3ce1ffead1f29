#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

namespace exflow {

/// Plane points, velocities and complex map values all share one type.
using Cx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Rotation by +90 degrees: (x, y) -> (-y, x).
inline Cx perp(Cx v) { return Cx(-v.imag(), v.real()); }

inline double sq(double x) { return x * x; }

inline double abs2(Cx z) { return z.real() * z.real() + z.imag() * z.imag(); }

/// Global worker count for parallel_for. 0 picks hardware concurrency.
void set_threads(int n);
int threads();

/// Runs fn(begin, end) over contiguous chunks of [0, n).
/// Results are bit-reproducible for any thread count as long as fn writes
/// only to its own index range and does per-index sequential work.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace exflow
