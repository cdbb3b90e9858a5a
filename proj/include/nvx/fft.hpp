#pragma once

#include <complex>
#include <vector>

namespace nvx {

// In-place iterative radix-2 FFT. Size must be a power of two. The inverse
// transform includes the 1/N scale.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

}  // namespace nvx
