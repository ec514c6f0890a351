#pragma once

#include "ofdmclip/types.hpp"

namespace ofdmclip {

bool is_power_of_two(long n);

/// Unitary DFT, X(k) = N^{-1/2} sum_n x(n) e^{-j 2 pi k n / N}.
/// Throws ConfigError unless the length is a power of two.
ComplexVec dft(const ComplexVec& x);

/// Unitary inverse DFT; exact inverse of dft().
ComplexVec idft(const ComplexVec& X);

/// Peak-to-average power ratio max|x|^2 / mean|x|^2. Throws InputError on a zero vector.
double papr(const ComplexVec& x);

/// Root-mean-square magnitude.
double rms(const ComplexVec& x);

}  // namespace ofdmclip
