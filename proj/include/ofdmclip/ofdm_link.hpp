#pragma once

#include <random>

#include "ofdmclip/qam.hpp"
#include "ofdmclip/types.hpp"

namespace ofdmclip {

using Rng = std::mt19937_64;

enum class TapVariance {
    UnitTotal,   // per-tap variance 1/N_c
    PerTapUnit,  // per-tap variance 1
};

/// Static frame parameters shared by every trial of a sweep point.
struct OfdmConfig {
    int n = 512;                 // subcarriers
    int qam_order = 64;
    int taps = 10;               // N_c
    double clip_ratio = 1.61;    // gamma / sigma_x
    double ebn0_db = 27.0;       // +inf for a noiseless link
    int measurements = 128;      // P, reliable carriers used as measurement tones
    std::uint64_t seed = 1;
    TapVariance tap_variance = TapVariance::UnitTotal;

    /// Throws ConfigError on violated parameter ranges.
    void validate() const;

    /// Complex AWGN variance per sample: 1 / (log2(M) * 10^(EbN0/10)).
    double noise_variance() const;
};

double noise_variance_for(int qam_order, double ebn0_db);

struct Transmission {
    ComplexVec symbols;  // frequency domain
    ComplexVec time;     // idft(symbols)
};

/// Clipped frame with the ground-truth distortion.
struct ClipResult {
    ComplexVec x;          // unclipped
    ComplexVec clipped;    // x_p
    ComplexVec distortion; // c = x_p - x
    IndexSet support;      // ascending
    double gamma = 0.0;    // amplitude threshold
};

struct ChannelRealization {
    ComplexVec taps;       // h, length N_c
    ComplexVec response;   // D(k) = sum_l h(l) e^{-j 2 pi k l / N}
    double noise_var = 0.0;
    int redraws = 0;       // draws rejected for spectral nulls
};

struct Equalized {
    ComplexVec freq;  // D^{-1} dft(y)
    ComplexVec time;  // idft(freq)
};

Bits random_bits(std::size_t count, Rng& rng);

/// i.i.d. circularly-symmetric complex Gaussian samples of the given total variance.
ComplexVec complex_gaussian(long count, double variance, Rng& rng);

/// Maps bits onto n subcarriers and converts to the time domain.
Transmission transmit(const Bits& bits, const OfdmConfig& config);
Transmission transmit(const Bits& bits, const QamConstellation& constellation, int n);

/// Amplitude limiter at gamma = clip_ratio * rms(x).
ClipResult clip(const ComplexVec& x, double clip_ratio);

/// Amplitude limiter at an explicit threshold.
ClipResult clip_at(const ComplexVec& x, double gamma);

/// Frequency response of taps zero-padded to n points.
ComplexVec frequency_response(const ComplexVec& taps, int n);

ChannelRealization draw_channel(const OfdmConfig& config, Rng& rng);

/// Circular convolution of x with the (shorter) tap vector.
ComplexVec circular_convolve(const ComplexVec& x, const ComplexVec& taps);

/// y = h (*) x_p + z with z ~ CN(0, chan.noise_var).
ComplexVec propagate(const ComplexVec& clipped, const ChannelRealization& chan, Rng& rng);

/// Zero-forcing equalization. Throws NumericError if any |D(k)| is zero.
Equalized equalize(const ComplexVec& y, const ComplexVec& response);

std::size_t count_bit_errors(const Bits& a, const Bits& b);

}  // namespace ofdmclip
