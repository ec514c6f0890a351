#include "ofdmclip/ofdm_link.hpp"

#include <cmath>

#include "ofdmclip/dsp.hpp"

namespace ofdmclip {

namespace {

constexpr double kNullThreshold = 1e-6;
constexpr int kMaxRedraws = 1000;

}  // namespace

void OfdmConfig::validate() const {
    if (!is_power_of_two(n)) throw ConfigError("n = " + std::to_string(n) + " must be a power of two");
    if (qam_order != 4 && qam_order != 16 && qam_order != 64) {
        throw ConfigError("qam_order = " + std::to_string(qam_order) + " must be 4, 16 or 64");
    }
    if (taps <= 0 || taps > n) throw ConfigError("taps must satisfy 0 < taps <= n");
    if (measurements <= 0 || measurements >= n) {
        throw ConfigError("measurements = " + std::to_string(measurements) + " must satisfy 0 < P < n");
    }
    if (!(clip_ratio > 0.0)) throw ConfigError("clip_ratio must be positive");
    if (std::isnan(ebn0_db) || ebn0_db == -HUGE_VAL) throw ConfigError("ebn0_db must be a number or +inf");
}

double noise_variance_for(int qam_order, double ebn0_db) {
    const double bits = std::log2(static_cast<double>(qam_order));
    return 1.0 / (bits * std::pow(10.0, ebn0_db / 10.0));
}

double OfdmConfig::noise_variance() const { return noise_variance_for(qam_order, ebn0_db); }

Bits random_bits(std::size_t count, Rng& rng) {
    Bits out(count);
    for (std::size_t i = 0; i < count; i += 64) {
        std::uint64_t word = rng();
        for (std::size_t b = 0; b < 64 && i + b < count; ++b) {
            out[i + b] = static_cast<std::uint8_t>((word >> b) & 1u);
        }
    }
    return out;
}

ComplexVec complex_gaussian(long count, double variance, Rng& rng) {
    std::normal_distribution<double> normal(0.0, std::sqrt(variance / 2.0));
    ComplexVec out(count);
    for (long i = 0; i < count; ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        out[i] = Complex(re, im);
    }
    return out;
}

Transmission transmit(const Bits& bits, const QamConstellation& constellation, int n) {
    const std::size_t expected = static_cast<std::size_t>(n) * constellation.bits_per_symbol();
    if (bits.size() != expected) {
        throw InputError("transmit expects " + std::to_string(expected) + " bits, got " +
                         std::to_string(bits.size()));
    }
    Transmission out;
    out.symbols = constellation.map(bits);
    out.time = idft(out.symbols);
    return out;
}

Transmission transmit(const Bits& bits, const OfdmConfig& config) {
    return transmit(bits, QamConstellation(config.qam_order), config.n);
}

ClipResult clip_at(const ComplexVec& x, double gamma) {
    ClipResult out;
    out.x = x;
    out.gamma = gamma;
    out.clipped = x;
    out.distortion = ComplexVec::Zero(x.size());
    for (long i = 0; i < x.size(); ++i) {
        const double mag = std::abs(x[i]);
        if (mag > gamma) {
            // Store x_p as x + c so the sum identity holds exactly.
            out.distortion[i] = std::polar(gamma, std::arg(x[i])) - x[i];
            out.clipped[i] = x[i] + out.distortion[i];
            out.support.push_back(static_cast<int>(i));
        }
    }
    return out;
}

ClipResult clip(const ComplexVec& x, double clip_ratio) {
    const double sigma = rms(x);
    if (sigma == 0.0) throw InputError("cannot clip a zero vector");
    return clip_at(x, clip_ratio * sigma);
}

ComplexVec frequency_response(const ComplexVec& taps, int n) {
    ComplexVec padded = ComplexVec::Zero(n);
    padded.head(taps.size()) = taps;
    return dft(padded) * std::sqrt(static_cast<double>(n));
}

ChannelRealization draw_channel(const OfdmConfig& config, Rng& rng) {
    const double tap_var = config.tap_variance == TapVariance::UnitTotal ? 1.0 / config.taps : 1.0;
    ChannelRealization chan;
    chan.noise_var = config.noise_variance();
    for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
        chan.taps = complex_gaussian(config.taps, tap_var, rng);
        chan.response = frequency_response(chan.taps, config.n);
        if (chan.response.cwiseAbs().minCoeff() >= kNullThreshold) return chan;
        ++chan.redraws;
    }
    throw NumericError("could not draw a channel without spectral nulls");
}

ComplexVec circular_convolve(const ComplexVec& x, const ComplexVec& taps) {
    const long n = x.size();
    ComplexVec out = ComplexVec::Zero(n);
    for (long l = 0; l < taps.size(); ++l) {
        for (long i = 0; i < n; ++i) {
            out[(i + l) % n] += taps[l] * x[i];
        }
    }
    return out;
}

ComplexVec propagate(const ComplexVec& clipped, const ChannelRealization& chan, Rng& rng) {
    ComplexVec y = circular_convolve(clipped, chan.taps);
    if (chan.noise_var > 0.0) y += complex_gaussian(y.size(), chan.noise_var, rng);
    return y;
}

Equalized equalize(const ComplexVec& y, const ComplexVec& response) {
    if (response.size() != y.size()) throw InputError("equalize: response length mismatch");
    if (response.cwiseAbs().minCoeff() == 0.0) throw NumericError("equalize: spectral null in channel");
    Equalized out;
    out.freq = dft(y).cwiseQuotient(response);
    out.time = idft(out.freq);
    return out;
}

std::size_t count_bit_errors(const Bits& a, const Bits& b) {
    if (a.size() != b.size()) throw InputError("bit sequences differ in length");
    std::size_t errors = 0;
    for (std::size_t i = 0; i < a.size(); ++i) errors += (a[i] != b[i]);
    return errors;
}

}  // namespace ofdmclip
