#include "ofdmclip/qam.hpp"

#include <cmath>

namespace ofdmclip {

namespace {

int gray_encode(int v) { return v ^ (v >> 1); }

int gray_decode(int g) {
    int v = 0;
    for (; g; g >>= 1) v ^= g;
    return v;
}

// Relative slack for declaring an exact midpoint a tie.
constexpr double kTieSlack = 1e-9;

}  // namespace

QamConstellation::QamConstellation(int order) : order_(order) {
    if (order != 4 && order != 16 && order != 64) {
        throw ConfigError("unsupported QAM order " + std::to_string(order) + " (expected 4, 16 or 64)");
    }
    bits_per_symbol_ = 0;
    while ((1 << bits_per_symbol_) < order) ++bits_per_symbol_;
    half_bits_ = bits_per_symbol_ / 2;
    side_ = 1 << half_bits_;
    // Levels +-1, +-3, ...; average energy 2 (M - 1) / 3 before scaling.
    scale_ = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);

    level_to_gray_.resize(side_);
    for (int level = 0; level < side_; ++level) level_to_gray_[level] = gray_encode(level);

    points_.resize(order);
    for (int k = 0; k < order; ++k) {
        const int gi = k >> half_bits_;
        const int gq = k & (side_ - 1);
        // Level index 0 is the most positive amplitude (side - 1).
        const double re = (side_ - 1) - 2.0 * gray_decode(gi);
        const double im = (side_ - 1) - 2.0 * gray_decode(gq);
        points_[k] = Complex(re * scale_, im * scale_);
    }
}

Bits QamConstellation::label(int index) const {
    Bits out(bits_per_symbol_);
    for (int b = 0; b < bits_per_symbol_; ++b) {
        out[b] = static_cast<std::uint8_t>((index >> (bits_per_symbol_ - 1 - b)) & 1);
    }
    return out;
}

ComplexVec QamConstellation::map(const Bits& bits) const {
    if (bits.size() % bits_per_symbol_ != 0) {
        throw InputError("bit count " + std::to_string(bits.size()) + " is not a multiple of " +
                         std::to_string(bits_per_symbol_));
    }
    const long count = static_cast<long>(bits.size() / bits_per_symbol_);
    ComplexVec out(count);
    for (long s = 0; s < count; ++s) {
        int index = 0;
        for (int b = 0; b < bits_per_symbol_; ++b) {
            index = (index << 1) | (bits[s * bits_per_symbol_ + b] & 1);
        }
        out[s] = points_[index];
    }
    return out;
}

// Gray label of the PAM level nearest to coord; ties go to the smaller label.
int QamConstellation::axis_level(double coord) const {
    // Continuous level position: 0 at the most positive amplitude.
    const double u = ((side_ - 1) - coord / scale_) / 2.0;
    const double lower = std::floor(u);
    const double frac = u - lower;
    int level;
    if (std::abs(frac - 0.5) <= kTieSlack) {
        const int a = static_cast<int>(lower);
        const int b = a + 1;
        if (a < 0) {
            level = 0;
        } else if (b >= side_) {
            level = side_ - 1;
        } else {
            level = level_to_gray_[a] < level_to_gray_[b] ? a : b;
        }
    } else {
        level = static_cast<int>(std::lround(u));
    }
    if (level < 0) level = 0;
    if (level >= side_) level = side_ - 1;
    return level_to_gray_[level];
}

int QamConstellation::nearest(Complex z) const {
    return (axis_level(z.real()) << half_bits_) | axis_level(z.imag());
}

Demapped QamConstellation::demap(const ComplexVec& X) const {
    Demapped out;
    out.symbols.resize(X.size());
    out.indices.resize(X.size());
    out.bits.resize(static_cast<std::size_t>(X.size()) * bits_per_symbol_);
    for (long i = 0; i < X.size(); ++i) {
        const int k = nearest(X[i]);
        out.indices[i] = k;
        out.symbols[i] = points_[k];
        for (int b = 0; b < bits_per_symbol_; ++b) {
            out.bits[i * bits_per_symbol_ + b] =
                static_cast<std::uint8_t>((k >> (bits_per_symbol_ - 1 - b)) & 1);
        }
    }
    return out;
}

}  // namespace ofdmclip
