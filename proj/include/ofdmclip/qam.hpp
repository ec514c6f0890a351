#pragma once

#include "ofdmclip/types.hpp"

namespace ofdmclip {

/// Result of hard-decision demapping.
struct Demapped {
    Bits bits;
    ComplexVec symbols;       // nearest constellation points
    std::vector<int> indices; // constellation indices (== integer bit labels)
};

/// Square Gray-coded M-QAM with unit average symbol energy.
///
/// Point k carries the bit label k written MSB first. The first half of the
/// label selects the in-phase level, the second half the quadrature level,
/// each through a binary-reflected Gray code; label bit 0 maps to the
/// positive side of its axis.
class QamConstellation {
public:
    /// Throws ConfigError unless order is 4, 16 or 64.
    explicit QamConstellation(int order);

    int order() const { return order_; }
    int bits_per_symbol() const { return bits_per_symbol_; }
    const std::vector<Complex>& points() const { return points_; }
    const Complex& point(int index) const { return points_[index]; }
    /// Bit label of point `index`, MSB first.
    Bits label(int index) const;
    double min_distance() const { return 2.0 * scale_; }

    /// One symbol per bits_per_symbol() bits. Throws InputError on a ragged bit count.
    ComplexVec map(const Bits& bits) const;

    /// Nearest point by Euclidean distance. Exact ties go to the smaller index.
    int nearest(Complex z) const;

    Demapped demap(const ComplexVec& X) const;

private:
    int axis_level(double coord) const;

    int order_;
    int bits_per_symbol_;
    int side_;          // sqrt(order)
    int half_bits_;     // bits per axis
    double scale_;      // half the minimum distance
    std::vector<Complex> points_;
    std::vector<int> level_to_gray_;  // level 0 = most positive
};

}  // namespace ofdmclip
