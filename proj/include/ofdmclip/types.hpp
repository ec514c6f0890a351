#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ofdmclip {

using Complex = std::complex<double>;
using ComplexVec = Eigen::VectorXcd;
using ComplexMat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

/// Sorted or insertion-ordered list of distinct indices.
using IndexSet = std::vector<int>;

/// One bit per byte, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

/// Invalid static parameters (sizes, counts, ratios).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed runtime input (wrong length, zero vector).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown (singular systems, spectral nulls).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace ofdmclip
