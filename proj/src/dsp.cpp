#include "ofdmclip/dsp.hpp"

#include <cmath>
#include <map>
#include <memory>

namespace ofdmclip {

namespace {

// Twiddles and bit-reversal permutation for one transform length.
struct Radix2Plan {
    explicit Radix2Plan(int n) : size(n), twiddle(n / 2), reversed(n) {
        for (int k = 0; k < n / 2; ++k) {
            const double angle = -2.0 * kPi * k / n;
            twiddle[k] = Complex(std::cos(angle), std::sin(angle));
        }
        int bits = 0;
        while ((1 << bits) < n) ++bits;
        for (int i = 0; i < n; ++i) {
            int r = 0;
            for (int b = 0; b < bits; ++b) {
                if (i & (1 << b)) r |= 1 << (bits - 1 - b);
            }
            reversed[i] = r;
        }
    }

    int size;
    std::vector<Complex> twiddle;
    std::vector<int> reversed;
};

const Radix2Plan& plan_for(int n) {
    thread_local std::map<int, std::unique_ptr<Radix2Plan>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Radix2Plan>(n);
    return *slot;
}

ComplexVec transform(const ComplexVec& in, bool inverse) {
    const long n = in.size();
    if (!is_power_of_two(n)) {
        throw ConfigError("transform length " + std::to_string(n) + " is not a power of two");
    }
    const Radix2Plan& plan = plan_for(static_cast<int>(n));
    ComplexVec out(n);
    for (long i = 0; i < n; ++i) out[plan.reversed[i]] = in[i];

    for (long len = 2; len <= n; len <<= 1) {
        const long half = len / 2;
        const long stride = n / len;
        for (long start = 0; start < n; start += len) {
            for (long k = 0; k < half; ++k) {
                Complex w = plan.twiddle[k * stride];
                if (inverse) w = std::conj(w);
                const Complex a = out[start + k];
                const Complex b = w * out[start + k + half];
                out[start + k] = a + b;
                out[start + k + half] = a - b;
            }
        }
    }
    out *= 1.0 / std::sqrt(static_cast<double>(n));
    return out;
}

}  // namespace

bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

ComplexVec dft(const ComplexVec& x) { return transform(x, false); }

ComplexVec idft(const ComplexVec& X) { return transform(X, true); }

double papr(const ComplexVec& x) {
    const double mean_power = x.squaredNorm() / static_cast<double>(x.size());
    if (x.size() == 0 || mean_power == 0.0) throw InputError("papr of a zero vector");
    return x.cwiseAbs2().maxCoeff() / mean_power;
}

double rms(const ComplexVec& x) {
    if (x.size() == 0) return 0.0;
    return std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

}  // namespace ofdmclip
