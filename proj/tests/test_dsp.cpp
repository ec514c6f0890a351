#include <doctest.h>

#include <random>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/ofdm_link.hpp"
#include "oracles.hpp"

using namespace ofdmclip;

namespace {

ComplexVec random_vec(long n, std::uint64_t seed) {
    Rng rng(seed);
    return complex_gaussian(n, 1.0, rng);
}

}  // namespace

TEST_CASE("impulse transforms to a flat spectrum") {
    ComplexVec x = ComplexVec::Zero(8);
    x[0] = 1.0;
    const ComplexVec X = dft(x);
    for (long k = 0; k < 8; ++k) CHECK(std::abs(X[k] - 1.0 / std::sqrt(8.0)) < 1e-15);
}

TEST_CASE("constant transforms to a scaled impulse and back") {
    const ComplexVec ones = ComplexVec::Ones(4);
    const ComplexVec X = dft(ones);
    CHECK(std::abs(X[0] - 2.0) < 1e-15);
    for (long k = 1; k < 4; ++k) CHECK(std::abs(X[k]) < 1e-15);
    CHECK((idft(X) - ones).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("idft of a unit tone has flat magnitude") {
    ComplexVec X = ComplexVec::Zero(16);
    X[3] = 1.0;
    const ComplexVec x = idft(X);
    for (long i = 0; i < 16; ++i) CHECK(std::abs(std::abs(x[i]) - 0.25) < 1e-14);
}

TEST_CASE("radix-2 transform agrees with the direct sum") {
    for (int n : {2, 8, 32, 128}) {
        const ComplexVec x = random_vec(n, 11 + n);
        CHECK((dft(x) - oracle::naive_dft(x, -1)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((idft(x) - oracle::naive_dft(x, +1)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("Parseval and round trips from 8 to 1024 points") {
    for (int n = 8; n <= 1024; n *= 2) {
        const ComplexVec x = random_vec(n, n);
        CHECK(std::abs(dft(x).norm() - x.norm()) <= 1e-10 * x.norm());
        CHECK((idft(dft(x)) - x).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((dft(idft(x)) - x).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("non power of two lengths are rejected") {
    CHECK_THROWS_AS(dft(ComplexVec::Ones(6)), ConfigError);
    CHECK_THROWS_AS(idft(ComplexVec::Ones(12)), ConfigError);
}

TEST_CASE("papr") {
    ComplexVec flat(16);
    for (long i = 0; i < 16; ++i) flat[i] = std::polar(2.0, 0.3 * i);
    CHECK(papr(flat) == doctest::Approx(1.0).epsilon(1e-14));

    ComplexVec delta = ComplexVec::Zero(64);
    delta[0] = 1.0;
    CHECK(papr(delta) == doctest::Approx(64.0).epsilon(1e-14));

    CHECK_THROWS_AS(papr(ComplexVec::Zero(4)), InputError);

    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ComplexVec x = random_vec(512, seed);
        const ClipResult c = clip(x, 1.4);
        // recomputed directly from the definition
        const double peak = c.clipped.cwiseAbs2().maxCoeff();
        const double mean = c.clipped.cwiseAbs2().mean();
        CHECK(papr(c.clipped) == doctest::Approx(peak / mean).epsilon(1e-12));
        CHECK(papr(c.clipped) <= papr(x));
    }
}
