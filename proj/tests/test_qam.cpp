#include <doctest.h>

#include <bit>
#include <random>

#include "ofdmclip/ofdm_link.hpp"
#include "ofdmclip/qam.hpp"

using namespace ofdmclip;

namespace {

int exhaustive_nearest(const QamConstellation& q, Complex z) {
    int best = 0;
    for (int k = 1; k < q.order(); ++k) {
        if (std::norm(z - q.point(k)) < std::norm(z - q.point(best))) best = k;
    }
    return best;
}

}  // namespace

TEST_CASE("4-QAM label 00 sits in the first quadrant corner") {
    const QamConstellation q(4);
    const ComplexVec s = q.map({0, 0});
    CHECK(std::abs(s[0] - Complex(1.0, 1.0) / std::sqrt(2.0)) < 1e-15);
}

TEST_CASE("unit energy, square symmetric lattice, Gray neighbors") {
    for (int m : {4, 16, 64}) {
        const QamConstellation q(m);
        double energy = 0.0;
        for (const Complex& p : q.points()) energy += std::norm(p);
        CHECK(energy / m == doctest::Approx(1.0).epsilon(1e-12));

        for (int a = 0; a < m; ++a) {
            bool mirrored = false;
            for (int b = 0; b < m; ++b) mirrored |= std::abs(q.point(a) + q.point(b)) < 1e-12;
            CHECK(mirrored);
            for (int b = 0; b < m; ++b) {
                const Complex d = q.point(a) - q.point(b);
                const bool adjacent = std::abs(std::abs(d) - q.min_distance()) < 1e-12;
                if (adjacent) CHECK(std::popcount(static_cast<unsigned>(a ^ b)) == 1);
            }
        }
    }
}

TEST_CASE("map and demap round trip every 64-QAM label") {
    const QamConstellation q(64);
    Bits bits;
    for (int k = 0; k < 64; ++k) {
        const Bits l = q.label(k);
        bits.insert(bits.end(), l.begin(), l.end());
    }
    const Demapped d = q.demap(q.map(bits));
    CHECK(d.bits == bits);
    for (int k = 0; k < 64; ++k) CHECK(d.indices[k] == k);
}

TEST_CASE("ragged bit count is rejected") {
    CHECK_THROWS_AS(QamConstellation(16).map(Bits(5, 0)), InputError);
    CHECK_THROWS_AS(QamConstellation(8), ConfigError);
}

TEST_CASE("midpoints go to the smaller index") {
    const QamConstellation q(16);
    for (int a = 0; a < 16; ++a) {
        for (int b = a + 1; b < 16; ++b) {
            if (std::abs(std::abs(q.point(a) - q.point(b)) - q.min_distance()) > 1e-12) continue;
            const Complex mid = 0.5 * (q.point(a) + q.point(b));
            CHECK(q.nearest(mid) == a);
        }
    }
}

TEST_CASE("small perturbations decode to the transmitted point") {
    for (int m : {4, 16, 64}) {
        const QamConstellation q(m);
        Rng rng(m);
        std::uniform_real_distribution<double> radius(0.0, 0.499 * q.min_distance());
        std::uniform_real_distribution<double> angle(-kPi, kPi);
        std::uniform_int_distribution<int> pick(0, m - 1);
        for (int t = 0; t < 1000; ++t) {
            const int k = pick(rng);
            const Complex z = q.point(k) + std::polar(radius(rng), angle(rng));
            CHECK(q.nearest(z) == k);
            CHECK(exhaustive_nearest(q, z) == k);
        }
    }
}

TEST_CASE("demap agrees with exhaustive search and is idempotent") {
    const QamConstellation q(64);
    Rng rng(99);
    const ComplexVec z = complex_gaussian(4000, 2.0, rng);
    const Demapped d = q.demap(z);
    for (long i = 0; i < z.size(); ++i) CHECK(d.indices[i] == exhaustive_nearest(q, z[i]));
    const Demapped again = q.demap(q.map(d.bits));
    CHECK(again.bits == d.bits);
}
