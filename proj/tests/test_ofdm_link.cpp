#include <doctest.h>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/ofdm_link.hpp"
#include "ofdmclip/receiver.hpp"
#include "oracles.hpp"

using namespace ofdmclip;

namespace {

OfdmConfig small_config() {
    OfdmConfig cfg;
    cfg.n = 64;
    cfg.taps = 4;
    cfg.measurements = 16;
    return cfg;
}

double phase_gap(double a, double b) { return std::abs(std::remainder(a - b, 2.0 * kPi)); }

}  // namespace

TEST_CASE("constant spectrum becomes an impulse") {
    const OfdmConfig cfg = [] {
        OfdmConfig c;
        c.n = 4;
        c.qam_order = 4;
        c.taps = 1;
        c.measurements = 1;
        return c;
    }();
    const Transmission t = transmit(Bits(8, 0), cfg);
    const Complex corner = Complex(1.0, 1.0) / std::sqrt(2.0);
    for (long k = 0; k < 4; ++k) CHECK(std::abs(t.symbols[k] - corner) < 1e-15);
    CHECK(std::abs(t.time[0] - 2.0 * corner) < 1e-15);
    for (long i = 1; i < 4; ++i) CHECK(std::abs(t.time[i]) < 1e-15);
    CHECK(std::abs(t.time.norm() - t.symbols.norm()) < 1e-12);
    CHECK_THROWS_AS(transmit(Bits(7, 0), cfg), InputError);
}

TEST_CASE("config validation") {
    OfdmConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.n = 500;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = OfdmConfig{};
    cfg.measurements = cfg.n;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = OfdmConfig{};
    cfg.clip_ratio = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(noise_variance_for(64, 0.0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("time samples have unit mean power") {
    OfdmConfig cfg;
    const QamConstellation q(64);
    Rng rng(5);
    double power = 0.0;
    long count = 0;
    while (count < 100000) {
        const Transmission t = transmit(random_bits(cfg.n * 6, rng), q, cfg.n);
        power += t.time.squaredNorm();
        count += cfg.n;
    }
    CHECK(std::abs(power / count - 1.0) < 0.02);
}

TEST_CASE("clip edge cases") {
    ComplexVec x(1);
    x[0] = 3.0;
    const ClipResult r = clip_at(x, 1.0);
    CHECK(std::abs(r.clipped[0] - 1.0) < 1e-15);
    CHECK(std::abs(r.distortion[0] + 2.0) < 1e-15);

    Rng rng(1);
    const ComplexVec y = complex_gaussian(64, 1.0, rng);
    const ClipResult none = clip(y, 100.0);
    CHECK(none.support.empty());
    CHECK(none.clipped == y);
    CHECK(none.distortion.isZero(0.0));
    CHECK_THROWS_AS(clip(ComplexVec::Zero(8), 1.0), InputError);
}

TEST_CASE("clip invariants on random frames") {
    Rng rng(17);
    const QamConstellation q(64);
    for (int f = 0; f < 20; ++f) {
        const Transmission t = transmit(random_bits(512 * 6, rng), q, 512);
        const ClipResult r = clip(t.time, 1.61);
        CHECK(r.gamma == doctest::Approx(1.61 * rms(t.time)));
        CHECK(r.clipped == t.time + r.distortion);
        std::vector<char> on(512, 0);
        for (int i : r.support) {
            on[i] = 1;
            CHECK(std::abs(std::abs(r.clipped[i]) - r.gamma) < 1e-12);
            CHECK(phase_gap(std::arg(r.clipped[i]), std::arg(t.time[i])) < 1e-9);
            CHECK(phase_gap(std::arg(r.distortion[i]), std::arg(t.time[i]) - kPi) < 1e-9);
        }
        for (int i = 0; i < 512; ++i) {
            if (on[i]) continue;
            CHECK(r.distortion[i] == Complex(0.0, 0.0));
            CHECK(std::abs(t.time[i]) <= r.gamma);
        }
    }
}

TEST_CASE("clip rate follows the Rayleigh tail") {
    const QamConstellation q(64);
    for (double cr : {1.4, 1.61, 2.0}) {
        Rng rng(static_cast<std::uint64_t>(cr * 1000));
        long clipped = 0, total = 0;
        while (total < 200000) {
            const Transmission t = transmit(random_bits(512 * 6, rng), q, 512);
            clipped += static_cast<long>(clip(t.time, cr).support.size());
            total += 512;
        }
        const double expected = std::exp(-cr * cr);
        CHECK(std::abs(static_cast<double>(clipped) / total / expected - 1.0) < 0.05);
    }
}

TEST_CASE("channel energy and frequency response") {
    OfdmConfig cfg = small_config();
    Rng rng(3);
    double energy = 0.0;
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        const ChannelRealization ch = draw_channel(cfg, rng);
        const double e = ch.taps.squaredNorm();
        energy += e;
        CHECK(ch.response.cwiseAbs2().mean() == doctest::Approx(e).epsilon(1e-12));
    }
    CHECK(std::abs(energy / draws - 1.0) < 0.02);

    cfg.tap_variance = TapVariance::PerTapUnit;
    double literal = 0.0;
    for (int d = 0; d < 2000; ++d) literal += draw_channel(cfg, rng).taps.squaredNorm();
    CHECK(std::abs(literal / 2000 / cfg.taps - 1.0) < 0.05);

    cfg.taps = 1;
    const ChannelRealization flat = draw_channel(cfg, rng);
    const double mag = std::abs(flat.response[0]);
    for (long k = 0; k < cfg.n; ++k) CHECK(std::abs(std::abs(flat.response[k]) - mag) < 1e-12);
}

TEST_CASE("convolution theorem and identity channel") {
    OfdmConfig cfg = small_config();
    Rng rng(8);
    const ChannelRealization ch = draw_channel(cfg, rng);
    const ComplexVec x = complex_gaussian(cfg.n, 1.0, rng);
    const ComplexVec lhs = dft(circular_convolve(x, ch.taps));
    const ComplexVec rhs = ch.response.cwiseProduct(dft(x));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);

    ChannelRealization ident;
    ident.taps = ComplexVec::Ones(1);
    ident.response = frequency_response(ident.taps, cfg.n);
    ident.noise_var = 0.0;
    CHECK(propagate(x, ident, rng) == x);
}

TEST_CASE("noise power is calibrated") {
    ChannelRealization ident;
    ident.taps = ComplexVec::Ones(1);
    ident.response = ComplexVec::Ones(1024);
    ident.noise_var = noise_variance_for(64, 10.0);
    Rng rng(21);
    double power = 0.0;
    long count = 0;
    double eq_power = 0.0;
    while (count < 1000000) {
        const ComplexVec z = propagate(ComplexVec::Zero(1024), ident, rng);
        power += z.squaredNorm();
        eq_power += equalize(z, ident.response).freq.squaredNorm();
        count += 1024;
    }
    CHECK(std::abs(power / count / ident.noise_var - 1.0) < 0.03);
    CHECK(std::abs(eq_power / count / ident.noise_var - 1.0) < 0.03);
}

TEST_CASE("noiseless equalization recovers symbols and exposes the distortion") {
    OfdmConfig cfg;
    cfg.ebn0_db = std::numeric_limits<double>::infinity();
    const QamConstellation q(64);
    Rng rng(4);
    for (int f = 0; f < 10; ++f) {
        const Bits bits = random_bits(cfg.n * 6, rng);
        const Transmission t = transmit(bits, q, cfg.n);
        ChannelRealization ch = draw_channel(cfg, rng);
        ch.noise_var = 0.0;

        const Equalized plain = equalize(propagate(t.time, ch, rng), ch.response);
        CHECK((plain.freq - t.symbols).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(q.demap(plain.freq).bits == bits);

        const ClipResult r = clip(t.time, 1.61);
        const Equalized eq = equalize(propagate(r.clipped, ch, rng), ch.response);
        CHECK((eq.time - t.time - r.distortion).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("spectral null is a numeric error") {
    ComplexVec response = ComplexVec::Ones(8);
    response[3] = 0.0;
    CHECK_THROWS_AS(equalize(ComplexVec::Ones(8), response), NumericError);
}

TEST_CASE("unclipped BER over the multipath channel matches the Rayleigh closed form") {
    OfdmConfig cfg;
    cfg.n = 256;
    cfg.qam_order = 16;
    cfg.ebn0_db = 15.0;
    cfg.measurements = 16;
    const QamConstellation qam(16);
    long errors = 0, bits = 0;
    Rng rng(2024);
    for (int f = 0; f < 400; ++f) {
        const LinkFrame frame = draw_frame(cfg, rng);
        const Bits got = qam.demap(frame.received_noclip.cwiseQuotient(frame.chan.response)).bits;
        errors += static_cast<long>(count_bit_errors(frame.bits, got));
        bits += static_cast<long>(frame.bits.size());
    }
    const double expected = oracle::rayleigh_qam_ber(16, std::pow(10.0, 1.5));
    CHECK(static_cast<double>(errors) / static_cast<double>(bits) == doctest::Approx(expected).epsilon(0.08));
}
