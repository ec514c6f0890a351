#include <doctest.h>

#include <limits>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/simo.hpp"

using namespace ofdmclip;

namespace {

ComplexVec random_vec(long n, Rng& rng) { return complex_gaussian(n, 1.0, rng); }

}  // namespace

TEST_CASE("MRC against the closed form") {
    Rng rng(1);
    const ComplexVec y1 = random_vec(16, rng), y2 = random_vec(16, rng);
    const ComplexVec d1 = random_vec(16, rng), d2 = random_vec(16, rng);
    const ComplexVec out = mrc_combine({y1, y2}, {d1, d2});
    for (long k = 0; k < 16; ++k) {
        const Complex expected =
            (std::conj(d1[k]) * y1[k] + std::conj(d2[k]) * y2[k]) / (std::norm(d1[k]) + std::norm(d2[k]));
        CHECK(std::abs(out[k] - expected) < 1e-12);
    }
}

TEST_CASE("MRC of one branch is zero forcing, of a common signal is that signal") {
    Rng rng(2);
    const ComplexVec x = random_vec(32, rng);
    const ComplexVec d1 = random_vec(32, rng), d2 = random_vec(32, rng), d3 = random_vec(32, rng);
    CHECK((mrc_combine({d1.cwiseProduct(x)}, {d1}) - x).norm() < 1e-12);
    const ComplexVec out = mrc_combine({d1.cwiseProduct(x), d2.cwiseProduct(x), d3.cwiseProduct(x)}, {d1, d2, d3});
    CHECK((out - x).norm() < 1e-12);
}

TEST_CASE("MRC rejects zero energy and mismatched inputs") {
    const ComplexVec zero = ComplexVec::Zero(4);
    const ComplexVec one = ComplexVec::Ones(4);
    CHECK_THROWS_AS(mrc_combine({one}, {zero}), NumericError);
    CHECK_THROWS(mrc_combine({one, one}, {one}));
}

TEST_CASE("SIMO frame shares the clipped signal") {
    OfdmConfig cfg;
    cfg.n = 128;
    cfg.ebn0_db = std::numeric_limits<double>::infinity();
    Rng rng(3);
    const SimoFrame f = draw_simo_frame(cfg, 3, rng);
    REQUIRE(f.antennas() == 3);
    for (const Branch& b : f.branches) {
        CHECK((b.received - b.chan.response.cwiseProduct(dft(f.clip.clipped))).norm() < 1e-9);
        CHECK((b.received_noclip - b.chan.response.cwiseProduct(f.tx.symbols)).norm() < 1e-9);
    }
    CHECK(f.branches[0].chan.taps != f.branches[1].chan.taps);
    Rng again(3);
    CHECK_THROWS_AS(draw_simo_frame(cfg, 0, again), ConfigError);
}

TEST_CASE("best conditioned branch has the largest weakest carrier") {
    OfdmConfig cfg;
    cfg.n = 64;
    Rng rng(4);
    const SimoFrame f = draw_simo_frame(cfg, 4, rng);
    int expected = 0;
    double best = -1.0;
    for (int l = 0; l < 4; ++l) {
        double weakest = std::numeric_limits<double>::infinity();
        for (long k = 0; k < cfg.n; ++k) weakest = std::min(weakest, std::abs(f.branches[l].chan.response[k]));
        if (weakest > best) {
            best = weakest;
            expected = l;
        }
    }
    CHECK(best_conditioned(f) == expected);
}

TEST_CASE("receiver names round trip") {
    for (const char* name : {"none", "noclip", "individual", "joint"}) {
        CHECK(simo_receiver_name(parse_simo_receiver(name)) == name);
    }
    CHECK_THROWS_AS(parse_simo_receiver("wpa"), ConfigError);
}

TEST_CASE("one antenna: joint and individual recovery coincide") {
    OfdmConfig cfg;
    cfg.n = 256;
    cfg.measurements = 64;
    cfg.ebn0_db = 27.0;
    Rng rng(5);
    const SimoFrame f = draw_simo_frame(cfg, 1, rng);
    const SimoDecoded joint = decode_simo(f, SimoReceiver::Joint, cfg, ReceiverConfig{});
    const SimoDecoded single = decode_simo(f, SimoReceiver::Individual, cfg, ReceiverConfig{});
    CHECK(joint.bits == single.bits);
    CHECK((joint.c_hat[0] - single.c_hat[0]).norm() < 1e-9);
}

TEST_CASE("noiseless unclipped twin decodes exactly through MRC") {
    OfdmConfig cfg;
    cfg.n = 128;
    cfg.ebn0_db = std::numeric_limits<double>::infinity();
    Rng rng(6);
    const SimoFrame f = draw_simo_frame(cfg, 2, rng);
    CHECK(decode_simo(f, SimoReceiver::NoClip, cfg, ReceiverConfig{}).bits == f.bits);
}

TEST_CASE("joint system stacks the branch systems") {
    OfdmConfig cfg;
    cfg.n = 128;
    cfg.measurements = 24;
    Rng rng(7);
    const SimoFrame f = draw_simo_frame(cfg, 2, rng);
    const ComplexVec xhat = idft(f.branches[0].received.cwiseQuotient(f.branches[0].chan.response));
    const MeasurementSystem a = branch_system(f, 0, cfg, &xhat);
    const MeasurementSystem b = branch_system(f, 1, cfg, &xhat);
    CHECK(a.measurements() == 2 * cfg.measurements);
    CHECK(b.measurements() == 2 * cfg.measurements);
    // Shared phase source: identical weights and phases on both branches.
    CHECK(a.weights == b.weights);
    CHECK(a.theta == b.theta);
}

TEST_CASE("stacked likelihood is the sum of the branch likelihoods") {
    OfdmConfig cfg;
    cfg.n = 128;
    cfg.measurements = 24;
    cfg.ebn0_db = 24.0;
    Rng rng(8);
    const SimoFrame f = draw_simo_frame(cfg, 2, rng);
    const ComplexVec xhat = idft(f.branches[0].received.cwiseQuotient(f.branches[0].chan.response));
    const MeasurementSystem a = branch_system(f, 0, cfg, &xhat);
    const MeasurementSystem b = branch_system(f, 1, cfg, &xhat);
    const MeasurementSystem both = stack_systems({a, b});
    REQUIRE(both.measurements() == a.measurements() + b.measurements());
    for (const IndexSet& s : {IndexSet{}, IndexSet{3}, f.clip.support}) {
        const auto la = log_likelihood(a, s), lb = log_likelihood(b, s), lab = log_likelihood(both, s);
        REQUIRE(la);
        REQUIRE(lb);
        REQUIRE(lab);
        if (s.empty()) CHECK(*lab == doctest::Approx(*la + *lb).epsilon(1e-12));
        else CHECK(*lab <= *la + *lb + 1e-9);  // a shared amplitude fits both branches no better than two free ones
    }
}
