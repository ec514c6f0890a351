#include <doctest.h>

#include <limits>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/ofdma.hpp"
#include "oracles.hpp"

using namespace ofdmclip;

namespace {

OfdmConfig small_link(double ebn0_db) {
    OfdmConfig cfg;
    cfg.n = 128;
    cfg.measurements = 20;
    cfg.ebn0_db = ebn0_db;
    return cfg;
}

}  // namespace

TEST_CASE("interleaved layout partitions the carriers") {
    OfdmaLayout layout;
    layout.n = 64;
    layout.users = 2;
    layout.reserved = 10;
    layout.validate();
    std::vector<int> owner(64, -1);
    for (int u = 0; u < 2; ++u) {
        const IndexSet comb = layout.carriers(u);
        CHECK(comb.size() == 32);
        for (int k : comb) {
            CHECK(k % 2 == u);
            CHECK(owner[k] == -1);
            owner[k] = u;
        }
        const IndexSet reserved = layout.reserved_tones(u);
        const IndexSet data = layout.data_carriers(u);
        CHECK(reserved.size() == 10);
        CHECK(std::is_sorted(reserved.begin(), reserved.end()));
        CHECK(std::adjacent_find(reserved.begin(), reserved.end()) == reserved.end());
        CHECK(reserved.size() + data.size() == comb.size());
        for (int k : reserved) {
            CHECK(k % 2 == u);
            CHECK(std::find(data.begin(), data.end(), k) == data.end());
        }
    }
    CHECK(std::count(owner.begin(), owner.end(), -1) == 0);
}

TEST_CASE("layout validation") {
    OfdmaLayout layout;
    layout.n = 65;
    CHECK_THROWS_AS(layout.validate(), ConfigError);
    layout.n = 64;
    layout.reserved = 32;
    CHECK_THROWS_AS(layout.validate(), ConfigError);
    layout.reserved = 0;
    CHECK_THROWS_AS(layout.validate(), ConfigError);
}

TEST_CASE("received spectrum is the sum of the users' clipped spectra plus noise") {
    const OfdmConfig cfg = small_link(20.0);
    Rng rng(1);
    const OfdmaFrame f = build_ofdma(cfg, rng);
    ComplexVec sum = oracle::naive_dft(f.noise);
    ComplexVec sum_noclip = sum;
    for (const UserSignal& u : f.users) {
        sum += u.chan.response.cwiseProduct(oracle::naive_dft(u.clip.clipped));
        sum_noclip += u.chan.response.cwiseProduct(oracle::naive_dft(u.clip.x));
    }
    CHECK((f.received - sum).norm() < 1e-9);
    CHECK((f.received_noclip - sum_noclip).norm() < 1e-9);
    CHECK(f.data_bits() == f.users[0].bits.size() + f.users[1].bits.size());
}

TEST_CASE("each user's clipping distortion stays on its own comb") {
    const OfdmConfig cfg = small_link(std::numeric_limits<double>::infinity());
    Rng rng(2);
    const OfdmaFrame f = build_ofdma(cfg, rng);
    for (int u = 0; u < 2; ++u) {
        REQUIRE_FALSE(f.users[u].clip.support.empty());
        const ComplexVec spectrum = oracle::naive_dft(f.users[u].clip.distortion);
        double off = 0.0;
        for (long k = 0; k < cfg.n; ++k) {
            if (k % 2 != u) off = std::max(off, std::abs(spectrum[k]));
        }
        CHECK(off < 1e-9);
    }
}

TEST_CASE("removing every user's true distortion leaves the unclipped reception") {
    const OfdmConfig cfg = small_link(15.0);
    Rng rng(3);
    const OfdmaFrame f = build_ofdma(cfg, rng);
    const ComplexVec after_one = remove_user(f, 0, f.users[0].clip.distortion);
    CHECK((after_one - f.received + f.users[0].chan.response.cwiseProduct(dft(f.users[0].clip.distortion))).norm() <
          1e-9);
    const ComplexVec after_both = after_one - f.users[1].chan.response.cwiseProduct(dft(f.users[1].clip.distortion));
    CHECK((after_both - f.received_noclip).norm() < 1e-9);
}

TEST_CASE("stacked operator applies every user's channel and transform") {
    const OfdmConfig cfg = small_link(20.0);
    Rng rng(4);
    const OfdmaFrame f = build_ofdma(cfg, rng);
    const IndexSet rows{0, 1, 5, 40, 127};
    const ComplexMat psi = stacked_operator(f, rows);
    REQUIRE(psi.rows() == 5);
    REQUIRE(psi.cols() == 2 * cfg.n);
    const ComplexVec c0 = complex_gaussian(cfg.n, 1.0, rng), c1 = complex_gaussian(cfg.n, 1.0, rng);
    ComplexVec stacked(2 * cfg.n);
    stacked << c0, c1;
    const ComplexVec expected = f.users[0].chan.response.cwiseProduct(oracle::naive_dft(c0)) +
                                f.users[1].chan.response.cwiseProduct(oracle::naive_dft(c1));
    const ComplexVec got = psi * stacked;
    for (std::size_t r = 0; r < rows.size(); ++r) CHECK(std::abs(got[r] - expected[rows[r]]) < 1e-9);
}

TEST_CASE("a silent user carries nothing and is not clipped") {
    const OfdmConfig cfg = small_link(20.0);
    Rng rng(5);
    const OfdmaFrame f = build_ofdma(cfg, rng, {true, false});
    CHECK(f.users[1].bits.empty());
    CHECK(f.users[1].symbols.norm() == 0.0);
    CHECK(f.users[1].clip.support.empty());
    CHECK(f.data_bits() == f.users[0].bits.size());
    const OfdmaDecoded d = decode_ofdma(f, OfdmaReceiver::TwoStage, cfg, SearchParams{});
    CHECK(d.bits[1].empty());
    CHECK(d.bits[0].size() == f.users[0].bits.size());
}

TEST_CASE("noiseless unclipped twin decodes every user exactly") {
    const OfdmConfig cfg = small_link(std::numeric_limits<double>::infinity());
    Rng rng(6);
    const OfdmaFrame f = build_ofdma(cfg, rng);
    const OfdmaDecoded d = decode_ofdma(f, OfdmaReceiver::NoClip, cfg, SearchParams{});
    CHECK(ofdma_bits(d) == ofdma_bits(f));
}

TEST_CASE("decoupling with the true distortions as the joint estimate reproduces the re-clip exactly") {
    const OfdmConfig cfg = small_link(std::numeric_limits<double>::infinity());
    Rng rng(7);
    const OfdmaFrame f = build_ofdma(cfg, rng);
    const OfdmaDecoded d =
        decouple(f, {f.users[0].clip.distortion, f.users[1].clip.distortion}, cfg, SearchParams{});
    for (int u = 0; u < 2; ++u) CHECK((d.c_cpa[u] - f.users[u].clip.distortion).norm() < 1e-9);
    CHECK(ofdma_bits(d) == ofdma_bits(f));
    CHECK_THROWS_AS(decouple(f, {f.users[0].clip.distortion}, cfg, SearchParams{}), InputError);
}

TEST_CASE("multiuser receiver names round trip") {
    for (const char* name : {"none", "noclip", "joint_only", "two_stage"}) {
        CHECK(ofdma_receiver_name(parse_ofdma_receiver(name)) == name);
    }
    CHECK_THROWS_AS(parse_ofdma_receiver("joint"), ConfigError);
}
