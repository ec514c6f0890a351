#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <set>

#include "ofdmclip/engine.hpp"
#include "ofdmclip/ofdm_link.hpp"
#include "oracles.hpp"

using namespace ofdmclip;

namespace {

struct Instance {
    MeasurementSystem sys;
    RealVec truth;
    IndexSet support;
};

// Random real system with a non-negative sparse truth.
Instance random_instance(std::uint64_t seed, int rows, int n, int sparsity, double noise_var) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> amp(0.5, 1.5);
    Instance inst;
    inst.sys.phi = RealMat(rows, n);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < n; ++c) inst.sys.phi(r, c) = normal(rng) / std::sqrt(static_cast<double>(rows));
    }
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    inst.support.assign(idx.begin(), idx.begin() + sparsity);
    std::sort(inst.support.begin(), inst.support.end());
    inst.truth = RealVec::Zero(n);
    for (int i : inst.support) inst.truth[i] = amp(rng);
    inst.sys.y = inst.sys.phi * inst.truth;
    for (int r = 0; r < rows; ++r) inst.sys.y[r] += std::sqrt(noise_var) * normal(rng);
    inst.sys.kind = SystemKind::PhaseAugmented;
    inst.sys.noise_var = std::max(noise_var, 1e-12);
    inst.sys.weights = RealVec::Zero(n);
    for (int i = 0; i < n; ++i) inst.sys.weights[i] = 0.3 * std::abs(normal(rng));
    inst.sys.theta = RealVec::Zero(n);
    return inst;
}

double log_sum_exp(const std::vector<double>& v) {
    const double peak = *std::max_element(v.begin(), v.end());
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - peak);
    return peak + std::log(acc);
}

int first_depth_with(const SparsePosterior& post, const IndexSet& target) {
    for (std::size_t s = 0; s < post.supports.size(); ++s) {
        if (post.supports[s] == target) return static_cast<int>(post.supports[s].size());
    }
    return std::numeric_limits<int>::max();
}

}  // namespace

TEST_CASE("likelihood of the empty and the exact support") {
    const Instance inst = random_instance(1, 12, 8, 2, 0.0);
    const double empty = *log_likelihood(inst.sys, {});
    CHECK(empty == doctest::Approx(-inst.sys.y.squaredNorm() / (2.0 * inst.sys.noise_var)));
    CHECK(std::abs(*log_likelihood(inst.sys, inst.support)) < 1e-8);
}

TEST_CASE("incremental likelihood equals the dense projector on every support") {
    const Instance inst = random_instance(2, 12, 8, 2, 0.01);
    for (unsigned mask = 0; mask < 256; ++mask) {
        const IndexSet s = oracle::subset(mask, 8);
        const double direct =
            -oracle::projector_residual(oracle::columns(inst.sys.phi, s), inst.sys.y) / (2.0 * inst.sys.noise_var);
        const std::optional<double> fast = log_likelihood(inst.sys, s);
        REQUIRE(fast.has_value());
        CHECK(std::abs(*fast - direct) <= 1e-8 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("likelihood grows along a support chain") {
    const Instance inst = random_instance(3, 20, 12, 3, 0.05);
    IndexSet chain;
    double last = *log_likelihood(inst.sys, chain);
    for (int i : {7, 2, 11, 0, 5}) {
        chain.push_back(i);
        std::sort(chain.begin(), chain.end());
        const double next = *log_likelihood(inst.sys, chain);
        CHECK(next >= last - 1e-9);
        last = next;
    }
}

TEST_CASE("dependent columns are rejected") {
    Instance inst = random_instance(4, 12, 8, 1, 0.0);
    inst.sys.phi.col(5) = 2.0 * inst.sys.phi.col(3);
    CHECK_FALSE(log_likelihood(inst.sys, {3, 5}).has_value());
    CHECK_THROWS_AS(blue(inst.sys, {3, 5}), NumericError);
}

TEST_CASE("prior forms") {
    const SupportPrior u = SupportPrior::uniform(0.1, 8);
    CHECK(log_prior(u, {1, 4}) == doctest::Approx(2 * std::log(0.1) + 6 * std::log(0.9)));
    CHECK(log_prior(u, {}) == doctest::Approx(8 * std::log(0.9)));

    RealVec w(8);
    w << 0.0, 0.4, 1.0, 2.0, 0.1, 3.0, 0.7, 30.0;
    const SupportPrior p = SupportPrior::weighted(0.2, w);
    CHECK(p.activation.maxCoeff() == doctest::Approx(0.2));
    CHECK(p.activation[1] == doctest::Approx(0.2 * std::exp(-0.4)));
    CHECK(p.activation[7] == SupportPrior::kClamp);
    CHECK(p.activation.minCoeff() >= SupportPrior::kClamp);

    std::vector<double> all;
    for (unsigned mask = 0; mask < 256; ++mask) all.push_back(log_prior(p, oracle::subset(mask, 8)));
    CHECK(std::abs(log_sum_exp(all)) < 1e-12);
}

TEST_CASE("BLUE against independent solvers") {
    const Instance exact = random_instance(5, 12, 8, 2, 0.0);
    const RealVec a = blue(exact.sys, exact.support);
    for (std::size_t j = 0; j < exact.support.size(); ++j) {
        CHECK(std::abs(a[j] - exact.truth[exact.support[j]]) < 1e-8);
    }

    const Instance noisy = random_instance(6, 30, 10, 3, 0.1);
    const RealVec single = blue(noisy.sys, {4});
    const RealVec col = noisy.sys.phi.col(4);
    CHECK(single[0] == doctest::Approx(noisy.sys.y.dot(col) / col.squaredNorm()).epsilon(1e-12));

    const IndexSet s{0, 3, 6, 9};
    const RealVec ours = blue(noisy.sys, s);
    const RealMat cols = oracle::columns(noisy.sys.phi, s);
    CHECK((ours - oracle::normal_equations(cols, noisy.sys.y)).cwiseAbs().maxCoeff() < 1e-8);
    const RealVec resid = noisy.sys.y - cols * ours;
    CHECK((cols.transpose() * resid).cwiseAbs().maxCoeff() <= 1e-8 * noisy.sys.y.norm());
}

TEST_CASE("noiseless single spike is found with near certainty") {
    const Instance inst = random_instance(7, 12, 8, 1, 0.0);
    SearchParams params;
    params.max_depth = 1;
    const SparsePosterior post = greedy_search(inst.sys, SupportPrior::uniform(0.1, 8), params);
    CHECK(post.supports[post.best()] == inst.support);
    CHECK(post.weights[post.best()] > 0.99);
}

TEST_CASE("approximate MMSE matches the exhaustive sum") {
    const auto start = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
        const int sparsity = 1 + static_cast<int>(seed % 2);
        const Instance inst = random_instance(seed, 12, 8, sparsity, 1e-3);
        const SupportPrior prior = SupportPrior::weighted(0.03, inst.sys.weights);
        SearchParams params;
        params.max_depth = 8;
        params.nonnegative = false;
        const SparsePosterior post = greedy_search(inst.sys, prior, params);
        const RealVec approx = post.mean();
        const RealVec exact = oracle::exhaustive_mmse(inst.sys.phi, inst.sys.y, prior.activation, inst.sys.noise_var);
        CHECK((approx - exact).norm() <= 1e-3 * exact.norm());
    }
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(30));
}

TEST_CASE("posterior bookkeeping") {
    const Instance inst = random_instance(8, 40, 24, 4, 0.05);
    const SparsePosterior post = greedy_search(inst.sys, SupportPrior::uniform(0.15, 24), SearchParams{});
    double total = 0.0;
    for (double w : post.weights) {
        CHECK(w >= 0.0);
        total += w;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    std::set<IndexSet> distinct(post.supports.begin(), post.supports.end());
    CHECK(distinct.size() == post.supports.size());
    for (std::size_t s = 0; s < post.supports.size(); ++s) {
        CHECK(std::is_sorted(post.supports[s].begin(), post.supports[s].end()));
        if (post.supports[s].empty()) continue;
        const RealMat cols = oracle::columns(inst.sys.phi, post.supports[s]);
        const RealVec resid = inst.sys.y - cols * post.blue[s];
        CHECK((cols.transpose() * resid).cwiseAbs().maxCoeff() <= 1e-8 * inst.sys.y.norm());
    }
}

TEST_CASE("a confident weighted prior reaches the truth no later") {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        Instance inst = random_instance(seed, 16, 32, 3, 0.05);
        inst.sys.weights = RealVec::Constant(32, 8.0);
        for (int i : inst.support) inst.sys.weights[i] = 0.0;
        const SupportPrior weighted = SupportPrior::weighted(1.0 - 1e-6, inst.sys.weights);
        const SupportPrior uniform = SupportPrior::uniform(3.0 / 32, 32);
        SearchParams params;
        params.early_stop = false;
        params.max_depth = 6;
        const int dw = first_depth_with(greedy_search(inst.sys, weighted, params), inst.support);
        const int du = first_depth_with(greedy_search(inst.sys, uniform, params), inst.support);
        CHECK(dw <= du);
        CHECK(dw == 3);
    }
}

TEST_CASE("recovery output form, determinism and permutation equivariance") {
    Instance inst = random_instance(9, 24, 16, 3, 0.01);
    Rng rng(1);
    std::uniform_real_distribution<double> ang(-kPi, kPi);
    for (int i = 0; i < 16; ++i) inst.sys.theta[i] = ang(rng);
    const SupportPrior prior = SupportPrior::weighted(0.2, inst.sys.weights);
    const RecoveryOutput a = recover(inst.sys, prior, SearchParams{});
    const RecoveryOutput b = recover(inst.sys, prior, SearchParams{});
    CHECK(a.c_hat == b.c_hat);
    CHECK(a.posterior.log_metric == b.posterior.log_metric);
    CHECK(a.c_mag.minCoeff() >= 0.0);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(a.c_hat[i] - std::polar(a.c_mag[i], inst.sys.theta[i])) < 1e-15);
    for (int i : a.support_hat) CHECK(a.c_mag[i] > 0.05 * a.c_mag.maxCoeff());

    std::vector<int> perm(16);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    MeasurementSystem shuffled = inst.sys;
    SupportPrior sp = prior;
    for (int i = 0; i < 16; ++i) {
        shuffled.phi.col(i) = inst.sys.phi.col(perm[i]);
        shuffled.theta[i] = inst.sys.theta[perm[i]];
        shuffled.weights[i] = inst.sys.weights[perm[i]];
        sp.activation[i] = prior.activation[perm[i]];
    }
    const RecoveryOutput c = recover(shuffled, sp, SearchParams{});
    for (int i = 0; i < 16; ++i) CHECK(std::abs(c.c_mag[i] - a.c_mag[perm[i]]) < 1e-10);
}

TEST_CASE("unweighted mode on uniform weights equals weighted recovery") {
    Instance inst = random_instance(10, 24, 16, 3, 0.01);
    inst.sys.weights = RealVec::Constant(16, 0.7);
    const RecoveryOutput a = recover(inst.sys, SupportPrior::weighted(0.1, inst.sys.weights), SearchParams{});
    const RecoveryOutput b = ablation(inst.sys, 0.1, SearchParams{}, EngineMode::Unweighted);
    CHECK(a.c_hat == b.c_hat);
    CHECK_THROWS_AS(ablation(inst.sys, 0.1, SearchParams{}, EngineMode::Plain), ConfigError);
}

TEST_CASE("complex amplitudes on an exact support") {
    Rng rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    MeasurementSystem sys;
    sys.kind = SystemKind::Complex;
    const int rows = 24, n = 10;
    sys.phi = RealMat(rows, 2 * n);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < 2 * n; ++c) sys.phi(r, c) = normal(rng);
    }
    RealVec truth = RealVec::Zero(2 * n);
    truth[6] = 0.8;
    truth[7] = -0.3;
    truth[14] = -1.1;
    truth[15] = 0.4;
    sys.y = sys.phi * truth;
    sys.noise_var = 1e-12;
    sys.weights = RealVec::Zero(n);
    sys.theta = RealVec::Zero(n);
    const RecoveryOutput o = oracle_ls(sys, {7, 3});
    CHECK(std::abs(o.c_hat[3] - Complex(0.8, -0.3)) < 1e-9);
    CHECK(std::abs(o.c_hat[7] - Complex(-1.1, 0.4)) < 1e-9);
    const RecoveryOutput g = ablation(sys, 0.2, SearchParams{}, EngineMode::Plain);
    CHECK((g.c_hat - o.c_hat).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(oracle_ls(sys, {}).c_hat.isZero(0.0));
}

TEST_CASE("refinement bookkeeping") {
    ComplexVec flat(4);
    flat << 1.0, Complex(0.0, 1.0), -1.0, Complex(0.0, -1.0);
    ComplexVec spread(4);
    spread << 0.5, 1.0, 1.5, 2.0;
    CHECK(initial_rate(spread, 1.25) == doctest::Approx(0.5));

    Instance inst = random_instance(12, 40, 32, 3, 1e-4);
    CHECK_THROWS_AS(refine(inst.sys, {0.1, 1e-4}, SearchParams{}, 0), ConfigError);
    const RecoveryOutput r = refine(inst.sys, {3.0 / 32, 1e-4}, SearchParams{}, 5);
    CHECK(r.iterations <= 2);
    CHECK(r.support_hat == inst.support);
    CHECK(r.rate == doctest::Approx(3.0 / 32));

    const RecoveryOutput low = refine(inst.sys, {0.01 * 3.0 / 32, 1e-6}, SearchParams{}, 5);
    CHECK(low.support_hat == inst.support);
    CHECK(low.iterations <= 5);
}
