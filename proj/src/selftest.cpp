#include "ofdmclip/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/harness.hpp"
#include "ofdmclip/receiver.hpp"

namespace ofdmclip {

namespace {

// Posterior mean over all 2^n supports of a real one-column-per-index model.
RealVec exhaustive_mean(const RealMat& phi, const RealVec& y, const RealVec& activation, double noise_var) {
    const int n = static_cast<int>(phi.cols());
    const unsigned count = 1u << n;
    std::vector<double> logp(count);
    std::vector<RealVec> amp(count);
    double peak = -std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < count; ++mask) {
        std::vector<int> cols;
        for (int i = 0; i < n; ++i) {
            if (mask & (1u << i)) cols.push_back(i);
        }
        RealMat a(phi.rows(), static_cast<long>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) a.col(static_cast<long>(j)) = phi.col(cols[j]);
        RealVec full = RealVec::Zero(n);
        RealVec residual = y;
        if (!cols.empty()) {
            const RealVec x = a.colPivHouseholderQr().solve(y);
            residual -= a * x;
            for (std::size_t j = 0; j < cols.size(); ++j) full[cols[j]] = x[static_cast<long>(j)];
        }
        double lp = -residual.squaredNorm() / (2.0 * noise_var);
        for (int i = 0; i < n; ++i) lp += std::log((mask & (1u << i)) ? activation[i] : 1.0 - activation[i]);
        logp[mask] = lp;
        amp[mask] = full;
        peak = std::max(peak, lp);
    }
    RealVec mean = RealVec::Zero(n);
    double total = 0.0;
    for (unsigned mask = 0; mask < count; ++mask) {
        const double w = std::exp(logp[mask] - peak);
        mean += w * amp[mask];
        total += w;
    }
    return mean / total;
}

std::string check_exhaustive_oracle() {
    int failures = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(mix64(seed + 1000));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> amp(0.5, 1.5);
        const int rows = 12;
        const int n = 8;
        MeasurementSystem sys;
        sys.kind = SystemKind::PhaseAugmented;
        sys.phi = RealMat(rows, n);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < n; ++c) sys.phi(r, c) = normal(rng) / std::sqrt(static_cast<double>(rows));
        }
        RealVec truth = RealVec::Zero(n);
        const int sparsity = 1 + static_cast<int>(seed % 2);
        for (int k = 0; k < sparsity; ++k) truth[(static_cast<int>(seed) * 3 + k * 5) % n] = amp(rng);
        sys.noise_var = 1e-3;
        sys.y = sys.phi * truth;
        for (int r = 0; r < rows; ++r) sys.y[r] += std::sqrt(sys.noise_var) * normal(rng);
        sys.weights = RealVec(n);
        for (int i = 0; i < n; ++i) sys.weights[i] = 0.3 * std::abs(normal(rng));
        sys.theta = RealVec::Zero(n);

        const SupportPrior prior = SupportPrior::weighted(0.03, sys.weights);
        SearchParams params;
        params.max_depth = n;
        params.nonnegative = false;
        const RealVec approx = greedy_search(sys, prior, params).mean();
        const RealVec exact = exhaustive_mean(sys.phi, sys.y, prior.activation, sys.noise_var);
        if ((approx - exact).norm() > 1e-3 * exact.norm()) ++failures;
    }
    return failures == 0 ? "" : std::to_string(failures) + " of 50 instances off by more than 1e-3";
}

std::string check_transform() {
    Rng rng(11);
    const ComplexVec x = complex_gaussian(256, 1.0, rng);
    const ComplexVec back = idft(dft(x));
    if ((back - x).norm() > 1e-10 * x.norm()) return "idft(dft(x)) != x";
    if (std::abs(dft(x).squaredNorm() - x.squaredNorm()) > 1e-10 * x.squaredNorm()) return "energy not preserved";
    return "";
}

std::string check_clip_fraction() {
    for (double cr : {1.4, 1.61, 2.0}) {
        Rng rng(mix64(static_cast<std::uint64_t>(cr * 1000)));
        long clipped = 0;
        long total = 0;
        while (total < 200000) {
            const ComplexVec x = complex_gaussian(1024, 1.0, rng);
            clipped += static_cast<long>(clip(x, cr).support.size());
            total += 1024;
        }
        const double expected = std::exp(-cr * cr);
        const double got = static_cast<double>(clipped) / static_cast<double>(total);
        if (std::abs(got - expected) > 0.05 * expected) return "CR " + std::to_string(cr) + ": fraction " + std::to_string(got);
    }
    return "";
}

std::string check_noiseless_link() {
    OfdmConfig cfg;
    cfg.ebn0_db = std::numeric_limits<double>::infinity();
    ReceiverConfig rx;
    for (std::uint64_t f = 0; f < 5; ++f) {
        Rng rng(frame_seed(3, 0, f));
        const LinkFrame frame = draw_frame(cfg, rng);
        const Decoded d = decode(frame, Receiver::Wpa, cfg, rx);
        const auto errors = count_bit_errors(frame.bits, d.bits);
        if (errors != 0) return "frame " + std::to_string(f) + ": " + std::to_string(errors) + " bit errors";
    }
    return "";
}

std::string check_sweep_determinism() {
    SweepSpec spec;
    spec.experiment = Experiment::BerVsEbn0;
    spec.grid = {15.0, 18.0};
    spec.link.n = 64;
    spec.link.qam_order = 16;
    spec.link.measurements = 16;
    spec.algorithms = {"none", "wpa"};
    spec.stop.target_errors = 50;
    spec.stop.max_frames = 40;
    spec.seed = 5;
    spec.threads = 1;
    const std::string one = points_csv(run_sweep(spec), false);
    spec.threads = 3;
    const std::string three = points_csv(run_sweep(spec), false);
    return one == three ? "" : "thread count changed the results";
}

}  // namespace

int run_selftest(std::ostream& log) {
    const std::pair<const char*, std::function<std::string()>> checks[] = {
        {"exhaustive MMSE oracle", check_exhaustive_oracle},
        {"unitary transform", check_transform},
        {"clipped-sample fraction", check_clip_fraction},
        {"noiseless link recovery", check_noiseless_link},
        {"sweep determinism across threads", check_sweep_determinism},
    };
    int failed = 0;
    for (const auto& [name, check] : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string problem;
        try {
            problem = check();
        } catch (const std::exception& e) {
            problem = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log << (problem.empty() ? "PASS " : "FAIL ") << name << " (" << secs << " s)";
        if (!problem.empty()) log << ": " << problem;
        log << '\n';
        if (!problem.empty()) ++failed;
    }
    return failed;
}

}  // namespace ofdmclip
