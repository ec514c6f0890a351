// ofdmclip: Monte Carlo sweeps of clipping recovery on an OFDM link.

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ofdmclip/config.hpp"
#include "ofdmclip/harness.hpp"
#include "ofdmclip/selftest.hpp"

using namespace ofdmclip;

namespace {

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    std::string out = "results";
    long target_errors = 0;
    long max_frames = 0;
    std::string algorithms;
    int threads = 0;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

SweepSpec build_spec(Experiment experiment, const Options& opt, const CLI::App& sub) {
    SweepSpec spec = opt.config.empty() ? default_spec(experiment) : spec_from_config(load_config(opt.config), experiment);
    if (spec.experiment != experiment) {
        throw ConfigError(opt.config + ": experiment '" + experiment_name(spec.experiment) + "' does not match subcommand '" +
                          sub.get_name() + "'");
    }
    if (sub.count("--seed")) spec.seed = opt.seed;
    if (sub.count("--target-errors")) spec.stop.target_errors = opt.target_errors;
    if (sub.count("--max-frames")) spec.stop.max_frames = opt.max_frames;
    if (sub.count("--algorithms")) spec.algorithms = split_list(opt.algorithms);
    if (sub.count("--threads")) spec.threads = opt.threads;
    spec.validate();
    return spec;
}

void print_summary(const SweepResult& result) {
    const bool mse = reports_mse(result.spec.experiment);
    std::printf("%-14s %-12s %14s %10s %10s\n", sweep_variable(result.spec.experiment).c_str(), "algorithm",
                mse ? "mse_db" : "ber", "errors", "frames");
    for (const auto& p : result.points) {
        for (const auto& r : p.algorithms) {
            std::printf("%-14g %-12s %14.4e %10ld %10ld%s\n", p.value, r.algorithm.c_str(), r.metric, r.errors, r.frames,
                        r.capped ? "  (frame cap)" : "");
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clipping-distortion recovery for OFDM: Monte Carlo sweeps"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    const std::pair<const char*, Experiment> sweeps[] = {
        {"ber-sweep", Experiment::BerVsEbn0},     {"rc-sweep", Experiment::BerVsP},
        {"cr-sweep", Experiment::BerVsCr},        {"bootstrap", Experiment::Bootstrap},
        {"simo", Experiment::SimoCr},             {"multiuser", Experiment::MultiuserEbn0},
        {"chanest", Experiment::ChanestMse},      {"chanest-error", Experiment::ChanestError},
    };
    const std::map<std::string, std::string> help{
        {"ber-sweep", "BER against Eb/N0"},
        {"rc-sweep", "BER against the number of reliable carriers"},
        {"cr-sweep", "BER against the clipping ratio"},
        {"bootstrap", "refinement from misspecified statistics against the clipping ratio"},
        {"simo", "two-antenna joint and per-branch recovery against the clipping ratio"},
        {"multiuser", "two-user OFDMA recovery against Eb/N0"},
        {"chanest", "channel estimation MSE against Eb/N0"},
        {"chanest-error", "BER against the channel knowledge error variance"},
    };

    Options opt;
    std::vector<std::pair<CLI::App*, Experiment>> commands;
    for (const auto& [name, experiment] : sweeps) {
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", opt.config, "experiment file (TOML)");
        sub->add_option("--seed", opt.seed, "master seed");
        sub->add_option("--out", opt.out, "output directory")->capture_default_str();
        sub->add_option("--target-errors", opt.target_errors, "bit errors per point and algorithm");
        sub->add_option("--max-frames", opt.max_frames, "frame cap per point");
        sub->add_option("--algorithms", opt.algorithms, "comma-separated algorithm list");
        sub->add_option("--threads", opt.threads, "worker threads");
        commands.emplace_back(sub, experiment);
    }
    CLI::App* selftest = app.add_subcommand("selftest", "exhaustive-oracle and invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (selftest->parsed()) {
            const int failed = run_selftest(std::cout);
            std::cout << (failed == 0 ? "selftest passed\n" : "selftest failed\n");
            return failed == 0 ? 0 : 1;
        }
        for (const auto& [sub, experiment] : commands) {
            if (!sub->parsed()) continue;
            const SweepSpec spec = build_spec(experiment, opt, *sub);
            const SweepResult result = run_sweep(spec);
            emit(result, opt.out);
            print_summary(result);
            std::cout << "wrote " << opt.out << "/{points.csv,manifest.json,plot.svg}\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
