#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ofdmclip/chanest.hpp"
#include "ofdmclip/receiver.hpp"

namespace ofdmclip {

enum class Experiment {
    BerVsEbn0,
    BerVsP,
    BerVsCr,
    Bootstrap,
    SimoCr,
    MultiuserEbn0,
    ChanestMse,
    ChanestError,
};

Experiment parse_experiment(const std::string& name);
std::string experiment_name(Experiment e);

/// Name of the swept parameter ("ebn0_db", "measurements", "clip_ratio", "error_var").
std::string sweep_variable(Experiment e);

/// True for experiments reporting a channel MSE in dB instead of a bit error rate.
bool reports_mse(Experiment e);

std::vector<std::string> default_algorithms(Experiment e);

struct StopRule {
    long target_errors = 200;
    long max_frames = 200000;
    long mse_frames = 500;   // fixed frame count for MSE experiments
};

struct SweepSpec {
    Experiment experiment = Experiment::BerVsEbn0;
    std::vector<double> grid;
    OfdmConfig link;
    ReceiverConfig rx;
    int antennas = 2;             // SIMO
    bool stage2_wpa = false;      // multi-user stage-2 recovery mode
    int pilots = 16;              // channel estimation Q
    int reliable = 16;            // channel estimation R
    int cpa_passes = 1;
    std::vector<std::string> algorithms;
    StopRule stop;
    std::uint64_t seed = 1;
    int threads = 1;
    int batch = 8;                // frames between stop-rule checks; fixed for reproducibility

    /// Throws ConfigError on an empty or non-monotone grid, unknown algorithms,
    /// a target below 50 errors, or a link configuration that is infeasible at any grid point.
    void validate() const;

    /// Link configuration with the sweep variable set to `value`.
    OfdmConfig link_at(double value) const;
};

/// Default grid, algorithms and link settings of an experiment.
SweepSpec default_spec(Experiment e);

struct AlgorithmResult {
    std::string algorithm;
    double metric = 0.0;          // BER, or MSE in dB
    long errors = 0;
    long bits = 0;
    long frames = 0;
    double seconds = 0.0;
    bool capped = false;          // stopped by max_frames before reaching the error target
    std::vector<double> samples;  // per-frame linear MSE (MSE experiments only), not emitted
};

struct PointResult {
    double value = 0.0;
    std::vector<AlgorithmResult> algorithms;

    const AlgorithmResult& at(const std::string& algorithm) const;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<PointResult> points;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of frame `frame` at grid point `point`.
std::uint64_t frame_seed(std::uint64_t master, std::uint64_t point, std::uint64_t frame);

/// Runs every grid point until each algorithm reaches the error target or the frame cap.
/// All algorithms of a point see the same frames, in the same order.
SweepResult run_sweep(const SweepSpec& spec);

/// CSV rows with 17 significant digits; `with_timing` = false drops the seconds column.
std::string points_csv(const SweepResult& result, bool with_timing = true);
std::string manifest_json(const SweepResult& result);
std::string plot_svg(const SweepResult& result);

/// Writes points.csv, manifest.json and plot.svg. Throws std::runtime_error naming the path on failure.
void emit(const SweepResult& result, const std::filesystem::path& out_dir);

extern const char* const kVersion;

}  // namespace ofdmclip
