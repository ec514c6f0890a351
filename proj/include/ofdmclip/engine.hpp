#pragma once

#include <cmath>
#include <optional>

#include "ofdmclip/rc_select.hpp"
#include "ofdmclip/types.hpp"

namespace ofdmclip {

/// Independent Bernoulli activation probabilities per unknown index.
struct SupportPrior {
    double rate = 0.0;     // global sparsity rate
    RealVec activation;    // per-index probabilities, clamped to [eps, 1 - eps]

    static constexpr double kClamp = 1e-6;

    static SupportPrior uniform(double rate, int unknowns);
    /// activation(i) = rate * e^{-w(i)} / max_k e^{-w(k)}.
    static SupportPrior weighted(double rate, const RealVec& weights);
};

struct SearchParams {
    int beam = 5;                          // supports kept per depth
    int max_depth = 0;                     // 0: max(4, ceil(2 rate N)), capped by the row count
    double window = std::log(1e6);         // log-posterior span of the collected supports
    double support_threshold = 0.05;       // relative magnitude for support_hat
    bool early_stop = true;                // stop once a whole depth falls outside the window
    bool collect_all = true;               // also collect scored extensions that were not retained
    bool nonnegative = true;               // phase-augmented only: extend by indices with positive amplitude

    int depth_limit(double rate, int unknowns, int measurements, int block) const;
};

/// Dominant supports found by the greedy search with their posterior weights.
struct SparsePosterior {
    int unknowns = 0;
    int block = 1;
    std::vector<IndexSet> supports;   // ascending indices
    std::vector<double> log_metric;   // log-likelihood + log-prior
    std::vector<RealVec> blue;        // least-squares amplitudes, block entries per support index
    std::vector<double> weights;      // normalized posterior probabilities
    int depth_reached = 0;

    /// Posterior-weighted average of the embedded BLUE vectors (length unknowns * block).
    RealVec mean() const;
    std::size_t best() const;
};

struct RecoveryOutput {
    ComplexVec c_hat;        // complex clipping estimate
    RealVec c_mag;           // non-negative magnitudes
    IndexSet support_hat;    // indices with c_mag above threshold * max
    double rate = 0.0;       // sparsity rate used (refined by refine())
    double noise_var = 0.0;  // per-row noise variance used (refined by refine())
    int iterations = 1;
    SparsePosterior posterior;
};

/// Projection log-likelihood -||P_S^perp y||^2 / (2 noise_var).
/// Empty optional when the columns on S are linearly dependent.
std::optional<double> log_likelihood(const MeasurementSystem& sys, const IndexSet& support);

double log_prior(const SupportPrior& prior, const IndexSet& support);

/// Least-squares amplitudes on the support (block entries per index, in support order).
/// Throws NumericError on rank deficiency.
RealVec blue(const MeasurementSystem& sys, const IndexSet& support);

/// Breadth-limited forward search over supports.
SparsePosterior greedy_search(const MeasurementSystem& sys, const SupportPrior& prior, const SearchParams& params);

/// Approximate MMSE estimate over the dominant supports.
RecoveryOutput recover(const MeasurementSystem& sys, const SupportPrior& prior, const SearchParams& params);

struct RefineStart {
    double rate = 0.0;
    double noise_var = 0.0;  // per real row
};

/// Alternates recovery with re-estimation of the sparsity rate and the noise variance.
/// Stops when the rate moves by less than 2 % or after max_iterations runs.
RecoveryOutput refine(const MeasurementSystem& sys, const RefineStart& start, const SearchParams& params,
                      int max_iterations = 5, bool weighted_prior = true);

/// Initial sparsity rate Q((gamma_hat - mu) / sigma) from the equalized time-signal magnitudes.
double initial_rate(const ComplexVec& phase_source, double gamma_hat);

/// Least squares on a known support.
RecoveryOutput oracle_ls(const MeasurementSystem& sys, const IndexSet& true_support);

enum class EngineMode {
    Wpa,         // weighted prior, phase augmented
    Unweighted,  // uniform prior, phase augmented
    NoPhase,     // weighted prior, complex amplitudes
    Plain,       // uniform prior, complex amplitudes
};

SystemKind system_kind(EngineMode mode);
bool uses_weights(EngineMode mode);

/// Recovery with the prior and system kind implied by the mode.
/// Throws ConfigError if the system kind does not match the mode.
RecoveryOutput ablation(const MeasurementSystem& sys, double rate, const SearchParams& params, EngineMode mode);

/// Converts an engine coefficient vector (unknowns * block) into complex samples.
ComplexVec to_complex(const MeasurementSystem& sys, const RealVec& coefficients);

}  // namespace ofdmclip
