#pragma once

#include <optional>

#include "ofdmclip/qam.hpp"
#include "ofdmclip/types.hpp"

namespace ofdmclip {

/// Per-subcarrier decision reliability.
///
/// The reliability of carrier i is the likelihood ratio between the observed
/// perturbation toward its hard decision and the sum over every other
/// constellation point, under a circular Gaussian perturbation model. Scores
/// are kept in the log domain.
struct ReliabilityReport {
    RealVec log_score;     // log of the likelihood ratio, finite
    IndexSet order;        // carriers by descending score, ties by lower index
    Demapped decisions;    // hard decisions the scores refer to
};

/// Reliability with a flat perturbation variance on every carrier.
/// Throws ConfigError unless noise_var > 0.
ReliabilityReport reliability(const ComplexVec& xhat, const QamConstellation& constellation, double noise_var);

/// Reliability with a per-carrier perturbation variance.
ReliabilityReport reliability(const ComplexVec& xhat, const QamConstellation& constellation,
                              const RealVec& noise_var);

/// The `count` most reliable carriers not in `reserved`, ascending by index.
/// Throws ConfigError when fewer than `count` carriers are eligible.
IndexSet select_rc(const ReliabilityReport& report, int count, const IndexSet& reserved = {});

enum class SystemKind {
    PhaseAugmented,  // real magnitudes along known phases: one real column per index
    Complex,         // complex amplitudes: two real columns per index
};

/// Real-valued sparse measurement model  y = phi * c + noise.
///
/// Rows hold the real parts of the complex measurements followed by their
/// imaginary parts. For SystemKind::Complex, index i owns columns 2i (real
/// part of c(i)) and 2i + 1 (imaginary part).
struct MeasurementSystem {
    RealVec y;
    RealMat phi;
    SystemKind kind = SystemKind::PhaseAugmented;
    RealVec weights;        // gamma_hat - |xhat(i)|
    RealVec theta;          // arg(xhat(i)) - pi
    double noise_var = 0.0; // per real row
    double gamma_hat = 0.0;
    IndexSet rows;          // measurement carriers

    int block() const { return kind == SystemKind::PhaseAugmented ? 1 : 2; }
    int unknowns() const { return static_cast<int>(phi.cols()) / block(); }
    int measurements() const { return static_cast<int>(phi.rows()); }
};

struct SystemOptions {
    SystemKind kind = SystemKind::PhaseAugmented;
    /// Transmitter-signaled threshold; max |xhat| is used when absent.
    std::optional<double> gamma;
};

/// Psi = S_P D F restricted to the given rows (complex, |rows| x n).
ComplexMat sensing_matrix(const ComplexVec& response, const IndexSet& rows, int n);

/// Smallest noise variance handed to the engine; keeps noiseless runs finite.
double noise_floor(double noise_var);

/// Builds the measurement system on the chosen carriers.
///
/// `received` is dft(y), `decisions` the hard decisions on every carrier,
/// `phase_source` the equalized time signal, `noise_var` the complex noise
/// variance of the received samples.
MeasurementSystem build_system(const ComplexVec& received, const ComplexVec& decisions,
                               const ComplexVec& response, const IndexSet& chosen,
                               const ComplexVec& phase_source, double noise_var,
                               const SystemOptions& options = {});

/// Complex-amplitude system for an explicit complex operator and measurement vector.
/// Weights and phases are zero; the prior has to be uniform.
MeasurementSystem complex_system(const ComplexMat& psi, const ComplexVec& v, double noise_var);

/// Applies the complex model to a real magnitude vector, split into real rows.
RealVec predict_complex_path(const ComplexVec& response, const IndexSet& rows, const RealVec& theta,
                             const RealVec& magnitudes);

/// Concatenates the rows of systems that share one unknown vector.
/// Weights, phases and gamma come from the first system.
MeasurementSystem stack_systems(const std::vector<MeasurementSystem>& systems);

}  // namespace ofdmclip
