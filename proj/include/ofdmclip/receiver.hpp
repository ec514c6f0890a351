#pragma once

#include <string>

#include "ofdmclip/engine.hpp"
#include "ofdmclip/ofdm_link.hpp"

namespace ofdmclip {

/// One single-antenna frame with its ground truth and an unclipped twin that
/// shares data, channel and noise.
struct LinkFrame {
    Bits bits;
    Transmission tx;
    ClipResult clip;
    ChannelRealization chan;
    ComplexVec noise;
    ComplexVec received;          // dft(y), clipped transmission
    ComplexVec received_noclip;   // dft(y), unclipped transmission
};

LinkFrame draw_frame(const OfdmConfig& config, Rng& rng);

/// Received spectrum for a transmitted time signal through the frame's channel and noise.
ComplexVec receive_spectrum(const ComplexVec& time, const ChannelRealization& chan, const ComplexVec& noise);

enum class Receiver {
    None,        // plain zero forcing, distortion left in place
    NoClip,      // unclipped twin, lower bound
    Oracle,      // least squares on the true support
    Wpa,         // weighted prior, phase augmented, known statistics
    Unweighted,
    NoPhase,
    Plain,
    Refined,     // bootstrap from 1 % of the true rate and noise, E_max iterations
    Estimated,   // same misspecified start, one pass
    Blind,       // Q-function rate and nominal noise, refined
};

Receiver parse_receiver(const std::string& name);
std::string receiver_name(Receiver r);

struct ReceiverConfig {
    SearchParams search;
    bool known_gamma = false;            // use the transmitter threshold instead of max |xhat|
    bool per_carrier_reliability = false;
    int max_iterations = 5;              // E_max
    double misspecification = 0.01;      // start factor for Refined / Estimated
    int passes = 2;                      // later passes pick carriers and decisions from the corrected symbols
    int max_passes = 4;                  // extra passes only while inconsistent carriers keep turning up
    double outlier_tail = 1e-6;          // noise tail probability beyond which a carrier counts as a decision error
};

struct Decoded {
    Bits bits;
    ComplexVec c_hat;
    int iterations = 0;
};

/// Symbols after removing an estimated time-domain distortion: D^{-1} Y - dft(c_hat).
ComplexVec corrected_symbols(const ComplexVec& received, const ComplexVec& response, const ComplexVec& c_hat);

/// Measurement system of a frame under the given kind, on its P most reliable carriers.
/// A non-empty `c_prev` is removed before reliability and decisions are computed;
/// weights and phases always come from the uncorrected equalized signal.
MeasurementSystem frame_system(const LinkFrame& frame, const OfdmConfig& config, const ReceiverConfig& rx,
                               SystemKind kind, const ComplexVec& c_prev = {}, const IndexSet& excluded = {});

/// Measurement carriers whose residual under `c_hat` exceeds the noise tail probability `tail`
/// (|r|^2 / (2 noise_var) > -ln tail), i.e. carriers whose hard decision is likely wrong.
IndexSet inconsistent_carriers(const MeasurementSystem& sys, const ComplexVec& response, const ComplexVec& c_hat,
                               double tail);

/// Sparsity rate of the frame's true distortion, floored at 1/N.
double true_rate(const ClipResult& clip);

Decoded decode(const LinkFrame& frame, Receiver receiver, const OfdmConfig& config, const ReceiverConfig& rx);

}  // namespace ofdmclip
