#pragma once

#include <string>

#include "ofdmclip/receiver.hpp"

namespace ofdmclip {

/// Received copy of the shared clipped frame on one antenna.
struct Branch {
    ChannelRealization chan;
    ComplexVec noise;
    ComplexVec received;         // dft(y_l)
    ComplexVec received_noclip;  // unclipped twin through the same channel and noise
};

/// One transmission seen by L receive antennas. Every branch carries the same clipped signal.
struct SimoFrame {
    Bits bits;
    Transmission tx;
    ClipResult clip;
    std::vector<Branch> branches;

    int antennas() const { return static_cast<int>(branches.size()); }
};

/// Throws ConfigError unless antennas >= 1.
SimoFrame draw_simo_frame(const OfdmConfig& config, int antennas, Rng& rng);

/// Maximal ratio combining with per-carrier normalization:
/// X(k) = sum_l conj(D_l(k)) Y_l(k) / sum_l |D_l(k)|^2.
ComplexVec mrc_combine(const std::vector<ComplexVec>& branches, const std::vector<ComplexVec>& responses);

/// Branch whose channel has the largest minimum |D_l(k)|.
int best_conditioned(const SimoFrame& frame);

/// Phase-augmented system of one branch on its own reliable carriers.
/// `phase_source` replaces the branch's own equalized signal when given. A non-empty
/// `c_prev` is removed before carriers and decisions are picked; `excluded` carriers are skipped.
MeasurementSystem branch_system(const SimoFrame& frame, int branch, const OfdmConfig& config,
                                const ComplexVec* phase_source = nullptr, const ComplexVec& c_prev = {},
                                const IndexSet& excluded = {});

enum class SimoReceiver {
    None,        // MRC of the raw branches
    NoClip,      // MRC of the unclipped twins
    Individual,  // recovery per branch, then MRC
    Joint,       // one recovery on the stacked branches, then MRC
};

SimoReceiver parse_simo_receiver(const std::string& name);
std::string simo_receiver_name(SimoReceiver r);

struct SimoDecoded {
    Bits bits;
    std::vector<ComplexVec> c_hat;  // one per branch (identical for Joint)
};

/// Both recoveries run the single-antenna pass schedule of `rx` (passes, max_passes, outlier_tail).
SimoDecoded recover_individual(const SimoFrame& frame, const OfdmConfig& config, const ReceiverConfig& rx);
SimoDecoded recover_joint(const SimoFrame& frame, const OfdmConfig& config, const ReceiverConfig& rx);
SimoDecoded decode_simo(const SimoFrame& frame, SimoReceiver receiver, const OfdmConfig& config,
                        const ReceiverConfig& rx);

}  // namespace ofdmclip
