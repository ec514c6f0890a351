#pragma once

#include <string>

#include "ofdmclip/ofdm_link.hpp"
#include "ofdmclip/receiver.hpp"

namespace ofdmclip {

/// Pilot carriers and the rows used by the estimator.
struct PilotPlan {
    IndexSet pilots;          // equispaced, ascending
    ComplexVec pilot_symbols; // known symbols, one per pilot
    IndexSet rows;            // pilots plus reliable carriers, ascending
    ComplexVec reference;     // reference symbol per row

    int n = 0;
};

/// Q equispaced pilots with pseudo-random symbols drawn from `seed`.
/// Throws ConfigError unless 0 < count <= n.
PilotPlan make_pilot_plan(int n, int count, const QamConstellation& qam, std::uint64_t seed);

struct ChannelEstimate {
    ComplexVec h_hat;  // length N_c
};

/// 10 log10(||h - h_hat||^2 / ||h||^2).
double mse_db(const ComplexVec& h, const ComplexVec& h_hat);

/// Rows X(r, l) = s_r e^{-j 2 pi k_r l / N}, i.e. sqrt(N) diag(s) F restricted to rows and taps.
ComplexMat pilot_matrix(const ComplexVec& symbols, const IndexSet& rows, int n, int taps);

/// Regularized least squares h = X^H (X X^H + (noise_var / tap_var) I)^{-1} y.
ChannelEstimate mmse_estimate(const ComplexVec& y, const ComplexMat& x, double noise_var, double tap_var);

struct ChanestConfig {
    OfdmConfig link;         // n, qam_order, taps, clip_ratio, ebn0_db
    int pilots = 16;         // Q
    int reliable = 16;       // R
    int cpa_passes = 1;

    void validate() const;
    double tap_variance() const { return 1.0 / link.taps; }
};

/// Frame with pilots on the plan's carriers and random data elsewhere.
struct ChanestFrame {
    Bits bits;               // data carriers only
    ComplexVec symbols;
    ClipResult clip;
    ChannelRealization chan;
    ComplexVec received;     // dft(y)
};

ChanestFrame draw_chanest_frame(const ChanestConfig& config, const PilotPlan& plan, Rng& rng);

/// Pilot-only estimate.
ChannelEstimate pilot_estimate(const ComplexVec& received, const PilotPlan& plan, const ChanestConfig& config);

/// Adds the `reliable` most reliable data carriers under `estimate`, with their decisions as reference.
/// Throws ConfigError if more carriers are requested than data carriers exist.
PilotPlan rc_augment(const ComplexVec& received, const PilotPlan& plan, const ChannelEstimate& estimate,
                     const ChanestConfig& config, int reliable);

/// Estimate on the plan's rows and reference symbols.
ChannelEstimate plan_estimate(const ComplexVec& received, const PilotPlan& plan, const ChanestConfig& config);

/// Reference symbols replaced by the spectrum of the re-clipped decided frame, then re-estimated.
ChannelEstimate cpa_refine(const ComplexVec& received, const PilotPlan& plan, const ChannelEstimate& estimate,
                           const ChanestConfig& config);

enum class Estimator {
    Mmse,   // pilots only
    Rc,     // pilots plus reliable carriers
    Cpa,    // pilots with clipped reference
    RcCpa,  // both
};

Estimator parse_estimator(const std::string& name);
std::string estimator_name(Estimator e);

ChannelEstimate estimate_channel(const ChanestFrame& frame, const PilotPlan& plan, Estimator estimator,
                                 const ChanestConfig& config);

/// Channel with every tap perturbed by CN(0, error_var / N_c); `unit` holds standard
/// complex normal draws so that different variances share one realization.
ChannelRealization perturb_channel(const ChannelRealization& chan, const ComplexVec& unit, double error_var, int n);

/// Frame whose receiver-side channel knowledge is replaced; the received signal is untouched.
LinkFrame with_channel(const LinkFrame& frame, const ChannelRealization& known);

}  // namespace ofdmclip
