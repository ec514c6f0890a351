#pragma once

#include <string>

#include "ofdmclip/engine.hpp"
#include "ofdmclip/ofdm_link.hpp"

namespace ofdmclip {

/// Interleaved allocation: user u owns carriers k with k mod users == u.
/// Each user leaves `reserved` equispaced carriers of its comb free of data.
struct OfdmaLayout {
    int n = 512;
    int users = 2;
    int reserved = 75;  // P_u

    /// Throws ConfigError unless n is a multiple of users and 0 < reserved < n / users.
    void validate() const;

    int comb_size() const { return n / users; }
    IndexSet carriers(int user) const;
    IndexSet reserved_tones(int user) const;
    IndexSet data_carriers(int user) const;
};

struct UserSignal {
    Bits bits;                // data bits only
    ComplexVec symbols;       // length n, zero off the comb and on reserved tones
    ClipResult clip;          // clipped at the user's own rms
    ChannelRealization chan;
};

struct OfdmaFrame {
    OfdmaLayout layout;
    std::vector<UserSignal> users;
    ComplexVec noise;
    ComplexVec received;         // sum_u D^u dft(x_p^u) + dft(z)
    ComplexVec received_noclip;  // same with the unclipped user signals

    std::size_t data_bits() const;
};

OfdmaLayout layout_for(const OfdmConfig& config);

/// Users are drawn in order with the shared generator. `active` switches users
/// off (their symbols are zero and they are not clipped); empty means all active.
OfdmaFrame build_ofdma(const OfdmConfig& config, Rng& rng, const std::vector<bool>& active = {});

/// Stacked operator S_P [D^1 F, ..., D^U F] over the given rows.
ComplexMat stacked_operator(const OfdmaFrame& frame, const IndexSet& rows);

/// Joint estimate of every user's distortion from all reserved tones, complex
/// amplitudes with a uniform prior. Returns one time-domain estimate per user.
std::vector<ComplexVec> joint_estimate(const OfdmaFrame& frame, double rate, const SearchParams& search,
                                       double noise_var);

struct DecoupleOptions {
    bool phase_augmented = false;  // weighted, phase-augmented stage-2 recovery
};

struct OfdmaDecoded {
    std::vector<Bits> bits;            // per user, data carriers only
    std::vector<ComplexVec> c_hat;     // final per-user distortion estimates
    std::vector<ComplexVec> c_cpa;     // re-clipped reconstructions (two-stage only)
};

/// User-u view with the re-clipped estimate of user u's distortion removed: Y - D^u dft(c_cpa).
ComplexVec remove_user(const OfdmaFrame& frame, int user, const ComplexVec& c_cpa);

/// Two-stage receiver: joint estimate, decisions and re-clipping per user, then
/// single-user recovery of every other user from its own reserved tones.
OfdmaDecoded decouple(const OfdmaFrame& frame, const std::vector<ComplexVec>& joint, const OfdmConfig& config,
                      const SearchParams& search, const DecoupleOptions& options = {});

enum class OfdmaReceiver {
    None,
    NoClip,
    JointOnly,
    TwoStage,
};

OfdmaReceiver parse_ofdma_receiver(const std::string& name);
std::string ofdma_receiver_name(OfdmaReceiver r);

OfdmaDecoded decode_ofdma(const OfdmaFrame& frame, OfdmaReceiver receiver, const OfdmConfig& config,
                          const SearchParams& search, const DecoupleOptions& options = {});

/// Transmitted data bits of every user, concatenated in user order.
Bits ofdma_bits(const OfdmaFrame& frame);
Bits ofdma_bits(const OfdmaDecoded& decoded);

}  // namespace ofdmclip
