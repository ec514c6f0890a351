#include "ofdmclip/simo.hpp"

#include <algorithm>
#include <iterator>
#include <map>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/rc_select.hpp"

namespace ofdmclip {

namespace {

const std::map<std::string, SimoReceiver>& simo_table() {
    static const std::map<std::string, SimoReceiver> table{
        {"none", SimoReceiver::None},
        {"noclip", SimoReceiver::NoClip},
        {"individual", SimoReceiver::Individual},
        {"joint", SimoReceiver::Joint},
    };
    return table;
}

std::vector<ComplexVec> responses(const SimoFrame& frame) {
    std::vector<ComplexVec> out;
    for (const Branch& b : frame.branches) out.push_back(b.chan.response);
    return out;
}

Bits combine_and_demap(const SimoFrame& frame, const std::vector<ComplexVec>& corrected, int qam_order) {
    return QamConstellation(qam_order).demap(mrc_combine(corrected, responses(frame))).bits;
}

std::vector<ComplexVec> subtract(const SimoFrame& frame, const std::vector<ComplexVec>& c_hat) {
    std::vector<ComplexVec> out;
    for (int l = 0; l < frame.antennas(); ++l) {
        const Branch& b = frame.branches[l];
        out.push_back(b.received - b.chan.response.cwiseProduct(dft(c_hat[l])));
    }
    return out;
}

IndexSet merge(const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

void check_passes(const ReceiverConfig& rx) {
    if (rx.passes < 1 || rx.max_passes < rx.passes) throw ConfigError("need 1 <= passes <= max_passes");
}

}  // namespace

SimoFrame draw_simo_frame(const OfdmConfig& config, int antennas, Rng& rng) {
    if (antennas < 1) throw ConfigError("antennas must be at least 1");
    const QamConstellation constellation(config.qam_order);
    SimoFrame f;
    f.bits = random_bits(static_cast<std::size_t>(config.n) * constellation.bits_per_symbol(), rng);
    f.tx = transmit(f.bits, constellation, config.n);
    f.clip = clip(f.tx.time, config.clip_ratio);
    for (int l = 0; l < antennas; ++l) {
        Branch b;
        b.chan = draw_channel(config, rng);
        b.noise = b.chan.noise_var > 0.0 ? complex_gaussian(config.n, b.chan.noise_var, rng)
                                         : ComplexVec(ComplexVec::Zero(config.n));
        b.received = receive_spectrum(f.clip.clipped, b.chan, b.noise);
        b.received_noclip = receive_spectrum(f.tx.time, b.chan, b.noise);
        f.branches.push_back(std::move(b));
    }
    return f;
}

ComplexVec mrc_combine(const std::vector<ComplexVec>& branches, const std::vector<ComplexVec>& responses) {
    if (branches.empty() || branches.size() != responses.size()) {
        throw InputError("mrc_combine: need one response per branch");
    }
    const long n = branches.front().size();
    ComplexVec num = ComplexVec::Zero(n);
    RealVec den = RealVec::Zero(n);
    for (std::size_t l = 0; l < branches.size(); ++l) {
        if (branches[l].size() != n || responses[l].size() != n) throw InputError("mrc_combine: length mismatch");
        num += responses[l].conjugate().cwiseProduct(branches[l]);
        den += responses[l].cwiseAbs2();
    }
    if (den.minCoeff() == 0.0) throw NumericError("mrc_combine: spectral null on every branch");
    return num.cwiseQuotient(den.cast<Complex>());
}

int best_conditioned(const SimoFrame& frame) {
    int best = 0;
    double best_min = -1.0;
    for (int l = 0; l < frame.antennas(); ++l) {
        const double m = frame.branches[l].chan.response.cwiseAbs().minCoeff();
        if (m > best_min) {
            best_min = m;
            best = l;
        }
    }
    return best;
}

MeasurementSystem branch_system(const SimoFrame& frame, int branch, const OfdmConfig& config,
                                const ComplexVec* phase_source, const ComplexVec& c_prev, const IndexSet& excluded) {
    const Branch& b = frame.branches.at(branch);
    const QamConstellation constellation(config.qam_order);
    ComplexVec xhat_freq = b.received.cwiseQuotient(b.chan.response);
    const ComplexVec own = idft(xhat_freq);
    if (c_prev.size() > 0) xhat_freq -= dft(c_prev);
    const ReliabilityReport report = reliability(xhat_freq, constellation, noise_floor(b.chan.noise_var));
    const IndexSet rows = select_rc(report, config.measurements, excluded);
    return build_system(b.received, report.decisions.symbols, b.chan.response, rows,
                        phase_source ? *phase_source : own, b.chan.noise_var);
}

SimoReceiver parse_simo_receiver(const std::string& name) {
    const auto it = simo_table().find(name);
    if (it == simo_table().end()) throw ConfigError("unknown SIMO algorithm '" + name + "'");
    return it->second;
}

std::string simo_receiver_name(SimoReceiver r) {
    for (const auto& [name, value] : simo_table()) {
        if (value == r) return name;
    }
    return "?";
}

SimoDecoded recover_individual(const SimoFrame& frame, const OfdmConfig& config, const ReceiverConfig& rx) {
    check_passes(rx);
    const double rate = true_rate(frame.clip);
    SimoDecoded out;
    for (int l = 0; l < frame.antennas(); ++l) {
        const ComplexVec& response = frame.branches[l].chan.response;
        ComplexVec c_hat;
        IndexSet excluded;
        for (int pass = 0; pass < rx.max_passes; ++pass) {
            const MeasurementSystem sys = branch_system(frame, l, config, nullptr, c_hat, excluded);
            c_hat = ablation(sys, rate, rx.search, EngineMode::Wpa).c_hat;
            const IndexSet flagged = inconsistent_carriers(sys, response, c_hat, rx.outlier_tail);
            if (flagged.empty() && pass + 1 >= rx.passes) break;
            excluded = merge(excluded, flagged);
        }
        out.c_hat.push_back(c_hat);
    }
    out.bits = combine_and_demap(frame, subtract(frame, out.c_hat), config.qam_order);
    return out;
}

SimoDecoded recover_joint(const SimoFrame& frame, const OfdmConfig& config, const ReceiverConfig& rx) {
    check_passes(rx);
    const Branch& ref = frame.branches.at(best_conditioned(frame));
    const ComplexVec phase_source = idft(ref.received.cwiseQuotient(ref.chan.response));
    const int antennas = frame.antennas();
    ComplexVec c_hat;
    std::vector<IndexSet> excluded(antennas);
    for (int pass = 0; pass < rx.max_passes; ++pass) {
        std::vector<MeasurementSystem> systems;
        for (int l = 0; l < antennas; ++l) {
            systems.push_back(branch_system(frame, l, config, &phase_source, c_hat, excluded[l]));
        }
        c_hat = ablation(stack_systems(systems), true_rate(frame.clip), rx.search, EngineMode::Wpa).c_hat;
        bool clean = true;
        for (int l = 0; l < antennas; ++l) {
            const IndexSet flagged =
                inconsistent_carriers(systems[l], frame.branches[l].chan.response, c_hat, rx.outlier_tail);
            clean = clean && flagged.empty();
            excluded[l] = merge(excluded[l], flagged);
        }
        if (clean && pass + 1 >= rx.passes) break;
    }

    SimoDecoded out;
    out.c_hat.assign(antennas, c_hat);
    out.bits = combine_and_demap(frame, subtract(frame, out.c_hat), config.qam_order);
    return out;
}

SimoDecoded decode_simo(const SimoFrame& frame, SimoReceiver receiver, const OfdmConfig& config,
                        const ReceiverConfig& rx) {
    switch (receiver) {
        case SimoReceiver::Individual: return recover_individual(frame, config, rx);
        case SimoReceiver::Joint: return recover_joint(frame, config, rx);
        default: break;
    }
    SimoDecoded out;
    std::vector<ComplexVec> spectra;
    for (const Branch& b : frame.branches) {
        spectra.push_back(receiver == SimoReceiver::NoClip ? b.received_noclip : b.received);
        out.c_hat.push_back(ComplexVec::Zero(config.n));
    }
    out.bits = combine_and_demap(frame, spectra, config.qam_order);
    return out;
}

}  // namespace ofdmclip
