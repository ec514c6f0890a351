#include "ofdmclip/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <optional>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/rc_select.hpp"

namespace ofdmclip {

namespace {

const std::map<std::string, Receiver>& receiver_table() {
    static const std::map<std::string, Receiver> table{
        {"none", Receiver::None},         {"noclip", Receiver::NoClip},   {"oracle", Receiver::Oracle},
        {"wpa", Receiver::Wpa},           {"unweighted", Receiver::Unweighted},
        {"no_phase", Receiver::NoPhase},  {"plain", Receiver::Plain},     {"refined", Receiver::Refined},
        {"estimated", Receiver::Estimated}, {"blind", Receiver::Blind},
    };
    return table;
}

EngineMode mode_of(Receiver r) {
    switch (r) {
        case Receiver::Unweighted: return EngineMode::Unweighted;
        case Receiver::NoPhase: return EngineMode::NoPhase;
        case Receiver::Plain: return EngineMode::Plain;
        default: return EngineMode::Wpa;
    }
}

}  // namespace

Receiver parse_receiver(const std::string& name) {
    const auto& table = receiver_table();
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown algorithm '" + name + "'");
    return it->second;
}

std::string receiver_name(Receiver r) {
    for (const auto& [name, value] : receiver_table()) {
        if (value == r) return name;
    }
    return "?";
}

ComplexVec receive_spectrum(const ComplexVec& time, const ChannelRealization& chan, const ComplexVec& noise) {
    return chan.response.cwiseProduct(dft(time)) + dft(noise);
}

LinkFrame draw_frame(const OfdmConfig& config, Rng& rng) {
    const QamConstellation constellation(config.qam_order);
    LinkFrame f;
    f.bits = random_bits(static_cast<std::size_t>(config.n) * constellation.bits_per_symbol(), rng);
    f.tx = transmit(f.bits, constellation, config.n);
    f.clip = clip(f.tx.time, config.clip_ratio);
    f.chan = draw_channel(config, rng);
    f.noise = f.chan.noise_var > 0.0 ? complex_gaussian(config.n, f.chan.noise_var, rng)
                                     : ComplexVec(ComplexVec::Zero(config.n));
    f.received = receive_spectrum(f.clip.clipped, f.chan, f.noise);
    f.received_noclip = receive_spectrum(f.tx.time, f.chan, f.noise);
    return f;
}

ComplexVec corrected_symbols(const ComplexVec& received, const ComplexVec& response, const ComplexVec& c_hat) {
    return received.cwiseQuotient(response) - dft(c_hat);
}

IndexSet inconsistent_carriers(const MeasurementSystem& sys, const ComplexVec& response, const ComplexVec& c_hat,
                               double tail) {
    if (!(tail > 0.0 && tail < 1.0)) throw ConfigError("outlier tail probability must lie in (0, 1)");
    const ComplexVec spectrum = dft(c_hat);
    const long p = static_cast<long>(sys.rows.size());
    const double limit = -std::log(tail);
    IndexSet out;
    for (long r = 0; r < p; ++r) {
        const int k = sys.rows[r];
        const Complex residual = Complex(sys.y[r], sys.y[p + r]) - response[k] * spectrum[k];
        if (std::norm(residual) / (2.0 * sys.noise_var) > limit) out.push_back(k);
    }
    return out;
}

double true_rate(const ClipResult& clip) {
    const double n = static_cast<double>(clip.x.size());
    return std::max(static_cast<double>(clip.support.size()), 1.0) / n;
}

MeasurementSystem frame_system(const LinkFrame& frame, const OfdmConfig& config, const ReceiverConfig& rx,
                               SystemKind kind, const ComplexVec& c_prev, const IndexSet& excluded) {
    const QamConstellation constellation(config.qam_order);
    ComplexVec xhat_freq = frame.received.cwiseQuotient(frame.chan.response);
    const ComplexVec xhat_time = idft(xhat_freq);
    if (c_prev.size() > 0) xhat_freq -= dft(c_prev);
    const double var = noise_floor(frame.chan.noise_var);
    const ReliabilityReport report =
        rx.per_carrier_reliability
            ? reliability(xhat_freq, constellation, RealVec(frame.chan.response.cwiseAbs2().cwiseInverse() * var))
            : reliability(xhat_freq, constellation, var);
    const IndexSet rows = select_rc(report, config.measurements, excluded);
    SystemOptions options;
    options.kind = kind;
    if (rx.known_gamma) options.gamma = frame.clip.gamma;
    return build_system(frame.received, report.decisions.symbols, frame.chan.response, rows, xhat_time,
                        frame.chan.noise_var, options);
}

Decoded decode(const LinkFrame& frame, Receiver receiver, const OfdmConfig& config, const ReceiverConfig& rx) {
    const QamConstellation constellation(config.qam_order);
    Decoded out;
    out.c_hat = ComplexVec::Zero(config.n);
    if (receiver == Receiver::NoClip) {
        out.bits = constellation.demap(frame.received_noclip.cwiseQuotient(frame.chan.response)).bits;
        return out;
    }
    if (receiver != Receiver::None) {
        const SystemKind kind = system_kind(mode_of(receiver));
        const double rate = true_rate(frame.clip);
        if (rx.passes < 1 || rx.max_passes < rx.passes) throw ConfigError("need 1 <= passes <= max_passes");
        std::optional<RefineStart> carried;  // refined statistics handed to the next pass
        IndexSet excluded;
        for (int pass = 0; pass < rx.max_passes; ++pass) {
            const MeasurementSystem sys =
                frame_system(frame, config, rx, kind, pass > 0 ? out.c_hat : ComplexVec(), excluded);
            RecoveryOutput rec;
            switch (receiver) {
                case Receiver::Oracle:
                    rec = oracle_ls(sys, frame.clip.support);
                    break;
                case Receiver::Estimated: {
                    const RefineStart start{rx.misspecification * rate, rx.misspecification * sys.noise_var};
                    rec = refine(sys, start, rx.search, 1);
                    break;
                }
                case Receiver::Refined: {
                    const RefineStart start =
                        carried.value_or(RefineStart{rx.misspecification * rate, rx.misspecification * sys.noise_var});
                    rec = refine(sys, start, rx.search, rx.max_iterations);
                    carried = RefineStart{rec.rate, rec.noise_var};
                    break;
                }
                case Receiver::Blind: {
                    const ComplexVec xhat_time = idft(frame.received.cwiseQuotient(frame.chan.response));
                    const RefineStart start =
                        carried.value_or(RefineStart{initial_rate(xhat_time, sys.gamma_hat), sys.noise_var});
                    rec = refine(sys, start, rx.search, rx.max_iterations);
                    carried = RefineStart{rec.rate, rec.noise_var};
                    break;
                }
                default:
                    rec = ablation(sys, rate, rx.search, mode_of(receiver));
                    break;
            }
            out.c_hat = rec.c_hat;
            out.iterations += rec.iterations;
            const IndexSet flagged = inconsistent_carriers(sys, frame.chan.response, out.c_hat, rx.outlier_tail);
            if (flagged.empty() && pass + 1 >= rx.passes) break;
            IndexSet merged;
            std::set_union(excluded.begin(), excluded.end(), flagged.begin(), flagged.end(), std::back_inserter(merged));
            excluded = std::move(merged);
        }
    }
    out.bits = constellation.demap(corrected_symbols(frame.received, frame.chan.response, out.c_hat)).bits;
    return out;
}

}  // namespace ofdmclip
