#include "ofdmclip/ofdma.hpp"

#include <algorithm>
#include <map>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/rc_select.hpp"

namespace ofdmclip {

namespace {

const std::map<std::string, OfdmaReceiver>& ofdma_table() {
    static const std::map<std::string, OfdmaReceiver> table{
        {"none", OfdmaReceiver::None},
        {"noclip", OfdmaReceiver::NoClip},
        {"joint_only", OfdmaReceiver::JointOnly},
        {"two_stage", OfdmaReceiver::TwoStage},
    };
    return table;
}

ComplexVec gather(const ComplexVec& v, const IndexSet& rows) {
    ComplexVec out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out[r] = v[rows[r]];
    return out;
}

double rate_of(const ClipResult& clip, long unknowns) {
    return std::max(static_cast<double>(clip.support.size()), 1.0) / static_cast<double>(unknowns);
}

bool active(const UserSignal& u) { return !u.bits.empty(); }

// Decisions on the user's data carriers of an equalized spectrum.
Demapped decide(const OfdmaFrame& frame, int user, const ComplexVec& spectrum, const QamConstellation& qam) {
    const IndexSet data = frame.layout.data_carriers(user);
    const ComplexVec& d = frame.users[user].chan.response;
    ComplexVec eq(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) eq[i] = spectrum[data[i]] / d[data[i]];
    return qam.demap(eq);
}

std::vector<Bits> demap_all(const OfdmaFrame& frame, const std::vector<ComplexVec>& spectra,
                            const QamConstellation& qam) {
    std::vector<Bits> out;
    for (std::size_t u = 0; u < frame.users.size(); ++u) {
        out.push_back(active(frame.users[u]) ? decide(frame, static_cast<int>(u), spectra[u], qam).bits : Bits{});
    }
    return out;
}

ComplexVec distortion_spectrum(const OfdmaFrame& frame, int user, const ComplexVec& c) {
    return frame.users[user].chan.response.cwiseProduct(dft(c));
}

}  // namespace

void OfdmaLayout::validate() const {
    if (users < 1 || n % users != 0) throw ConfigError("n must be a multiple of the user count");
    if (reserved <= 0 || reserved >= comb_size()) {
        throw ConfigError("reserved tones per user must satisfy 0 < P_u < n / users");
    }
}

IndexSet OfdmaLayout::carriers(int user) const {
    IndexSet out;
    for (int j = 0; j < comb_size(); ++j) out.push_back(user + users * j);
    return out;
}

IndexSet OfdmaLayout::reserved_tones(int user) const {
    IndexSet out;
    const long k = comb_size();
    for (long i = 0; i < reserved; ++i) out.push_back(user + users * static_cast<int>(i * k / reserved));
    return out;
}

IndexSet OfdmaLayout::data_carriers(int user) const {
    const IndexSet all = carriers(user);
    const IndexSet skip = reserved_tones(user);
    IndexSet out;
    std::set_difference(all.begin(), all.end(), skip.begin(), skip.end(), std::back_inserter(out));
    return out;
}

std::size_t OfdmaFrame::data_bits() const {
    std::size_t total = 0;
    for (const UserSignal& u : users) total += u.bits.size();
    return total;
}

OfdmaLayout layout_for(const OfdmConfig& config) {
    OfdmaLayout layout;
    layout.n = config.n;
    layout.users = 2;
    layout.reserved = config.measurements;
    layout.validate();
    return layout;
}

OfdmaFrame build_ofdma(const OfdmConfig& config, Rng& rng, const std::vector<bool>& active_users) {
    OfdmaFrame f;
    f.layout = layout_for(config);
    const QamConstellation qam(config.qam_order);
    const int n = config.n;
    f.received = ComplexVec::Zero(n);
    f.received_noclip = ComplexVec::Zero(n);
    for (int u = 0; u < f.layout.users; ++u) {
        UserSignal user;
        user.symbols = ComplexVec::Zero(n);
        const bool on = active_users.empty() || active_users.at(u);
        if (on) {
            const IndexSet data = f.layout.data_carriers(u);
            user.bits = random_bits(data.size() * qam.bits_per_symbol(), rng);
            const ComplexVec s = qam.map(user.bits);
            for (std::size_t i = 0; i < data.size(); ++i) user.symbols[data[i]] = s[i];
        }
        const ComplexVec x = idft(user.symbols);
        user.clip = on ? clip(x, config.clip_ratio) : clip_at(x, 0.0);
        user.chan = draw_channel(config, rng);
        f.users.push_back(std::move(user));
    }
    const double noise_var = f.users.front().chan.noise_var;
    f.noise = noise_var > 0.0 ? complex_gaussian(n, noise_var, rng) : ComplexVec(ComplexVec::Zero(n));
    const ComplexVec noise_freq = dft(f.noise);
    f.received = noise_freq;
    f.received_noclip = noise_freq;
    for (const UserSignal& u : f.users) {
        f.received += u.chan.response.cwiseProduct(dft(u.clip.clipped));
        f.received_noclip += u.chan.response.cwiseProduct(dft(u.clip.x));
    }
    return f;
}

ComplexMat stacked_operator(const OfdmaFrame& frame, const IndexSet& rows) {
    const int n = frame.layout.n;
    ComplexMat psi(rows.size(), static_cast<long>(n) * frame.layout.users);
    for (int u = 0; u < frame.layout.users; ++u) {
        psi.middleCols(static_cast<long>(u) * n, n) = sensing_matrix(frame.users[u].chan.response, rows, n);
    }
    return psi;
}

std::vector<ComplexVec> joint_estimate(const OfdmaFrame& frame, double rate, const SearchParams& search,
                                       double noise_var) {
    IndexSet rows;
    for (int u = 0; u < frame.layout.users; ++u) {
        const IndexSet r = frame.layout.reserved_tones(u);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    std::sort(rows.begin(), rows.end());
    const MeasurementSystem sys = complex_system(stacked_operator(frame, rows), gather(frame.received, rows), noise_var);
    const ComplexVec c = ablation(sys, rate, search, EngineMode::Plain).c_hat;
    std::vector<ComplexVec> out;
    const int n = frame.layout.n;
    for (int u = 0; u < frame.layout.users; ++u) out.push_back(c.segment(static_cast<long>(u) * n, n));
    return out;
}

ComplexVec remove_user(const OfdmaFrame& frame, int user, const ComplexVec& c_cpa) {
    return frame.received - distortion_spectrum(frame, user, c_cpa);
}

OfdmaDecoded decouple(const OfdmaFrame& frame, const std::vector<ComplexVec>& joint, const OfdmConfig& config,
                      const SearchParams& search, const DecoupleOptions& options) {
    const int users = frame.layout.users;
    const int n = frame.layout.n;
    if (static_cast<int>(joint.size()) != users) throw InputError("decouple: one joint estimate per user expected");
    const QamConstellation qam(config.qam_order);

    ComplexVec cleaned = frame.received;
    for (int u = 0; u < users; ++u) cleaned -= distortion_spectrum(frame, u, joint[u]);

    OfdmaDecoded out;
    std::vector<ComplexVec> rebuilt;
    for (int u = 0; u < users; ++u) {
        ComplexVec spectrum = ComplexVec::Zero(n);
        if (active(frame.users[u])) {
            const IndexSet data = frame.layout.data_carriers(u);
            const Demapped d = decide(frame, u, cleaned, qam);
            for (std::size_t i = 0; i < data.size(); ++i) spectrum[data[i]] = d.symbols[i];
        }
        const ComplexVec x = idft(spectrum);
        rebuilt.push_back(x);
        out.c_cpa.push_back(x.norm() > 0.0 ? clip(x, config.clip_ratio).distortion : ComplexVec(ComplexVec::Zero(n)));
    }

    std::vector<ComplexVec> views;
    for (int target = 0; target < users; ++target) {
        ComplexVec view = frame.received;
        for (int u = 0; u < users; ++u) {
            if (u != target) view -= distortion_spectrum(frame, u, out.c_cpa[u]);
        }
        const UserSignal& user = frame.users[target];
        const IndexSet rows = frame.layout.reserved_tones(target);
        const double rate = rate_of(user.clip, n);
        ComplexVec c_hat;
        if (options.phase_augmented && rebuilt[target].norm() > 0.0) {
            SystemOptions sys_options;
            sys_options.gamma = config.clip_ratio * rms(rebuilt[target]);
            const MeasurementSystem sys = build_system(view, ComplexVec::Zero(n), user.chan.response, rows,
                                                       rebuilt[target], user.chan.noise_var, sys_options);
            c_hat = ablation(sys, rate, search, EngineMode::Wpa).c_hat;
        } else {
            const MeasurementSystem sys =
                complex_system(sensing_matrix(user.chan.response, rows, n), gather(view, rows), user.chan.noise_var);
            c_hat = ablation(sys, rate, search, EngineMode::Plain).c_hat;
        }
        views.push_back(view - distortion_spectrum(frame, target, c_hat));
        out.c_hat.push_back(std::move(c_hat));
    }
    out.bits = demap_all(frame, views, qam);
    return out;
}

OfdmaReceiver parse_ofdma_receiver(const std::string& name) {
    const auto it = ofdma_table().find(name);
    if (it == ofdma_table().end()) throw ConfigError("unknown multi-user algorithm '" + name + "'");
    return it->second;
}

std::string ofdma_receiver_name(OfdmaReceiver r) {
    for (const auto& [name, value] : ofdma_table()) {
        if (value == r) return name;
    }
    return "?";
}

OfdmaDecoded decode_ofdma(const OfdmaFrame& frame, OfdmaReceiver receiver, const OfdmConfig& config,
                          const SearchParams& search, const DecoupleOptions& options) {
    const QamConstellation qam(config.qam_order);
    const int users = frame.layout.users;
    const int n = frame.layout.n;
    if (receiver == OfdmaReceiver::None || receiver == OfdmaReceiver::NoClip) {
        const ComplexVec& y = receiver == OfdmaReceiver::None ? frame.received : frame.received_noclip;
        OfdmaDecoded out;
        out.bits = demap_all(frame, std::vector<ComplexVec>(users, y), qam);
        out.c_hat.assign(users, ComplexVec::Zero(n));
        return out;
    }
    std::size_t clipped = 0;
    for (const UserSignal& u : frame.users) clipped += u.clip.support.size();
    const double rate = std::max(static_cast<double>(clipped), 1.0) / (static_cast<double>(n) * users);
    const double noise_var = frame.users.front().chan.noise_var;
    const std::vector<ComplexVec> joint = joint_estimate(frame, rate, search, noise_var);
    if (receiver == OfdmaReceiver::TwoStage) return decouple(frame, joint, config, search, options);

    ComplexVec cleaned = frame.received;
    for (int u = 0; u < users; ++u) cleaned -= distortion_spectrum(frame, u, joint[u]);
    OfdmaDecoded out;
    out.bits = demap_all(frame, std::vector<ComplexVec>(users, cleaned), qam);
    out.c_hat = joint;
    return out;
}

Bits ofdma_bits(const OfdmaFrame& frame) {
    Bits out;
    for (const UserSignal& u : frame.users) out.insert(out.end(), u.bits.begin(), u.bits.end());
    return out;
}

Bits ofdma_bits(const OfdmaDecoded& decoded) {
    Bits out;
    for (const Bits& b : decoded.bits) out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace ofdmclip
