#include "ofdmclip/chanest.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ofdmclip/dsp.hpp"
#include "ofdmclip/rc_select.hpp"

namespace ofdmclip {

namespace {

const std::map<std::string, Estimator>& estimator_table() {
    static const std::map<std::string, Estimator> table{
        {"mmse", Estimator::Mmse},
        {"rc", Estimator::Rc},
        {"cpa", Estimator::Cpa},
        {"rc_cpa", Estimator::RcCpa},
    };
    return table;
}

ComplexVec gather(const ComplexVec& v, const IndexSet& rows) {
    ComplexVec out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out[r] = v[rows[r]];
    return out;
}

std::vector<char> pilot_mask(const PilotPlan& plan) {
    std::vector<char> mask(plan.n, 0);
    for (int k : plan.pilots) mask[k] = 1;
    return mask;
}

ComplexVec equalized(const ComplexVec& received, const ChannelEstimate& estimate, int n) {
    return received.cwiseQuotient(frequency_response(estimate.h_hat, n));
}

}  // namespace

PilotPlan make_pilot_plan(int n, int count, const QamConstellation& qam, std::uint64_t seed) {
    if (count <= 0 || count > n) throw ConfigError("pilot count must satisfy 0 < Q <= n");
    PilotPlan plan;
    plan.n = n;
    for (long i = 0; i < count; ++i) plan.pilots.push_back(static_cast<int>(i * n / count));
    Rng rng(seed);
    plan.pilot_symbols = qam.map(random_bits(static_cast<std::size_t>(count) * qam.bits_per_symbol(), rng));
    plan.rows = plan.pilots;
    plan.reference = plan.pilot_symbols;
    return plan;
}

double mse_db(const ComplexVec& h, const ComplexVec& h_hat) {
    if (h.size() != h_hat.size()) throw InputError("mse_db: length mismatch");
    return 10.0 * std::log10((h - h_hat).squaredNorm() / h.squaredNorm());
}

ComplexMat pilot_matrix(const ComplexVec& symbols, const IndexSet& rows, int n, int taps) {
    if (symbols.size() != static_cast<long>(rows.size())) throw InputError("pilot_matrix: one symbol per row");
    ComplexMat x(rows.size(), taps);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int l = 0; l < taps; ++l) {
            const long m = (static_cast<long>(rows[r]) * l) % n;
            x(r, l) = symbols[r] * std::polar(1.0, -2.0 * kPi * m / n);
        }
    }
    return x;
}

ChannelEstimate mmse_estimate(const ComplexVec& y, const ComplexMat& x, double noise_var, double tap_var) {
    if (y.size() != x.rows() || x.rows() == 0) throw InputError("mmse_estimate: need one observation per row");
    ComplexMat gram = x * x.adjoint();
    gram.diagonal().array() += noise_var / tap_var;
    ChannelEstimate out;
    out.h_hat = x.adjoint() * gram.ldlt().solve(y);
    return out;
}

void ChanestConfig::validate() const {
    link.validate();
    if (pilots <= 0 || pilots > link.n) throw ConfigError("pilot count must satisfy 0 < Q <= n");
    if (reliable < 0 || reliable > link.n - pilots) throw ConfigError("reliable carriers must satisfy 0 <= R <= n - Q");
    if (cpa_passes < 1) throw ConfigError("cpa_passes must be at least 1");
}

ChanestFrame draw_chanest_frame(const ChanestConfig& config, const PilotPlan& plan, Rng& rng) {
    const QamConstellation qam(config.link.qam_order);
    const int n = config.link.n;
    const std::vector<char> is_pilot = pilot_mask(plan);
    ChanestFrame f;
    f.bits = random_bits(static_cast<std::size_t>(n - plan.pilots.size()) * qam.bits_per_symbol(), rng);
    const ComplexVec data = qam.map(f.bits);
    f.symbols.resize(n);
    long d = 0;
    long p = 0;
    for (int k = 0; k < n; ++k) f.symbols[k] = is_pilot[k] ? plan.pilot_symbols[p++] : data[d++];
    f.clip = clip(idft(f.symbols), config.link.clip_ratio);
    f.chan = draw_channel(config.link, rng);
    const ComplexVec noise =
        f.chan.noise_var > 0.0 ? complex_gaussian(n, f.chan.noise_var, rng) : ComplexVec(ComplexVec::Zero(n));
    f.received = receive_spectrum(f.clip.clipped, f.chan, noise);
    return f;
}

ChannelEstimate plan_estimate(const ComplexVec& received, const PilotPlan& plan, const ChanestConfig& config) {
    const ComplexMat x = pilot_matrix(plan.reference, plan.rows, plan.n, config.link.taps);
    return mmse_estimate(gather(received, plan.rows), x, config.link.noise_variance(), config.tap_variance());
}

ChannelEstimate pilot_estimate(const ComplexVec& received, const PilotPlan& plan, const ChanestConfig& config) {
    PilotPlan pilots_only = plan;
    pilots_only.rows = plan.pilots;
    pilots_only.reference = plan.pilot_symbols;
    return plan_estimate(received, pilots_only, config);
}

PilotPlan rc_augment(const ComplexVec& received, const PilotPlan& plan, const ChannelEstimate& estimate,
                     const ChanestConfig& config, int reliable) {
    if (reliable < 0 || reliable > plan.n - static_cast<int>(plan.pilots.size())) {
        throw ConfigError("cannot select " + std::to_string(reliable) + " reliable carriers");
    }
    const QamConstellation qam(config.link.qam_order);
    const ComplexVec response = frequency_response(estimate.h_hat, plan.n);
    const RealVec var = response.cwiseAbs2().cwiseInverse() * noise_floor(config.link.noise_variance());
    const ReliabilityReport report = reliability(received.cwiseQuotient(response), qam, var);
    const IndexSet chosen = select_rc(report, reliable, plan.pilots);

    PilotPlan out = plan;
    out.rows.clear();
    std::merge(plan.pilots.begin(), plan.pilots.end(), chosen.begin(), chosen.end(), std::back_inserter(out.rows));
    const std::vector<char> is_pilot = pilot_mask(plan);
    out.reference.resize(out.rows.size());
    long p = 0;
    for (std::size_t r = 0; r < out.rows.size(); ++r) {
        const int k = out.rows[r];
        out.reference[r] = is_pilot[k] ? plan.pilot_symbols[p++] : report.decisions.symbols[k];
    }
    return out;
}

ChannelEstimate cpa_refine(const ComplexVec& received, const PilotPlan& plan, const ChannelEstimate& estimate,
                           const ChanestConfig& config) {
    const QamConstellation qam(config.link.qam_order);
    const std::vector<char> is_pilot = pilot_mask(plan);
    ChannelEstimate current = estimate;
    for (int pass = 0; pass < config.cpa_passes; ++pass) {
        ComplexVec decided = qam.demap(equalized(received, current, plan.n)).symbols;
        long p = 0;
        for (int k = 0; k < plan.n; ++k) {
            if (is_pilot[k]) decided[k] = plan.pilot_symbols[p++];
        }
        const ComplexVec clipped = dft(clip(idft(decided), config.link.clip_ratio).clipped);
        PilotPlan contaminated = plan;
        contaminated.reference = gather(clipped, plan.rows);
        current = plan_estimate(received, contaminated, config);
    }
    return current;
}

Estimator parse_estimator(const std::string& name) {
    const auto it = estimator_table().find(name);
    if (it == estimator_table().end()) throw ConfigError("unknown estimator '" + name + "'");
    return it->second;
}

std::string estimator_name(Estimator e) {
    for (const auto& [name, value] : estimator_table()) {
        if (value == e) return name;
    }
    return "?";
}

ChannelEstimate estimate_channel(const ChanestFrame& frame, const PilotPlan& plan, Estimator estimator,
                                 const ChanestConfig& config) {
    const ChannelEstimate mmse = pilot_estimate(frame.received, plan, config);
    switch (estimator) {
        case Estimator::Mmse: return mmse;
        case Estimator::Cpa: return cpa_refine(frame.received, plan, mmse, config);
        case Estimator::Rc:
        case Estimator::RcCpa: {
            const PilotPlan augmented = rc_augment(frame.received, plan, mmse, config, config.reliable);
            const ChannelEstimate rc = plan_estimate(frame.received, augmented, config);
            if (estimator == Estimator::Rc) return rc;
            return cpa_refine(frame.received, augmented, rc, config);
        }
    }
    return mmse;
}

ChannelRealization perturb_channel(const ChannelRealization& chan, const ComplexVec& unit, double error_var, int n) {
    if (unit.size() != chan.taps.size()) throw InputError("perturb_channel: one draw per tap");
    if (error_var < 0.0) throw ConfigError("channel error variance must be non-negative");
    ChannelRealization out = chan;
    out.taps += unit * std::sqrt(error_var / static_cast<double>(chan.taps.size()));
    out.response = frequency_response(out.taps, n);
    return out;
}

LinkFrame with_channel(const LinkFrame& frame, const ChannelRealization& known) {
    LinkFrame out = frame;
    out.chan = known;
    return out;
}

}  // namespace ofdmclip
