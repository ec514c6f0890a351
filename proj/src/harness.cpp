#include "ofdmclip/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ofdmclip/ofdma.hpp"
#include "ofdmclip/simo.hpp"

namespace ofdmclip {

#ifndef OFDMCLIP_VERSION
#define OFDMCLIP_VERSION "dev"
#endif

const char* const kVersion = OFDMCLIP_VERSION;

namespace {

const std::map<std::string, Experiment>& experiment_table() {
    static const std::map<std::string, Experiment> table{
        {"ber_vs_ebn0", Experiment::BerVsEbn0},   {"ber_vs_p", Experiment::BerVsP},
        {"ber_vs_cr", Experiment::BerVsCr},       {"bootstrap", Experiment::Bootstrap},
        {"simo_cr", Experiment::SimoCr},          {"multiuser_ebn0", Experiment::MultiuserEbn0},
        {"chanest_mse", Experiment::ChanestMse},  {"chanest_error", Experiment::ChanestError},
    };
    return table;
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_algorithm(Experiment e, const std::string& name) {
    switch (e) {
        case Experiment::SimoCr: parse_simo_receiver(name); break;
        case Experiment::MultiuserEbn0: parse_ofdma_receiver(name); break;
        case Experiment::ChanestMse: parse_estimator(name); break;
        default: parse_receiver(name); break;
    }
}

struct Sample {
    long errors = 0;
    long bits = 0;
    double seconds = 0.0;
    double mse = 0.0;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Everything that stays fixed over the frames of one grid point.
struct PointContext {
    const SweepSpec& spec;
    OfdmConfig link;
    double value;
    ChanestConfig chanest;
    PilotPlan plan;
    std::vector<std::string> names;
};

Sample bit_sample(const Bits& sent, const Bits& got, Clock::time_point t0) {
    Sample s;
    s.seconds = since(t0);
    s.errors = static_cast<long>(count_bit_errors(sent, got));
    s.bits = static_cast<long>(sent.size());
    return s;
}

// Runs the active algorithms on one frame; inactive slots stay empty.
std::vector<Sample> run_frame(const PointContext& ctx, const std::vector<char>& active, std::uint64_t seed) {
    Rng rng(seed);
    const SweepSpec& spec = ctx.spec;
    const OfdmConfig& cfg = ctx.link;
    std::vector<Sample> out(ctx.names.size());
    switch (spec.experiment) {
        case Experiment::SimoCr: {
            const SimoFrame frame = draw_simo_frame(cfg, spec.antennas, rng);
            for (std::size_t a = 0; a < out.size(); ++a) {
                if (!active[a]) continue;
                const auto t0 = Clock::now();
                const SimoDecoded d = decode_simo(frame, parse_simo_receiver(ctx.names[a]), cfg, spec.rx);
                out[a] = bit_sample(frame.bits, d.bits, t0);
            }
            break;
        }
        case Experiment::MultiuserEbn0: {
            const OfdmaFrame frame = build_ofdma(cfg, rng);
            DecoupleOptions options;
            options.phase_augmented = spec.stage2_wpa;
            const Bits sent = ofdma_bits(frame);
            for (std::size_t a = 0; a < out.size(); ++a) {
                if (!active[a]) continue;
                const auto t0 = Clock::now();
                const OfdmaDecoded d =
                    decode_ofdma(frame, parse_ofdma_receiver(ctx.names[a]), cfg, spec.rx.search, options);
                out[a] = bit_sample(sent, ofdma_bits(d), t0);
            }
            break;
        }
        case Experiment::ChanestMse: {
            const ChanestFrame frame = draw_chanest_frame(ctx.chanest, ctx.plan, rng);
            for (std::size_t a = 0; a < out.size(); ++a) {
                if (!active[a]) continue;
                const auto t0 = Clock::now();
                const ChannelEstimate est = estimate_channel(frame, ctx.plan, parse_estimator(ctx.names[a]), ctx.chanest);
                out[a].seconds = since(t0);
                out[a].mse = (frame.chan.taps - est.h_hat).squaredNorm() / frame.chan.taps.squaredNorm();
            }
            break;
        }
        case Experiment::ChanestError: {
            const LinkFrame truth = draw_frame(cfg, rng);
            const ComplexVec unit = complex_gaussian(cfg.taps, 1.0, rng);
            const LinkFrame frame = with_channel(truth, perturb_channel(truth.chan, unit, ctx.value, cfg.n));
            for (std::size_t a = 0; a < out.size(); ++a) {
                if (!active[a]) continue;
                const auto t0 = Clock::now();
                const Decoded d = decode(frame, parse_receiver(ctx.names[a]), cfg, spec.rx);
                out[a] = bit_sample(frame.bits, d.bits, t0);
            }
            break;
        }
        default: {
            const LinkFrame frame = draw_frame(cfg, rng);
            for (std::size_t a = 0; a < out.size(); ++a) {
                if (!active[a]) continue;
                const auto t0 = Clock::now();
                const Decoded d = decode(frame, parse_receiver(ctx.names[a]), cfg, spec.rx);
                out[a] = bit_sample(frame.bits, d.bits, t0);
            }
            break;
        }
    }
    return out;
}

// Frames [first, first + count) of one point, spread over the worker threads.
std::vector<std::vector<Sample>> run_batch(const PointContext& ctx, const std::vector<char>& active,
                                           std::uint64_t point, long first, long count) {
    std::vector<std::vector<Sample>> results(count);
    const int workers = static_cast<int>(std::min<long>(ctx.spec.threads, count));
    auto work = [&](int w, std::exception_ptr& error) {
        try {
            for (long j = w; j < count; j += workers) {
                results[j] = run_frame(ctx, active, frame_seed(ctx.spec.seed, point, first + j));
            }
        } catch (...) {
            error = std::current_exception();
        }
    };
    std::vector<std::exception_ptr> errors(workers);
    if (workers <= 1) {
        work(0, errors[0]);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w, std::ref(errors[w]));
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

PointResult run_point(const SweepSpec& spec, std::size_t index) {
    const double value = spec.grid[index];
    PointContext ctx{spec, spec.link_at(value), value, {}, {}, spec.algorithms};
    const bool mse = reports_mse(spec.experiment);
    if (mse) {
        ctx.chanest.link = ctx.link;
        ctx.chanest.pilots = spec.pilots;
        ctx.chanest.reliable = spec.reliable;
        ctx.chanest.cpa_passes = spec.cpa_passes;
        ctx.plan = make_pilot_plan(ctx.link.n, spec.pilots, QamConstellation(ctx.link.qam_order), spec.seed);
    }

    PointResult point;
    point.value = value;
    for (const auto& name : spec.algorithms) {
        AlgorithmResult r;
        r.algorithm = name;
        point.algorithms.push_back(r);
    }
    const std::size_t n_alg = spec.algorithms.size();
    std::vector<char> active(n_alg, 1);
    const long cap = mse ? spec.stop.mse_frames : spec.stop.max_frames;
    long done = 0;
    while (done < cap && std::count(active.begin(), active.end(), 1) > 0) {
        const long count = std::min<long>(spec.batch, cap - done);
        const auto samples = run_batch(ctx, active, index, done, count);
        for (const auto& frame : samples) {
            for (std::size_t a = 0; a < n_alg; ++a) {
                if (!active[a]) continue;
                AlgorithmResult& r = point.algorithms[a];
                r.errors += frame[a].errors;
                r.bits += frame[a].bits;
                r.seconds += frame[a].seconds;
                r.frames += 1;
                if (mse) r.samples.push_back(frame[a].mse);
            }
        }
        done += count;
        if (!mse) {
            for (std::size_t a = 0; a < n_alg; ++a) {
                if (point.algorithms[a].errors >= spec.stop.target_errors) active[a] = 0;
            }
        }
    }
    for (AlgorithmResult& r : point.algorithms) {
        if (mse) {
            double sum = 0.0;
            for (double s : r.samples) sum += s;
            r.metric = 10.0 * std::log10(sum / static_cast<double>(r.samples.size()));
        } else {
            r.metric = r.bits > 0 ? static_cast<double>(r.errors) / static_cast<double>(r.bits) : 0.0;
            r.capped = r.errors < spec.stop.target_errors;
        }
    }
    return point;
}

std::string stop_reason(const SweepSpec& spec, const AlgorithmResult& r) {
    if (reports_mse(spec.experiment)) return "fixed_frames";
    return r.capped ? "max_frames" : "target_errors";
}

nlohmann::json config_json(const SweepSpec& spec) {
    nlohmann::json j;
    j["experiment"] = experiment_name(spec.experiment);
    j["sweep_var"] = sweep_variable(spec.experiment);
    j["grid"] = spec.grid;
    j["algorithms"] = spec.algorithms;
    j["link"] = {{"n", spec.link.n},
                 {"qam_order", spec.link.qam_order},
                 {"taps", spec.link.taps},
                 {"clip_ratio", spec.link.clip_ratio},
                 {"ebn0_db", std::isinf(spec.link.ebn0_db) ? nlohmann::json("inf") : nlohmann::json(spec.link.ebn0_db)},
                 {"measurements", spec.link.measurements}};
    j["receiver"] = {{"beam", spec.rx.search.beam},
                     {"max_depth", spec.rx.search.max_depth},
                     {"window", spec.rx.search.window},
                     {"support_threshold", spec.rx.search.support_threshold},
                     {"early_stop", spec.rx.search.early_stop},
                     {"collect_all", spec.rx.search.collect_all},
                     {"nonnegative", spec.rx.search.nonnegative},
                     {"known_gamma", spec.rx.known_gamma},
                     {"per_carrier_reliability", spec.rx.per_carrier_reliability},
                     {"max_iterations", spec.rx.max_iterations},
                     {"misspecification", spec.rx.misspecification},
                     {"passes", spec.rx.passes},
                     {"max_passes", spec.rx.max_passes},
                     {"outlier_tail", spec.rx.outlier_tail}};
    j["simo"] = {{"antennas", spec.antennas}};
    j["multiuser"] = {{"stage2_wpa", spec.stage2_wpa}};
    j["chanest"] = {{"pilots", spec.pilots}, {"reliable", spec.reliable}, {"cpa_passes", spec.cpa_passes}};
    j["stop"] = {{"target_errors", spec.stop.target_errors},
                 {"max_frames", spec.stop.max_frames},
                 {"mse_frames", spec.stop.mse_frames},
                 {"batch", spec.batch}};
    return j;
}

}  // namespace

Experiment parse_experiment(const std::string& name) {
    const auto it = experiment_table().find(name);
    if (it == experiment_table().end()) throw ConfigError("unknown experiment '" + name + "'");
    return it->second;
}

std::string experiment_name(Experiment e) {
    for (const auto& [name, value] : experiment_table()) {
        if (value == e) return name;
    }
    return "?";
}

std::string sweep_variable(Experiment e) {
    switch (e) {
        case Experiment::BerVsP: return "measurements";
        case Experiment::BerVsCr:
        case Experiment::Bootstrap:
        case Experiment::SimoCr: return "clip_ratio";
        case Experiment::ChanestError: return "error_var";
        default: return "ebn0_db";
    }
}

bool reports_mse(Experiment e) { return e == Experiment::ChanestMse; }

std::vector<std::string> default_algorithms(Experiment e) {
    switch (e) {
        case Experiment::Bootstrap: return {"wpa", "refined", "estimated"};
        case Experiment::SimoCr: return {"noclip", "joint", "individual", "none"};
        case Experiment::MultiuserEbn0: return {"noclip", "two_stage", "joint_only", "none"};
        case Experiment::ChanestMse: return {"mmse", "rc", "cpa", "rc_cpa"};
        case Experiment::ChanestError: return {"noclip", "wpa", "none"};
        default: return {"noclip", "oracle", "wpa", "plain", "none"};
    }
}

SweepSpec default_spec(Experiment e) {
    SweepSpec spec;
    spec.experiment = e;
    spec.algorithms = default_algorithms(e);
    switch (e) {
        case Experiment::BerVsEbn0: spec.grid = {15, 18, 21, 24, 27}; break;
        case Experiment::BerVsP: spec.grid = {75, 100, 125, 150, 175}; break;
        case Experiment::BerVsCr: spec.grid = {1.4, 1.61, 1.8, 2.0}; break;
        case Experiment::Bootstrap: spec.grid = {1.4, 1.61, 1.8}; break;
        case Experiment::SimoCr:
            spec.grid = {1.4, 1.61, 1.8, 2.0};
            spec.link.measurements = 77;
            break;
        case Experiment::MultiuserEbn0:
            spec.grid = {21, 24, 27};
            spec.link.measurements = 75;
            spec.stage2_wpa = true;
            break;
        case Experiment::ChanestMse:
            spec.grid = {10, 20, 30, 40};
            spec.link.n = 256;
            spec.link.clip_ratio = 1.73;
            break;
        case Experiment::ChanestError:
            spec.grid = {0, 1e-4, 1e-3, 1e-2};
            spec.link.clip_ratio = 1.62;
            spec.link.ebn0_db = 20;
            break;
    }
    return spec;
}

void SweepSpec::validate() const {
    if (grid.empty()) throw ConfigError("sweep grid is empty");
    if (grid.size() > 1) {
        const bool up = grid[1] > grid[0];
        for (std::size_t i = 1; i < grid.size(); ++i) {
            if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1])) {
                throw ConfigError("sweep grid must be strictly monotone");
            }
        }
    }
    if (algorithms.empty()) throw ConfigError("no algorithms selected");
    for (const auto& a : algorithms) check_algorithm(experiment, a);
    if (stop.target_errors < 50) throw ConfigError("target_errors must be at least 50");
    if (stop.max_frames < 1 || stop.mse_frames < 1) throw ConfigError("frame limits must be positive");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (batch < 1) throw ConfigError("batch must be at least 1");
    if (antennas < 1) throw ConfigError("antennas must be at least 1");
    if (rx.search.beam < 1) throw ConfigError("beam must be at least 1");
    if (rx.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (rx.passes < 1 || rx.max_passes < rx.passes) throw ConfigError("need 1 <= passes <= max_passes");
    if (!(rx.outlier_tail > 0.0 && rx.outlier_tail < 1.0)) throw ConfigError("outlier_tail must lie in (0, 1)");
    for (double v : grid) {
        if (experiment == Experiment::BerVsP && v != std::floor(v)) {
            throw ConfigError("measurement counts must be integers");
        }
        if (experiment == Experiment::ChanestError && !(v >= 0.0)) {
            throw ConfigError("channel error variance must be non-negative");
        }
        const OfdmConfig cfg = link_at(v);
        cfg.validate();
        if (experiment == Experiment::MultiuserEbn0) layout_for(cfg);
        if (experiment == Experiment::ChanestMse) {
            ChanestConfig cc;
            cc.link = cfg;
            cc.pilots = pilots;
            cc.reliable = reliable;
            cc.cpa_passes = cpa_passes;
            cc.validate();
        }
    }
}

OfdmConfig SweepSpec::link_at(double value) const {
    OfdmConfig cfg = link;
    cfg.seed = seed;
    switch (experiment) {
        case Experiment::BerVsP: cfg.measurements = static_cast<int>(value); break;
        case Experiment::BerVsCr:
        case Experiment::Bootstrap:
        case Experiment::SimoCr: cfg.clip_ratio = value; break;
        case Experiment::ChanestError: break;
        default: cfg.ebn0_db = value; break;
    }
    return cfg;
}

const AlgorithmResult& PointResult::at(const std::string& algorithm) const {
    for (const auto& r : algorithms) {
        if (r.algorithm == algorithm) return r;
    }
    throw InputError("no result for algorithm '" + algorithm + "'");
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t frame_seed(std::uint64_t master, std::uint64_t point, std::uint64_t frame) {
    return mix64(mix64(mix64(master) ^ point) ^ frame);
}

SweepResult run_sweep(const SweepSpec& spec) {
    spec.validate();
    SweepResult result;
    result.spec = spec;
    for (std::size_t i = 0; i < spec.grid.size(); ++i) result.points.push_back(run_point(spec, i));
    return result;
}

std::string points_csv(const SweepResult& result, bool with_timing) {
    std::ostringstream out;
    out << "sweep_var,algorithm,value,metric,errors,frames" << (with_timing ? ",seconds" : "") << '\n';
    const std::string var = sweep_variable(result.spec.experiment);
    for (const auto& p : result.points) {
        for (const auto& r : p.algorithms) {
            out << var << ',' << r.algorithm << ',' << fmt17(p.value) << ',' << fmt17(r.metric) << ',' << r.errors
                << ',' << r.frames;
            if (with_timing) out << ',' << fmt17(r.seconds);
            out << '\n';
        }
    }
    return out.str();
}

std::string manifest_json(const SweepResult& result) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["seed"] = result.spec.seed;
    j["config"] = config_json(result.spec);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : result.points) {
        nlohmann::json algs = nlohmann::json::array();
        for (const auto& r : p.algorithms) {
            algs.push_back({{"algorithm", r.algorithm},
                            {"frames", r.frames},
                            {"errors", r.errors},
                            {"bits", r.bits},
                            {"stop", stop_reason(result.spec, r)}});
        }
        points.push_back({{"value", p.value}, {"algorithms", algs}});
    }
    j["points"] = points;
    return j.dump(2) + "\n";
}

std::string plot_svg(const SweepResult& result) {
    constexpr double width = 640.0, height = 420.0;
    constexpr double left = 70.0, right = 150.0, top = 20.0, bottom = 50.0;
    const double pw = width - left - right;
    const double ph = height - top - bottom;
    const bool mse = reports_mse(result.spec.experiment);
    const bool log_y = !mse;

    std::map<std::string, std::vector<std::pair<double, double>>> curves;
    std::vector<std::string> order;
    for (const auto& p : result.points) {
        for (const auto& r : p.algorithms) {
            if (!curves.count(r.algorithm)) order.push_back(r.algorithm);
            auto& c = curves[r.algorithm];
            if (log_y && !(r.metric > 0.0)) continue;
            c.emplace_back(p.value, log_y ? std::log10(r.metric) : r.metric);
        }
    }
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    bool any = false;
    for (const auto& [name, pts] : curves) {
        for (const auto& [x, y] : pts) {
            if (!any) {
                x0 = x1 = x;
                y0 = y1 = y;
                any = true;
            }
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    }
    if (log_y && any) {
        y0 = std::floor(y0);
        y1 = std::ceil(y1);
    }
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
                                   "#7f7f7f"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
        << sweep_variable(result.spec.experiment) << "</text>\n";
    out << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
        << ")\" text-anchor=\"middle\">" << (mse ? "MSE (dB)" : "BER") << "</text>\n";
    if (any) {
        for (const auto& p : result.points) {
            out << "<text x=\"" << sx(p.value) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
                << fmt17(p.value) << "</text>\n";
        }
        const int ticks = log_y ? static_cast<int>(y1 - y0) : 4;
        for (int t = 0; t <= ticks; ++t) {
            const double y = y0 + (y1 - y0) * t / std::max(ticks, 1);
            char label[32];
            if (log_y) {
                std::snprintf(label, sizeof label, "1e%d", static_cast<int>(std::lround(y)));
            } else {
                std::snprintf(label, sizeof label, "%.1f", y);
            }
            out << "<text x=\"" << left - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
                << label << "</text>\n";
        }
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        const char* color = colors[i % 8];
        const auto& pts = curves[order[i]];
        if (!pts.empty()) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t k = 0; k < pts.size(); ++k) {
                out << (k ? " " : "") << sx(pts[k].first) << ',' << sy(pts[k].second);
            }
            out << "\"/>\n";
        }
        const double ly = top + 15 + 18.0 * static_cast<double>(i);
        out << "<line x1=\"" << width - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << width - right + 35
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << width - right + 40 << "\" y=\"" << ly + 4 << "\" font-size=\"12\">" << order[i]
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void emit(const SweepResult& result, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
    const std::pair<const char*, std::string> files[] = {
        {"points.csv", points_csv(result)},
        {"manifest.json", manifest_json(result)},
        {"plot.svg", plot_svg(result)},
    };
    for (const auto& [name, text] : files) {
        const std::filesystem::path path = out_dir / name;
        std::ofstream f(path, std::ios::binary);
        f << text;
        f.close();
        if (!f) throw std::runtime_error("cannot write " + path.string());
    }
}

}  // namespace ofdmclip
