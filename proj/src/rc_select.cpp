#include "ofdmclip/rc_select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ofdmclip {

namespace {

constexpr double kNoiseFloor = 1e-12;

double log_ratio(Complex z, int decided, const QamConstellation& constellation, double var) {
    const auto& pts = constellation.points();
    const double numerator = -std::norm(z - pts[decided]) / var;
    double peak = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < constellation.order(); ++k) {
        if (k == decided) continue;
        peak = std::max(peak, -std::norm(z - pts[k]) / var);
    }
    double acc = 0.0;
    for (int k = 0; k < constellation.order(); ++k) {
        if (k == decided) continue;
        acc += std::exp(-std::norm(z - pts[k]) / var - peak);
    }
    return numerator - (peak + std::log(acc));
}

ReliabilityReport finish(ReliabilityReport report) {
    const long n = report.log_score.size();
    report.order.resize(n);
    std::iota(report.order.begin(), report.order.end(), 0);
    std::stable_sort(report.order.begin(), report.order.end(),
                     [&](int a, int b) { return report.log_score[a] > report.log_score[b]; });
    return report;
}

RealMat complex_columns(const ComplexMat& psi) {
    const long p = psi.rows();
    RealMat phi(2 * p, 2 * psi.cols());
    for (long col = 0; col < psi.cols(); ++col) {
        for (long r = 0; r < p; ++r) {
            const Complex v = psi(r, col);
            phi(r, 2 * col) = v.real();
            phi(p + r, 2 * col) = v.imag();
            phi(r, 2 * col + 1) = -v.imag();
            phi(p + r, 2 * col + 1) = v.real();
        }
    }
    return phi;
}

}  // namespace

double noise_floor(double noise_var) { return std::max(noise_var, kNoiseFloor); }

ReliabilityReport reliability(const ComplexVec& xhat, const QamConstellation& constellation, double noise_var) {
    if (!(noise_var > 0.0)) throw ConfigError("reliability needs a positive noise variance");
    return reliability(xhat, constellation, RealVec::Constant(xhat.size(), noise_var));
}

ReliabilityReport reliability(const ComplexVec& xhat, const QamConstellation& constellation,
                              const RealVec& noise_var) {
    if (noise_var.size() != xhat.size()) throw InputError("reliability: variance length mismatch");
    ReliabilityReport report;
    report.decisions = constellation.demap(xhat);
    report.log_score.resize(xhat.size());
    for (long i = 0; i < xhat.size(); ++i) {
        if (!(noise_var[i] > 0.0)) throw ConfigError("reliability needs a positive noise variance");
        report.log_score[i] = log_ratio(xhat[i], report.decisions.indices[i], constellation, noise_var[i]);
    }
    return finish(std::move(report));
}

IndexSet select_rc(const ReliabilityReport& report, int count, const IndexSet& reserved) {
    const long n = report.log_score.size();
    std::vector<char> blocked(n, 0);
    for (int r : reserved) {
        if (r >= 0 && r < n) blocked[r] = 1;
    }
    const long eligible = n - std::count(blocked.begin(), blocked.end(), 1);
    if (count < 0 || count > eligible) {
        throw ConfigError("cannot select " + std::to_string(count) + " carriers from " +
                          std::to_string(eligible) + " eligible");
    }
    IndexSet chosen;
    chosen.reserve(count);
    for (int idx : report.order) {
        if (static_cast<int>(chosen.size()) == count) break;
        if (!blocked[idx]) chosen.push_back(idx);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

ComplexMat sensing_matrix(const ComplexVec& response, const IndexSet& rows, int n) {
    std::vector<Complex> roots(n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (int m = 0; m < n; ++m) roots[m] = std::polar(scale, -2.0 * kPi * m / n);
    ComplexMat psi(rows.size(), n);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const long k = rows[r];
        const Complex d = response[k];
        for (long col = 0; col < n; ++col) psi(r, col) = d * roots[(k * col) % n];
    }
    return psi;
}

MeasurementSystem build_system(const ComplexVec& received, const ComplexVec& decisions,
                               const ComplexVec& response, const IndexSet& chosen,
                               const ComplexVec& phase_source, double noise_var,
                               const SystemOptions& options) {
    const long n = received.size();
    if (decisions.size() != n || response.size() != n || phase_source.size() != n) {
        throw InputError("build_system: length mismatch");
    }
    const long p = static_cast<long>(chosen.size());

    MeasurementSystem sys;
    sys.kind = options.kind;
    sys.rows = chosen;
    sys.noise_var = noise_floor(noise_var) / 2.0;

    RealVec magnitude = phase_source.cwiseAbs();
    sys.gamma_hat = options.gamma ? *options.gamma : magnitude.maxCoeff();
    sys.weights = RealVec::Constant(n, sys.gamma_hat) - magnitude;
    sys.theta.resize(n);
    for (long i = 0; i < n; ++i) sys.theta[i] = std::arg(phase_source[i]) - kPi;

    sys.y.resize(2 * p);
    for (long r = 0; r < p; ++r) {
        const long k = chosen[r];
        const Complex v = received[k] - response[k] * decisions[k];
        sys.y[r] = v.real();
        sys.y[p + r] = v.imag();
    }

    const ComplexMat psi = sensing_matrix(response, chosen, static_cast<int>(n));
    if (sys.kind == SystemKind::PhaseAugmented) {
        sys.phi.resize(2 * p, n);
        for (long col = 0; col < n; ++col) {
            const Complex rot = std::polar(1.0, sys.theta[col]);
            for (long r = 0; r < p; ++r) {
                const Complex v = psi(r, col) * rot;
                sys.phi(r, col) = v.real();
                sys.phi(p + r, col) = v.imag();
            }
        }
    } else {
        sys.phi = complex_columns(psi);
    }
    return sys;
}

MeasurementSystem complex_system(const ComplexMat& psi, const ComplexVec& v, double noise_var) {
    if (psi.rows() != v.size()) throw InputError("complex_system: row count mismatch");
    const long p = psi.rows();
    MeasurementSystem sys;
    sys.kind = SystemKind::Complex;
    sys.noise_var = noise_floor(noise_var) / 2.0;
    sys.weights = RealVec::Zero(psi.cols());
    sys.theta = RealVec::Zero(psi.cols());
    sys.y.resize(2 * p);
    sys.y.head(p) = v.real();
    sys.y.tail(p) = v.imag();
    sys.phi = complex_columns(psi);
    return sys;
}

RealVec predict_complex_path(const ComplexVec& response, const IndexSet& rows, const RealVec& theta,
                             const RealVec& magnitudes) {
    const long n = theta.size();
    ComplexVec c(n);
    for (long i = 0; i < n; ++i) c[i] = std::polar(1.0, theta[i]) * magnitudes[i];
    const ComplexVec pred = sensing_matrix(response, rows, static_cast<int>(n)) * c;
    RealVec out(2 * pred.size());
    out.head(pred.size()) = pred.real();
    out.tail(pred.size()) = pred.imag();
    return out;
}

MeasurementSystem stack_systems(const std::vector<MeasurementSystem>& systems) {
    if (systems.empty()) throw InputError("stack_systems: nothing to stack");
    const auto& first = systems.front();
    long rows = 0;
    for (const auto& s : systems) {
        if (s.phi.cols() != first.phi.cols() || s.kind != first.kind) {
            throw InputError("stack_systems: systems disagree on the unknown vector");
        }
        rows += s.phi.rows();
    }
    MeasurementSystem out = first;
    out.y.resize(rows);
    out.phi.resize(rows, first.phi.cols());
    out.rows.clear();
    long offset = 0;
    double noise_sum = 0.0;
    for (const auto& s : systems) {
        out.y.segment(offset, s.y.size()) = s.y;
        out.phi.middleRows(offset, s.phi.rows()) = s.phi;
        out.rows.insert(out.rows.end(), s.rows.begin(), s.rows.end());
        noise_sum += s.noise_var * static_cast<double>(s.phi.rows());
        offset += s.phi.rows();
    }
    out.noise_var = noise_sum / static_cast<double>(rows);
    return out;
}

}  // namespace ofdmclip
