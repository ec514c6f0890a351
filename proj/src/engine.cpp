#include "ofdmclip/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace ofdmclip {

namespace {

// Squared-norm ratio below which a new column counts as linearly dependent.
constexpr double kRankTol = 1e-10;

double log_odds(double p) { return std::log(p) - std::log1p(-p); }

// Thin QR of the columns appended so far, with the running residual of y.
class IncrementalQr {
public:
    IncrementalQr(const RealVec& y, int capacity)
        : basis_(y.size(), capacity), rfac_(RealMat::Zero(capacity, capacity)), qty_(capacity), residual_(y) {}

    int size() const { return k_; }
    const RealVec& residual() const { return residual_; }
    double residual_norm2() const { return residual_.squaredNorm(); }

    // Appends one column. Returns the new orthonormal direction, or nothing when
    // the column is numerically inside the current span.
    std::optional<RealVec> append(const Eigen::Ref<const RealVec>& column, const RealVec& y) {
        if (k_ >= basis_.cols()) grow();
        const auto q_old = basis_.leftCols(k_);
        RealVec coeffs = q_old.transpose() * column;
        RealVec v = column - q_old * coeffs;
        const RealVec again = q_old.transpose() * v;
        v -= q_old * again;
        coeffs += again;
        const double norm2 = v.squaredNorm();
        if (norm2 <= kRankTol * column.squaredNorm() || norm2 == 0.0) return std::nullopt;
        const double norm = std::sqrt(norm2);
        v /= norm;
        basis_.col(k_) = v;
        rfac_.col(k_).head(k_) = coeffs;
        rfac_(k_, k_) = norm;
        qty_[k_] = v.dot(y);
        residual_ -= v * v.dot(residual_);
        ++k_;
        return v;
    }

    // Solves R a = Q^T y for the coefficients in append order.
    RealVec solve() const { return solve_r(qty_.head(k_)); }

    RealVec solve_r(const RealVec& rhs) const {
        if (k_ == 0) return RealVec();
        return rfac_.topLeftCorner(k_, k_).triangularView<Eigen::Upper>().solve(rhs);
    }


private:
    void grow() {
        const int cap = std::max<int>(4, static_cast<int>(basis_.cols()) * 2);
        basis_.conservativeResize(Eigen::NoChange, cap);
        RealMat r = RealMat::Zero(cap, cap);
        r.topLeftCorner(k_, k_) = rfac_.topLeftCorner(k_, k_);
        rfac_ = std::move(r);
        qty_.conservativeResize(cap);
    }

    RealMat basis_;
    RealMat rfac_;
    RealVec qty_;
    RealVec residual_;
    int k_ = 0;
};

struct SupportHash {
    std::size_t operator()(const IndexSet& s) const {
        std::uint64_t h = 0x9e3779b97f4a7c15ull;
        for (int i : s) h = (h ^ static_cast<std::uint64_t>(i)) * 0x100000001b3ull;
        return static_cast<std::size_t>(h);
    }
};

std::optional<IncrementalQr> factor(const MeasurementSystem& sys, const IndexSet& support) {
    const int block = sys.block();
    IncrementalQr qr(sys.y, static_cast<int>(support.size()) * block + 1);
    for (int idx : support) {
        if (idx < 0 || idx >= sys.unknowns()) throw InputError("support index out of range");
        for (int b = 0; b < block; ++b) {
            if (!qr.append(sys.phi.col(idx * block + b), sys.y)) return std::nullopt;
        }
    }
    return qr;
}

// One retained support of the beam together with the candidate statistics.
struct SearchNode {
    IndexSet appended;        // indices in insertion order
    IndexSet sorted;
    std::vector<int> slot;    // insertion position of sorted[s]
    std::vector<char> member; // per unknown
    IncrementalQr qr;
    RealVec corr;             // phi^T residual
    RealVec gram;             // projected column Gram entries
    RealMat shift;            // R^{-1} Q^T phi, one row per basis vector
    RealVec coef;             // least-squares amplitudes in insertion order
    double log_prior = 0.0;
    double score = 0.0;
};

struct Candidate {
    double score;
    int parent;
    int index;
};

class GreedySearch {
public:
    GreedySearch(const MeasurementSystem& sys, const SupportPrior& prior, const SearchParams& params)
        : sys_(sys), prior_(prior), params_(params), block_(sys.block()), unknowns_(sys.unknowns()) {
        if (prior.activation.size() != unknowns_) throw InputError("prior length does not match the system");
        if (!(sys.noise_var > 0.0)) throw ConfigError("measurement noise variance must be positive");
        odds_.resize(unknowns_);
        for (int i = 0; i < unknowns_; ++i) odds_[i] = log_odds(prior.activation[i]);
        col_norm2_ = sys.phi.colwise().squaredNorm().transpose();
        depth_limit_ = params.depth_limit(prior.rate, unknowns_, sys.measurements(), block_);
    }

    SparsePosterior run() {
        SparsePosterior post;
        post.unknowns = unknowns_;
        post.block = block_;

        std::vector<SearchNode> beam;
        beam.push_back(root());
        record(beam.back(), post);
        double global_best = beam.back().score;

        for (int depth = 1; depth <= depth_limit_; ++depth) {
            std::vector<Candidate> cands = candidates(beam);
            if (cands.empty()) break;
            std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.parent != b.parent) return a.parent < b.parent;
                return a.index < b.index;
            });

            std::vector<SearchNode> next;
            std::unordered_set<IndexSet, SupportHash> seen;
            const double floor = std::max(global_best, cands.front().score) - params_.window;
            for (const Candidate& c : cands) {
                const bool full = static_cast<int>(next.size()) == params_.beam;
                if (full && (!params_.collect_all || c.score < floor)) break;
                IndexSet key = beam[c.parent].sorted;
                key.insert(std::upper_bound(key.begin(), key.end(), c.index), c.index);
                if (!seen.insert(key).second) continue;
                if (full) {
                    record_extension(beam[c.parent], c.index, c.score, post);
                    continue;
                }
                std::optional<SearchNode> child = extend(beam[c.parent], c.index);
                if (child) next.push_back(std::move(*child));
            }
            if (next.empty()) break;

            double depth_best = -std::numeric_limits<double>::infinity();
            for (const SearchNode& node : next) {
                record(node, post);
                depth_best = std::max(depth_best, node.score);
            }
            post.depth_reached = depth;
            global_best = std::max(global_best, depth_best);
            if (params_.early_stop && depth_best < global_best - params_.window) break;
            beam = std::move(next);
        }

        collect(post, global_best);
        return post;
    }

private:
    SearchNode root() const {
        SearchNode node{{}, {}, {}, std::vector<char>(unknowns_, 0), IncrementalQr(sys_.y, 8), RealVec(), RealVec(),
                        RealMat(0, sys_.phi.cols()), RealVec(), 0.0, 0.0};
        node.corr = sys_.phi.transpose() * sys_.y;
        if (block_ == 1) {
            node.gram = col_norm2_;
        } else {
            node.gram.resize(3 * unknowns_);
            for (int i = 0; i < unknowns_; ++i) {
                node.gram[3 * i] = col_norm2_[2 * i];
                node.gram[3 * i + 1] = sys_.phi.col(2 * i).dot(sys_.phi.col(2 * i + 1));
                node.gram[3 * i + 2] = col_norm2_[2 * i + 1];
            }
        }
        for (int i = 0; i < unknowns_; ++i) node.log_prior += std::log1p(-prior_.activation[i]);
        node.score = -node.qr.residual_norm2() / (2.0 * sys_.noise_var) + node.log_prior;
        return node;
    }

    // Residual energy removed by adding index i to the node, if admissible.
    std::optional<double> gain(const SearchNode& node, int i) const {
        if (block_ == 1) {
            const double g = node.gram[i];
            if (g <= kRankTol * col_norm2_[i] || g <= 0.0) return std::nullopt;
            return node.corr[i] * node.corr[i] / g;
        }
        const double g11 = node.gram[3 * i];
        const double g12 = node.gram[3 * i + 1];
        const double g22 = node.gram[3 * i + 2];
        const double det = g11 * g22 - g12 * g12;
        if (det <= kRankTol * col_norm2_[2 * i] * col_norm2_[2 * i + 1] || det <= 0.0) return std::nullopt;
        const double b1 = node.corr[2 * i];
        const double b2 = node.corr[2 * i + 1];
        return (g22 * b1 * b1 - 2.0 * g12 * b1 * b2 + g11 * b2 * b2) / det;
    }

    std::vector<Candidate> candidates(const std::vector<SearchNode>& beam) const {
        std::vector<Candidate> out;
        out.reserve(beam.size() * unknowns_);
        for (std::size_t p = 0; p < beam.size(); ++p) {
            const SearchNode& node = beam[p];
            const double resid2 = node.qr.residual_norm2();
            for (int i = 0; i < unknowns_; ++i) {
                if (node.member[i]) continue;
                if (params_.nonnegative && block_ == 1 && node.corr[i] <= 0.0) continue;
                const std::optional<double> g = gain(node, i);
                if (!g) continue;
                const double r2 = std::max(resid2 - *g, 0.0);
                const double score = -r2 / (2.0 * sys_.noise_var) + node.log_prior + odds_[i];
                out.push_back({score, static_cast<int>(p), i});
            }
        }
        return out;
    }

    std::optional<SearchNode> extend(const SearchNode& parent, int index) const {
        SearchNode child = parent;
        for (int b = 0; b < block_; ++b) {
            const RealVec r_old = child.qr.residual();
            std::optional<RealVec> q = child.qr.append(sys_.phi.col(index * block_ + b), sys_.y);
            if (!q) return std::nullopt;
            const double qr_dot = q->dot(r_old);
            const RealVec u = sys_.phi.transpose() * (*q);
            child.corr -= u * qr_dot;
            const long col = index * block_ + b;
            const long k = child.shift.rows();
            const RealVec last = u / u[col];
            const RealVec pivot = child.shift.col(col);
            child.shift.conservativeResize(k + 1, Eigen::NoChange);
            child.shift.topRows(k).noalias() -= pivot * last.transpose();
            child.shift.row(k) = last.transpose();
            if (block_ == 1) {
                child.gram -= u.cwiseAbs2();
            } else {
                for (int i = 0; i < unknowns_; ++i) {
                    const double a = u[2 * i];
                    const double c = u[2 * i + 1];
                    child.gram[3 * i] -= a * a;
                    child.gram[3 * i + 1] -= a * c;
                    child.gram[3 * i + 2] -= c * c;
                }
            }
        }
        const auto pos = std::upper_bound(child.sorted.begin(), child.sorted.end(), index) - child.sorted.begin();
        child.sorted.insert(child.sorted.begin() + pos, index);
        child.slot.insert(child.slot.begin() + pos, static_cast<int>(child.appended.size()));
        child.appended.push_back(index);
        child.member[index] = 1;
        child.coef = child.qr.solve();
        child.log_prior += odds_[index];
        child.score = -child.qr.residual_norm2() / (2.0 * sys_.noise_var) + child.log_prior;
        return child;
    }

    void record(const SearchNode& node, SparsePosterior& post) const {
        RealVec amps(node.coef.size());
        for (std::size_t s = 0; s < node.slot.size(); ++s) {
            amps.segment(static_cast<long>(s) * block_, block_) = node.coef.segment(static_cast<long>(node.slot[s]) * block_, block_);
        }
        post.supports.push_back(node.sorted);
        post.blue.push_back(std::move(amps));
        post.log_metric.push_back(node.score);
    }

    // Scored but not retained. The new amplitudes follow from the projected
    // statistics; the parent's amplitudes move along the matching columns of `shift`.
    void record_extension(const SearchNode& parent, int index, double score, SparsePosterior& post) const {
        const RealMat& shift = parent.shift;
        const int k = static_cast<int>(parent.coef.size());
        RealVec coeffs(k + block_);
        if (block_ == 1) {
            const double a = parent.corr[index] / parent.gram[index];
            coeffs[k] = a;
            if (k > 0) coeffs.head(k) = parent.coef - shift.col(index) * a;
        } else {
            const double g11 = parent.gram[3 * index];
            const double g12 = parent.gram[3 * index + 1];
            const double g22 = parent.gram[3 * index + 2];
            const double det = g11 * g22 - g12 * g12;
            const double b1 = parent.corr[2 * index];
            const double b2 = parent.corr[2 * index + 1];
            const double a1 = (g22 * b1 - g12 * b2) / det;
            const double a2 = (g11 * b2 - g12 * b1) / det;
            coeffs[k] = a1;
            coeffs[k + 1] = a2;
            if (k > 0) coeffs.head(k) = parent.coef - shift.col(2 * index) * a1 - shift.col(2 * index + 1) * a2;
        }
        const std::size_t pos =
            std::upper_bound(parent.sorted.begin(), parent.sorted.end(), index) - parent.sorted.begin();
        IndexSet sorted(parent.sorted.size() + 1);
        RealVec amps(coeffs.size());
        for (std::size_t s = 0, out = 0; s <= parent.sorted.size(); ++s, ++out) {
            if (s == pos) {
                sorted[out] = index;
                amps.segment(static_cast<long>(out) * block_, block_) = coeffs.segment(static_cast<long>(k), block_);
                ++out;
            }
            if (s == parent.sorted.size()) break;
            sorted[out] = parent.sorted[s];
            amps.segment(static_cast<long>(out) * block_, block_) =
                coeffs.segment(static_cast<long>(parent.slot[s]) * block_, block_);
        }
        post.supports.push_back(std::move(sorted));
        post.blue.push_back(std::move(amps));
        post.log_metric.push_back(score);
    }

    void collect(SparsePosterior& post, double best) const {
        SparsePosterior kept;
        kept.unknowns = post.unknowns;
        kept.block = post.block;
        kept.depth_reached = post.depth_reached;
        for (std::size_t s = 0; s < post.supports.size(); ++s) {
            if (post.log_metric[s] >= best - params_.window) {
                kept.supports.push_back(std::move(post.supports[s]));
                kept.blue.push_back(std::move(post.blue[s]));
                kept.log_metric.push_back(post.log_metric[s]);
            }
        }
        double total = 0.0;
        kept.weights.resize(kept.log_metric.size());
        for (std::size_t s = 0; s < kept.log_metric.size(); ++s) {
            kept.weights[s] = std::exp(kept.log_metric[s] - best);
            total += kept.weights[s];
        }
        for (double& w : kept.weights) w /= total;
        post = std::move(kept);
    }

    const MeasurementSystem& sys_;
    const SupportPrior& prior_;
    const SearchParams& params_;
    int block_;
    int unknowns_;
    RealVec odds_;
    RealVec col_norm2_;
    int depth_limit_;
};

RecoveryOutput finish(const MeasurementSystem& sys, const RealVec& coefficients, double threshold) {
    RecoveryOutput out;
    const int n = sys.unknowns();
    if (sys.kind == SystemKind::PhaseAugmented) {
        out.c_mag = coefficients.cwiseMax(0.0);
        out.c_hat.resize(n);
        for (int i = 0; i < n; ++i) out.c_hat[i] = std::polar(1.0, sys.theta[i]) * out.c_mag[i];
    } else {
        out.c_hat = to_complex(sys, coefficients);
        out.c_mag = out.c_hat.cwiseAbs();
    }
    const double peak = n > 0 ? out.c_mag.maxCoeff() : 0.0;
    if (peak > 0.0) {
        for (int i = 0; i < n; ++i) {
            if (out.c_mag[i] > threshold * peak) out.support_hat.push_back(i);
        }
    }
    return out;
}

double clamp_rate(double rate, int unknowns) {
    return std::clamp(rate, 1.0 / unknowns, 1.0 - SupportPrior::kClamp);
}

}  // namespace

SupportPrior SupportPrior::uniform(double rate, int unknowns) {
    SupportPrior prior;
    prior.rate = rate;
    prior.activation = RealVec::Constant(unknowns, std::clamp(rate, kClamp, 1.0 - kClamp));
    return prior;
}

SupportPrior SupportPrior::weighted(double rate, const RealVec& weights) {
    SupportPrior prior;
    prior.rate = rate;
    const long n = weights.size();
    prior.activation.resize(n);
    if (n == 0) return prior;
    // max_k e^{-w(k)} = e^{-min w}
    const double wmin = weights.minCoeff();
    for (long i = 0; i < n; ++i) {
        prior.activation[i] = std::clamp(rate * std::exp(-(weights[i] - wmin)), kClamp, 1.0 - kClamp);
    }
    return prior;
}

int SearchParams::depth_limit(double rate, int unknowns, int measurements, int block) const {
    int depth = max_depth > 0 ? max_depth
                              : std::max(4, static_cast<int>(std::ceil(2.0 * rate * unknowns - 1e-9)));
    depth = std::min(depth, measurements / block);
    depth = std::min(depth, unknowns);
    return std::max(depth, 0);
}

RealVec SparsePosterior::mean() const {
    RealVec out = RealVec::Zero(static_cast<long>(unknowns) * block);
    double* dst = out.data();
    for (std::size_t s = 0; s < supports.size(); ++s) {
        const double w = weights[s];
        const double* src = blue[s].data();
        for (std::size_t j = 0; j < supports[s].size(); ++j) {
            for (int b = 0; b < block; ++b) dst[supports[s][j] * block + b] += w * src[j * block + b];
        }
    }
    return out;
}

std::size_t SparsePosterior::best() const {
    return static_cast<std::size_t>(std::max_element(log_metric.begin(), log_metric.end()) - log_metric.begin());
}

std::optional<double> log_likelihood(const MeasurementSystem& sys, const IndexSet& support) {
    std::optional<IncrementalQr> qr = factor(sys, support);
    if (!qr) return std::nullopt;
    return -qr->residual_norm2() / (2.0 * sys.noise_var);
}

double log_prior(const SupportPrior& prior, const IndexSet& support) {
    const long n = prior.activation.size();
    std::vector<char> member(n, 0);
    for (int i : support) {
        if (i < 0 || i >= n) throw InputError("support index out of range");
        member[i] = 1;
    }
    double acc = 0.0;
    for (long i = 0; i < n; ++i) {
        acc += member[i] ? std::log(prior.activation[i]) : std::log1p(-prior.activation[i]);
    }
    return acc;
}

RealVec blue(const MeasurementSystem& sys, const IndexSet& support) {
    std::optional<IncrementalQr> qr = factor(sys, support);
    if (!qr) throw NumericError("BLUE: columns on the support are linearly dependent");
    return qr->solve();
}

SparsePosterior greedy_search(const MeasurementSystem& sys, const SupportPrior& prior, const SearchParams& params) {
    return GreedySearch(sys, prior, params).run();
}

RecoveryOutput recover(const MeasurementSystem& sys, const SupportPrior& prior, const SearchParams& params) {
    SparsePosterior post = greedy_search(sys, prior, params);
    RecoveryOutput out = finish(sys, post.mean(), params.support_threshold);
    out.rate = prior.rate;
    out.noise_var = sys.noise_var;
    out.posterior = std::move(post);
    return out;
}

RecoveryOutput refine(const MeasurementSystem& sys, const RefineStart& start, const SearchParams& params,
                      int max_iterations, bool weighted_prior) {
    if (max_iterations < 1) throw ConfigError("refine needs at least one iteration");
    const int n = sys.unknowns();
    const double noise_min = noise_floor(0.0) / 2.0;
    double rate = clamp_rate(start.rate, n);
    double noise = std::max(start.noise_var, noise_min);
    MeasurementSystem work = sys;
    RecoveryOutput out;
    for (int t = 1; t <= max_iterations; ++t) {
        work.noise_var = noise;
        const SupportPrior prior = weighted_prior ? SupportPrior::weighted(rate, sys.weights)
                                                  : SupportPrior::uniform(rate, n);
        out = recover(work, prior, params);
        out.iterations = t;

        const double next_rate = clamp_rate(static_cast<double>(out.support_hat.size()) / n, n);
        const RealVec coeffs = sys.kind == SystemKind::PhaseAugmented ? RealVec(out.c_mag) : out.posterior.mean();
        const double next_noise =
            std::max((sys.y - sys.phi * coeffs).squaredNorm() / static_cast<double>(sys.measurements()), noise_min);
        const bool converged = std::abs(next_rate - rate) / rate < 0.02;
        rate = next_rate;
        noise = next_noise;
        if (converged) break;
    }
    out.rate = rate;
    out.noise_var = noise;
    return out;
}

double initial_rate(const ComplexVec& phase_source, double gamma_hat) {
    const RealVec mag = phase_source.cwiseAbs();
    const double n = static_cast<double>(mag.size());
    const double mu = mag.mean();
    const double sigma = std::sqrt((mag.array() - mu).square().sum() / n);
    if (sigma == 0.0) return 0.5;
    const double z = (gamma_hat - mu) / sigma;
    return 0.5 * std::erfc(z / std::sqrt(2.0));
}

RecoveryOutput oracle_ls(const MeasurementSystem& sys, const IndexSet& true_support) {
    IndexSet sorted = true_support;
    std::sort(sorted.begin(), sorted.end());
    const int block = sys.block();
    RealVec coeffs = RealVec::Zero(static_cast<long>(sys.unknowns()) * block);
    if (!sorted.empty()) {
        const RealVec amps = blue(sys, sorted);
        for (std::size_t j = 0; j < sorted.size(); ++j) {
            coeffs.segment(static_cast<long>(sorted[j]) * block, block) = amps.segment(static_cast<long>(j) * block, block);
        }
    }
    RecoveryOutput out;
    out.c_hat = to_complex(sys, coeffs);
    out.c_mag = out.c_hat.cwiseAbs();
    out.support_hat = sorted;
    out.rate = static_cast<double>(sorted.size()) / sys.unknowns();
    out.noise_var = sys.noise_var;
    return out;
}

SystemKind system_kind(EngineMode mode) {
    return (mode == EngineMode::Wpa || mode == EngineMode::Unweighted) ? SystemKind::PhaseAugmented
                                                                       : SystemKind::Complex;
}

bool uses_weights(EngineMode mode) { return mode == EngineMode::Wpa || mode == EngineMode::NoPhase; }

RecoveryOutput ablation(const MeasurementSystem& sys, double rate, const SearchParams& params, EngineMode mode) {
    if (sys.kind != system_kind(mode)) throw ConfigError("measurement system kind does not match the engine mode");
    const SupportPrior prior = uses_weights(mode) ? SupportPrior::weighted(rate, sys.weights)
                                                  : SupportPrior::uniform(rate, sys.unknowns());
    return recover(sys, prior, params);
}

ComplexVec to_complex(const MeasurementSystem& sys, const RealVec& coefficients) {
    const int n = sys.unknowns();
    ComplexVec out(n);
    if (sys.kind == SystemKind::PhaseAugmented) {
        for (int i = 0; i < n; ++i) out[i] = std::polar(1.0, sys.theta[i]) * coefficients[i];
    } else {
        for (int i = 0; i < n; ++i) out[i] = Complex(coefficients[2 * i], coefficients[2 * i + 1]);
    }
    return out;
}

}  // namespace ofdmclip
