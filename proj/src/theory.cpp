#include "inril/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include <Eigen/Eigenvalues>

#include "inril/errors.hpp"
#include "inril/interleave.hpp"
#include "inril/random.hpp"

namespace inril::theory {

namespace {

double max_eigenvalue(const Mat& A) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double min_eigenvalue(const Mat& A) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double neg_cosine(const Vec& g_il, const Vec& g_rl) {
    const double n_il = g_il.norm();
    const double n_rl = g_rl.norm();
    if (n_il < 1e-12 || n_rl < 1e-12) return 0.0;
    return std::clamp(-g_il.dot(g_rl) / (n_il * n_rl), -1.0, 1.0);
}

void add_noise(Vec& g, double sigma, std::int64_t N, Rng& rng) {
    if (sigma == 0.0) return;
    const double s = sigma / std::sqrt(static_cast<double>(N));
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += s * standard_normal(rng);
}

double progress_factor(const TheoryConstants& c) {
    const double slack = (1.0 - c.delta) * (1.0 - c.delta);
    return c.c_rl * (1.0 - c.c_rl / 2.0) * slack;
}

}  // namespace

void QuadraticPair::validate() const {
    const auto n = b_rl.size();
    if (n < 1) throw ShapeError("quadratic pair: dimension must be >= 1");
    if (b_il.size() != n || A_rl.rows() != n || A_rl.cols() != n || A_il.rows() != n || A_il.cols() != n) {
        throw ShapeError("quadratic pair: inconsistent sizes");
    }
    for (const Mat* A : {&A_rl, &A_il}) {
        if ((*A - A->transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A->cwiseAbs().maxCoeff())) {
            throw ConfigError("quadratic pair: matrix is not symmetric");
        }
        if (!(min_eigenvalue(*A) > 0.0)) throw ConfigError("quadratic pair: matrix is not positive definite");
    }
    if (sigma_il < 0.0 || sigma_rl < 0.0) throw ConfigError("quadratic pair: noise std must be nonnegative");
    if (N_il < 1 || N_rl < 1) throw ConfigError("quadratic pair: batch sizes must be >= 1");
}

double QuadraticPair::loss_rl(const Vec& th) const {
    const Vec d = th - b_rl;
    return 0.5 * d.dot(A_rl * d);
}
double QuadraticPair::loss_il(const Vec& th) const {
    const Vec d = th - b_il;
    return 0.5 * d.dot(A_il * d);
}
Vec QuadraticPair::grad_rl(const Vec& th) const { return A_rl * (th - b_rl); }
Vec QuadraticPair::grad_il(const Vec& th) const { return A_il * (th - b_il); }
double QuadraticPair::L_rl() const { return max_eigenvalue(A_rl); }
double QuadraticPair::L_il() const { return max_eigenvalue(A_il); }
double QuadraticPair::sigma2_rl() const { return dim() * sigma_rl * sigma_rl; }
double QuadraticPair::sigma2_il() const { return dim() * sigma_il * sigma_il; }

Mat random_spd(int dim, double lo, double hi, std::uint64_t seed) {
    Rng rng(seed);
    Mat G(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) G(i, j) = standard_normal(rng);
    const Mat Q = Eigen::HouseholderQR<Mat>(G).householderQ();
    Vec lambda(dim);
    for (int i = 0; i < dim; ++i) lambda[i] = std::exp(uniform(rng, std::log(lo), std::log(hi)));
    Mat A = Q * lambda.asDiagonal() * Q.transpose();
    return 0.5 * (A + A.transpose());
}

TheoryConstants constants_for(const QuadraticPair& pair, double c_il, double c_rl) {
    TheoryConstants c;
    c.c_il = c_il;
    c.c_rl = c_rl;
    c.L_il = pair.L_il();
    c.L_rl = pair.L_rl();
    c.sigma2_il = pair.sigma2_il();
    c.sigma2_rl = pair.sigma2_rl();
    c.N_il = pair.N_il;
    c.N_rl = pair.N_rl;
    return c;
}

void check_constants(const QuadraticPair& pair, const TheoryConstants& c) {
    pair.validate();
    c.validate();
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); };
    if (!close(c.L_rl, pair.L_rl())) {
        throw ConfigError("L_RL = " + std::to_string(c.L_rl) + " does not match the largest eigenvalue " +
                          std::to_string(pair.L_rl()));
    }
    if (!close(c.L_il, pair.L_il())) {
        throw ConfigError("L_IL = " + std::to_string(c.L_il) + " does not match the largest eigenvalue " +
                          std::to_string(pair.L_il()));
    }
    if (!close(c.sigma2_rl, pair.sigma2_rl()) && !(c.sigma2_rl == 0.0 && pair.sigma2_rl() == 0.0)) {
        throw ConfigError("sigma2_RL does not match the pair's noise level");
    }
    if (!close(c.sigma2_il, pair.sigma2_il()) && !(c.sigma2_il == 0.0 && pair.sigma2_il() == 0.0)) {
        throw ConfigError("sigma2_IL does not match the pair's noise level");
    }
    if (c.N_il != pair.N_il || c.N_rl != pair.N_rl) throw ConfigError("batch sizes do not match the pair");
}

TraceLog run_schedule(const QuadraticPair& pair, const Schedule& schedule, std::int64_t T_cycles,
                      const TheoryConstants& consts, std::uint64_t seed, const Vec& theta0, const RunOptions& opts) {
    check_constants(pair, consts);
    if (theta0.size() != pair.b_rl.size()) throw ShapeError("run_schedule: theta0 has the wrong dimension");
    if (T_cycles < 0) throw UsageError("run_schedule: T_cycles must be >= 0");
    if (schedule.kind == Schedule::Kind::kInril && schedule.m < 1) throw ConfigError("run_schedule: m must be >= 1");

    const bool interleaved = schedule.kind != Schedule::Kind::kRlOnly;
    const bool track_il = interleaved || opts.track_il;
    Rng rng = make_rng(seed, Stream::kTheory);
    const double a_il = consts.alpha_il();
    const double a_rl = consts.alpha_rl();

    TraceLog trace;
    trace.schedule = schedule;
    trace.il_tracked = track_il;
    trace.theta0 = theta0;
    trace.cycles.reserve(static_cast<std::size_t>(T_cycles));
    Vec th = theta0;

    auto record = [&](bool is_il, std::int64_t cycle) {
        if (!opts.record_updates) return;
        UpdateRecord u;
        u.is_il = is_il;
        u.cycle = cycle;
        u.theta_after = th;
        u.loss_rl = pair.loss_rl(th);
        u.grad_rl_norm = pair.grad_rl(th).norm();
        if (track_il) {
            u.loss_il = pair.loss_il(th);
            u.grad_il_norm = pair.grad_il(th).norm();
        }
        trace.updates.push_back(std::move(u));
    };

    for (std::int64_t t = 0; t < T_cycles; ++t) {
        const Vec g_rl = pair.grad_rl(th);
        CycleSummary s;
        s.cycle = t;
        s.loss_rl = pair.loss_rl(th);
        s.grad_rl_norm = g_rl.norm();
        if (track_il) {
            const Vec g_il = pair.grad_il(th);
            s.loss_il = pair.loss_il(th);
            s.grad_il_norm = g_il.norm();
            s.rho = neg_cosine(g_il, g_rl);
        }
        switch (schedule.kind) {
            case Schedule::Kind::kRlOnly: s.m = 1; break;
            case Schedule::Kind::kInril: s.m = schedule.m; break;
            case Schedule::Kind::kAdaptive:
                s.m = adaptive_m_value(s.grad_rl_norm, s.grad_il_norm, s.rho, consts, 1, schedule.adaptive_cap);
                break;
        }
        if (interleaved) {
            Vec g = pair.grad_il(th);
            add_noise(g, pair.sigma_il, pair.N_il, rng);
            th -= a_il * g;
            record(true, t);
        }
        const double start_sq = s.grad_rl_norm * s.grad_rl_norm;
        for (int j = 0; j < s.m; ++j) {
            Vec g = pair.grad_rl(th);
            if (start_sq > 0.0) s.min_intermediate_ratio = std::min(s.min_intermediate_ratio, g.squaredNorm() / start_sq);
            add_noise(g, pair.sigma_rl, pair.N_rl, rng);
            th -= a_rl * g;
            record(false, t);
        }
        trace.cycles.push_back(s);
    }
    trace.theta_final = th;
    return trace;
}

double delta_il_rl(const TraceLog& trace, const TheoryConstants& consts, std::optional<std::int64_t> T) {
    if (!trace.il_tracked) throw UsageError("delta_il_rl: trace has no IL gradient norms or alignment");
    const std::int64_t n = T.value_or(static_cast<std::int64_t>(trace.cycles.size()));
    if (n < 0 || n > static_cast<std::int64_t>(trace.cycles.size())) {
        throw UsageError("delta_il_rl: trace has fewer than " + std::to_string(n) + " cycles");
    }
    double sum = 0.0;
    for (std::int64_t t = 0; t < n; ++t) {
        const CycleSummary& c = trace.cycles[static_cast<std::size_t>(t)];
        sum += consts.c_il * c.rho / consts.L_il * c.grad_il_norm * c.grad_rl_norm;
    }
    const double noise = consts.c_il * consts.c_il * consts.sigma2_il * static_cast<double>(n) /
                         (2.0 * consts.L_il * static_cast<double>(consts.N_il));
    return -sum - noise;
}

EfficiencyRatio efficiency_ratio(const TheoryConstants& consts, double m_bar, double delta, double L_rl_gap) {
    (void)consts;
    if (!(m_bar > 0.0)) throw DomainError("efficiency_ratio: m_bar must be positive");
    if (!(L_rl_gap - delta > 0.0)) {
        throw DomainError("efficiency_ratio: regularization benefit " + std::to_string(delta) +
                          " is not below the total gap " + std::to_string(L_rl_gap));
    }
    EfficiencyRatio r;
    r.beta = delta / L_rl_gap;
    r.ratio = (m_bar / (1.0 + m_bar)) * (L_rl_gap / (L_rl_gap - delta));
    return r;
}

double break_even_beta(double m_bar) { return 1.0 / (1.0 + m_bar); }

ConditionCheck check_theorem2_condition(const QuadraticPair& pair, const TraceLog& trace, const TheoryConstants& consts,
                                        int m) {
    ConditionCheck c;
    c.lhs = delta_il_rl(trace, consts);
    c.rhs = consts.L_rl * pair.loss_rl(trace.theta0) / (static_cast<double>(m) + 1.0);
    c.margin = c.lhs - c.rhs;
    c.holds = c.margin > 0.0;
    return c;
}

double noise_floor(const TheoryConstants& c) {
    return c.c_rl * c.sigma2_rl / ((1.0 - c.c_rl / 2.0) * static_cast<double>(c.N_rl));
}

std::vector<BoundCheck> check_rl_bound(const QuadraticPair& pair, const TraceLog& trace, const TheoryConstants& consts) {
    const double gap = pair.loss_rl(trace.theta0);
    std::vector<BoundCheck> out;
    double running = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trace.cycles.size(); ++t) {
        const double g = trace.cycles[t].grad_rl_norm;
        running = std::min(running, g * g);
        BoundCheck b;
        b.T = static_cast<std::int64_t>(t) + 1;
        b.lhs = running;
        b.rhs = 2.0 * consts.L_rl * gap / (progress_factor(consts) * static_cast<double>(b.T)) + noise_floor(consts);
        b.holds = b.lhs <= b.rhs;
        out.push_back(b);
    }
    return out;
}

std::vector<BoundCheck> check_inril_bound(const QuadraticPair& pair, const TraceLog& trace,
                                          const TheoryConstants& consts) {
    if (!trace.il_tracked) throw UsageError("check_inril_bound: trace has no IL measurements");
    const double gap = pair.loss_rl(trace.theta0);
    std::vector<BoundCheck> out;
    double running = std::numeric_limits<double>::infinity();
    double m_sum = 0.0;
    double rho_sum = 0.0;
    for (std::size_t t = 0; t < trace.cycles.size(); ++t) {
        const CycleSummary& c = trace.cycles[t];
        running = std::min(running, c.grad_rl_norm * c.grad_rl_norm);
        m_sum += c.m;
        rho_sum += consts.c_il * c.rho / consts.L_il * c.grad_il_norm * c.grad_rl_norm;
        BoundCheck b;
        b.T = static_cast<std::int64_t>(t) + 1;
        const double T = static_cast<double>(b.T);
        const double delta = -rho_sum - consts.c_il * consts.c_il * consts.sigma2_il * T /
                                            (2.0 * consts.L_il * static_cast<double>(consts.N_il));
        const double m_bar = m_sum / T;
        b.lhs = running;
        b.rhs = 2.0 * (consts.L_rl * gap - delta) / (progress_factor(consts) * m_bar * T) + noise_floor(consts);
        b.holds = b.lhs <= b.rhs;
        out.push_back(b);
    }
    return out;
}

double implied_delta(const TraceLog& trace) {
    double worst = 1.0;
    for (const CycleSummary& c : trace.cycles) worst = std::min(worst, c.min_intermediate_ratio);
    return std::max(0.0, 1.0 - std::sqrt(worst));
}

UpdateCounts empirical_update_counts(const QuadraticPair& pair, const TheoryConstants& consts, int m, double epsilon,
                                     std::uint64_t seed, const Vec& theta0, std::int64_t max_updates) {
    check_constants(pair, consts);
    if (m < 1) throw ConfigError("empirical_update_counts: m must be >= 1");
    const double floor = noise_floor(consts);
    if (!(epsilon > floor)) {
        throw BudgetExceededError("target " + std::to_string(epsilon) + " is not above the noise floor " +
                                  std::to_string(floor) + "; it cannot be guaranteed");
    }
    const double a_il = consts.alpha_il();
    const double a_rl = consts.alpha_rl();

    UpdateCounts out;
    {
        Rng rng = make_rng(seed, Stream::kTheory);
        Vec th = theta0;
        std::int64_t k = 0;
        while (pair.grad_rl(th).squaredNorm() > epsilon) {
            if (k >= max_updates) {
                throw BudgetExceededError("RL-only run did not reach the target within " + std::to_string(max_updates) +
                                          " updates");
            }
            Vec g = pair.grad_rl(th);
            add_noise(g, pair.sigma_rl, pair.N_rl, rng);
            th -= a_rl * g;
            ++k;
        }
        out.T_rl_only = k;
    }
    {
        Rng rng = make_rng(seed, Stream::kTheory);
        Vec th = theta0;
        std::int64_t cycles = 0;
        while (pair.grad_rl(th).squaredNorm() > epsilon) {
            if (cycles * (1 + m) >= max_updates) {
                throw BudgetExceededError("interleaved run did not reach the target within " +
                                          std::to_string(max_updates) + " updates");
            }
            Vec g = pair.grad_il(th);
            add_noise(g, pair.sigma_il, pair.N_il, rng);
            th -= a_il * g;
            for (int j = 0; j < m; ++j) {
                Vec h = pair.grad_rl(th);
                add_noise(h, pair.sigma_rl, pair.N_rl, rng);
                th -= a_rl * h;
            }
            ++cycles;
        }
        out.inril_cycles = cycles;
        out.T_inril_total = cycles * (1 + m);
    }
    return out;
}

double affine_fixed_point(double alpha, int m) {
    const double q = 1.0 - alpha;
    return (1.0 - std::pow(q, m)) / (1.0 - std::pow(q, m + 1));
}

double simulate_affine_cycles(double alpha, int m, int cycles) {
    double th = 0.0;
    for (int t = 0; t < cycles; ++t) {
        th -= alpha * th;  // IL target 0
        for (int j = 0; j < m; ++j) th -= alpha * (th - 1.0);  // RL target 1
    }
    return th;
}

double analytic_rho(const QuadraticPair& pair, const Vec& theta) {
    return neg_cosine(pair.grad_il(theta), pair.grad_rl(theta));
}

DoubleWellResult double_well_demo(int m, double alpha_rl, double alpha_il, int cycles) {
    auto loss = [](double x, double y) { return (x * x - 1.0) * (x * x - 1.0) + 0.3 * x + y * y; };
    auto rl_step = [&](double& x, double& y) {
        const double gx = 4.0 * x * (x * x - 1.0) + 0.3;
        const double gy = 2.0 * y;
        x -= alpha_rl * gx;
        y -= alpha_rl * gy;
    };
    DoubleWellResult r;
    double x = 1.0, y = 0.5;
    for (int k = 0; k < cycles * m; ++k) rl_step(x, y);
    r.final_x_rl_only = x;
    r.final_loss_rl_only = loss(x, y);
    x = 1.0;
    y = 0.5;
    for (int t = 0; t < cycles; ++t) {
        x -= alpha_il * (x + 1.0);
        y -= alpha_il * y;
        for (int j = 0; j < m; ++j) rl_step(x, y);
    }
    r.final_x_inril = x;
    r.final_loss_inril = loss(x, y);
    return r;
}

// ------------------------------------------------------------ instances

RandomInstance random_instance(std::uint64_t seed, bool noisy) {
    Rng rng = make_rng(seed, Stream::kTheory, 1);
    RandomInstance inst;
    const int dim = 2 + static_cast<int>(uniform_index(rng, 7));
    QuadraticPair& p = inst.pair;
    p.A_rl = random_spd(dim, 0.05, 5.0, rng());
    p.A_il = random_spd(dim, 0.05, 5.0, rng());
    p.b_rl = Vec(dim);
    p.b_il = Vec(dim);
    inst.theta0 = Vec(dim);
    for (int i = 0; i < dim; ++i) {
        p.b_rl[i] = standard_normal(rng);
        p.b_il[i] = standard_normal(rng);
    }
    // Warm start near the IL optimum (small pretraining gap).
    for (int i = 0; i < dim; ++i) inst.theta0[i] = p.b_il[i] + 0.3 * standard_normal(rng);
    if (noisy) {
        p.sigma_il = uniform(rng, 0.05, 0.5);
        p.sigma_rl = uniform(rng, 0.05, 0.5);
        static constexpr std::int64_t kBatches[] = {1, 4, 16};
        p.N_il = kBatches[uniform_index(rng, 3)];
        p.N_rl = kBatches[uniform_index(rng, 3)];
    }
    static constexpr int kMs[] = {1, 2, 3, 5, 10};
    inst.m = kMs[uniform_index(rng, 5)];
    inst.consts = constants_for(p, uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9));
    inst.consts.eps_il = p.loss_il(inst.theta0);
    return inst;
}

RandomInstance aligned_instance(std::uint64_t seed, bool noisy) {
    Rng rng = make_rng(seed, Stream::kTheory, 2);
    RandomInstance inst;
    const int dim = 5;
    QuadraticPair& p = inst.pair;
    p.A_rl = random_spd(dim, 0.01, 1.0, rng());
    p.A_il = Mat::Identity(dim, dim);
    p.b_rl = Vec(dim);
    inst.theta0 = Vec(dim);
    for (int i = 0; i < dim; ++i) {
        p.b_rl[i] = standard_normal(rng);
        inst.theta0[i] = p.b_rl[i] + 2.0 * standard_normal(rng);
    }
    p.b_il = p.b_rl;
    if (noisy) {
        p.sigma_il = 0.01;
        p.sigma_rl = 0.01;
        p.N_il = 4;
        p.N_rl = 4;
    }
    inst.m = 3;
    inst.consts = constants_for(p, 0.5, 0.5);
    return inst;
}

RandomInstance zero_benefit_instance(std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::kTheory, 3);
    RandomInstance inst;
    const int half = 3;
    const int dim = 2 * half;
    QuadraticPair& p = inst.pair;
    p.A_rl = Mat::Zero(dim, dim);
    p.A_rl.topLeftCorner(half, half) = random_spd(half, 0.05, 1.0, rng());
    p.A_rl.bottomRightCorner(half, half) = Mat::Identity(half, half);
    p.A_il = Mat::Zero(dim, dim);
    p.A_il.topLeftCorner(half, half) = 1e-6 * Mat::Identity(half, half);
    p.A_il.bottomRightCorner(half, half) = Mat::Identity(half, half);
    p.b_rl = Vec(dim);
    p.b_il = Vec::Zero(dim);
    inst.theta0 = Vec(dim);
    for (int i = 0; i < dim; ++i) p.b_rl[i] = standard_normal(rng);
    for (int i = 0; i < half; ++i) inst.theta0[i] = p.b_rl[i] + 2.0 * standard_normal(rng);
    // The RL-stiff block starts at its RL optimum; the IL-stiff block's target is θ₀ there.
    for (int i = half; i < dim; ++i) {
        inst.theta0[i] = p.b_rl[i];
        p.b_il[i] = inst.theta0[i];
    }
    inst.m = 3;
    inst.consts = constants_for(p, 0.5, 0.5);
    return inst;
}

BoundFamilyResult check_bound_family(std::uint64_t seed, int runs, std::int64_t T, double l_scale) {
    BoundFamilyResult r;
    r.worst_rl_margin = std::numeric_limits<double>::infinity();
    r.worst_inril_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < runs; ++i) {
        const bool noisy = i % 2 == 1;
        RandomInstance inst = random_instance(derive_seed(seed, Stream::kTheory, static_cast<std::uint64_t>(i)), noisy);
        inst.consts.L_rl *= l_scale;
        inst.consts.L_il *= l_scale;
        const std::uint64_t run_seed = derive_seed(seed, Stream::kTheory, 1000 + static_cast<std::uint64_t>(i));
        RunOptions opts;
        opts.record_updates = false;
        const TraceLog rl = run_schedule(inst.pair, Schedule::rl_only(), T, inst.consts, run_seed, inst.theta0, opts);
        for (const BoundCheck& b : check_rl_bound(inst.pair, rl, inst.consts)) {
            r.worst_rl_margin = std::min(r.worst_rl_margin, b.rhs - b.lhs);
            if (!b.holds) {
                ++r.rl_violations;
                break;
            }
        }
        const TraceLog in =
            run_schedule(inst.pair, Schedule::inril(inst.m), T, inst.consts, run_seed, inst.theta0, opts);
        for (const BoundCheck& b : check_inril_bound(inst.pair, in, inst.consts)) {
            r.worst_inril_margin = std::min(r.worst_inril_margin, b.rhs - b.lhs);
            if (!b.holds) {
                ++r.inril_violations;
                break;
            }
        }
        ++r.runs;
    }
    return r;
}

}  // namespace inril::theory

namespace inril::theory {

namespace {

CheckRecord make_record(std::string name, double lhs, double rhs, bool pass, double margin, std::string detail = {}) {
    return CheckRecord{std::move(name), lhs, rhs, pass, margin, std::move(detail)};
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::vector<CheckRecord> run_suite(const SuiteOptions& opts) {
    std::vector<CheckRecord> out;
    auto guarded = [&](const std::string& name, const std::function<void()>& body) {
        try {
            body();
        } catch (const std::exception& e) {
            out.push_back(make_record(name, 0.0, 0.0, false, 0.0, std::string("error: ") + e.what()));
        }
    };

    // Supplied constants must match the instance they describe.
    guarded("constants_consistent", [&] {
        RandomInstance inst = random_instance(derive_seed(opts.seed, Stream::kTheory, 0), false);
        TheoryConstants c = inst.consts;
        c.L_rl *= opts.l_scale;
        c.L_il *= opts.l_scale;
        check_constants(inst.pair, c);
        out.push_back(make_record("constants_consistent", c.L_rl, inst.pair.L_rl(), true, 0.0));
    });

    for (double alpha : {0.1, 0.3, 0.5}) {
        for (int m : {1, 2, 5, 10}) {
            const std::string name = "fixed_point alpha=" + fmt(alpha) + " m=" + std::to_string(m);
            const double sim = simulate_affine_cycles(alpha, m, 5000);
            const double closed = affine_fixed_point(alpha, m);
            const double err = std::abs(sim - closed);
            out.push_back(make_record(name, sim, closed, err <= 1e-9, 1e-9 - err));
        }
    }

    guarded("bound_rl_only", [&] {
        const BoundFamilyResult r = check_bound_family(opts.seed, opts.bound_runs, opts.bound_T, opts.l_scale);
        out.push_back(make_record("bound_rl_only", r.rl_violations, 0.0, r.rl_violations == 0, r.worst_rl_margin,
                                  std::to_string(r.rl_violations) + "/" + std::to_string(r.runs) +
                                      " runs violate; margin = min(rhs - lhs)"));
        out.push_back(make_record("bound_interleaved", r.inril_violations, 0.0, r.inril_violations == 0,
                                  r.worst_inril_margin,
                                  std::to_string(r.inril_violations) + "/" + std::to_string(r.runs) +
                                      " runs violate; margin = min(rhs - lhs)"));
    });

    {
        const TheoryConstants c;
        const EfficiencyRatio r3 = efficiency_ratio(c, 3.0, 0.25, 1.0);
        out.push_back(make_record("break_even m=3 beta=1/4", r3.ratio, 1.0, std::abs(r3.ratio - 1.0) <= 1e-12,
                                  1e-12 - std::abs(r3.ratio - 1.0)));
        const EfficiencyRatio r4 = efficiency_ratio(c, 4.0, 0.2, 1.0);
        out.push_back(make_record("break_even m=4 beta=1/5", r4.ratio, 1.0, std::abs(r4.ratio - 1.0) <= 1e-12,
                                  1e-12 - std::abs(r4.ratio - 1.0)));
        double worst = 0.0;
        for (double m : {1.0, 2.0, 3.0, 5.0, 10.0, 100.0}) worst = std::max(worst, efficiency_ratio(c, m, 0.0, 1.0).ratio);
        out.push_back(make_record("ratio_below_one_without_benefit", worst, 1.0, worst < 1.0, 1.0 - worst));
        bool monotone = true;
        for (double beta = 0.0; beta < 0.9; beta += 0.1) {
            double prev = 0.0;
            for (double m = 1.0; m <= 20.0; m += 1.0) {
                const double r = efficiency_ratio(c, m, beta, 1.0).ratio;
                monotone = monotone && r > prev;
                prev = r;
            }
        }
        for (double m = 1.0; m <= 20.0; m += 1.0) {
            double prev = 0.0;
            for (double beta = 0.0; beta < 0.9; beta += 0.1) {
                const double r = efficiency_ratio(c, m, beta, 1.0).ratio;
                monotone = monotone && r > prev;
                prev = r;
            }
        }
        out.push_back(make_record("ratio_monotone", monotone, 1.0, monotone, 0.0));
    }

    guarded("paired_aligned", [&] {
        int wins = 0;
        int condition = 0;
        double worst_margin = std::numeric_limits<double>::infinity();
        for (int s = 0; s < opts.paired_seeds; ++s) {
            RandomInstance inst = aligned_instance(derive_seed(opts.seed, Stream::kTheory, 2000 + s), true);
            inst.consts.L_rl *= opts.l_scale;
            inst.consts.L_il *= opts.l_scale;
            const double g0 = inst.pair.grad_rl(inst.theta0).squaredNorm();
            const double eps = std::max(1e-4 * g0, 10.0 * noise_floor(inst.consts));
            const std::uint64_t run_seed = derive_seed(opts.seed, Stream::kTheory, 3000 + s);
            const UpdateCounts uc = empirical_update_counts(inst.pair, inst.consts, inst.m, eps, run_seed, inst.theta0);
            RunOptions ro;
            ro.record_updates = false;
            const TraceLog tr = run_schedule(inst.pair, Schedule::inril(inst.m), uc.inril_cycles, inst.consts, run_seed,
                                             inst.theta0, ro);
            const ConditionCheck cc = check_theorem2_condition(inst.pair, tr, inst.consts, inst.m);
            worst_margin = std::min(worst_margin, cc.margin);
            if (cc.holds) ++condition;
            if (cc.holds && uc.T_inril_total < uc.T_rl_only) ++wins;
        }
        const int need = (9 * opts.paired_seeds + 9) / 10;
        out.push_back(make_record("paired_aligned_fewer_updates", wins, need, wins >= need, wins - need,
                                  std::to_string(condition) + "/" + std::to_string(opts.paired_seeds) +
                                      " seeds satisfy the condition; worst condition margin " + fmt(worst_margin)));
    });

    guarded("overhead_without_benefit", [&] {
        double worst = 0.0;
        for (int s = 0; s < 5; ++s) {
            RandomInstance inst = zero_benefit_instance(derive_seed(opts.seed, Stream::kTheory, 4000 + s));
            inst.consts.L_rl *= opts.l_scale;
            inst.consts.L_il *= opts.l_scale;
            const double g0 = inst.pair.grad_rl(inst.theta0).squaredNorm();
            const UpdateCounts uc =
                empirical_update_counts(inst.pair, inst.consts, inst.m, 1e-8 * g0, 0, inst.theta0);
            const double expected = (1.0 + inst.m) / inst.m * static_cast<double>(uc.T_rl_only);
            worst = std::max(worst, std::abs(static_cast<double>(uc.T_inril_total) / expected - 1.0));
        }
        out.push_back(make_record("overhead_without_benefit", worst, 0.1, worst <= 0.1, 0.1 - worst,
                                  "max relative deviation of T_inril from (1+m)/m T_rl"));
    });

    guarded("noise_floor_detection", [&] {
        RandomInstance inst = aligned_instance(derive_seed(opts.seed, Stream::kTheory, 5000), true);
        inst.consts.L_rl *= opts.l_scale;
        inst.consts.L_il *= opts.l_scale;
        const double floor = noise_floor(inst.consts);
        bool raised = false;
        try {
            empirical_update_counts(inst.pair, inst.consts, inst.m, 0.5 * floor, 0, inst.theta0);
        } catch (const BudgetExceededError&) {
            raised = true;
        }
        out.push_back(make_record("noise_floor_detection", 0.5 * floor, floor, raised, 0.0));
    });

    guarded("rho_matches_gradients", [&] {
        RandomInstance inst = random_instance(derive_seed(opts.seed, Stream::kTheory, 6000), false);
        inst.consts.L_rl *= opts.l_scale;
        inst.consts.L_il *= opts.l_scale;
        const TraceLog tr = run_schedule(inst.pair, Schedule::inril(inst.m), 50, inst.consts, 0, inst.theta0);
        double worst = 0.0;
        Vec th = inst.theta0;
        std::size_t u = 0;
        for (const CycleSummary& c : tr.cycles) {
            const Vec gi = inst.pair.grad_il(th);
            const Vec gr = inst.pair.grad_rl(th);
            const double cosine = gi.dot(gr) / (gi.norm() * gr.norm());
            worst = std::max(worst, std::abs(c.rho + cosine));
            u += static_cast<std::size_t>(c.m) + 1;
            th = tr.updates[u - 1].theta_after;
        }
        out.push_back(make_record("rho_matches_gradients", worst, 1e-10, worst <= 1e-10, 1e-10 - worst));
    });

    guarded("implied_delta", [&] {
        RandomInstance inst = random_instance(derive_seed(opts.seed, Stream::kTheory, 7000), false);
        inst.consts.L_rl *= opts.l_scale;
        inst.consts.L_il *= opts.l_scale;
        RunOptions ro;
        ro.record_updates = false;
        const TraceLog tr = run_schedule(inst.pair, Schedule::inril(inst.m), opts.bound_T, inst.consts, 0,
                                         inst.theta0, ro);
        const double d = implied_delta(tr);
        out.push_back(make_record("implied_delta", d, 1.0, d >= 0.0 && d <= 1.0, 1.0 - d,
                                  "measured intermediate-step slack (reported, not assumed)"));
    });

    {
        const DoubleWellResult dw = double_well_demo(5, 0.05, 0.5, 200);
        const bool escaped = dw.final_x_rl_only > 0.0 && dw.final_x_inril < 0.0;
        out.push_back(make_record("double_well_escape", dw.final_loss_inril, dw.final_loss_rl_only, escaped,
                                  dw.final_loss_rl_only - dw.final_loss_inril,
                                  "qualitative; x_rl_only=" + fmt(dw.final_x_rl_only) + " x_inril=" +
                                      fmt(dw.final_x_inril)));
    }
    return out;
}

}  // namespace inril::theory
