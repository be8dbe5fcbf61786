#include "closedobs/validate.hpp"

#include "closedobs/error.hpp"
#include "closedobs/generators.hpp"
#include "closedobs/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace closedobs {

using Eigen::VectorXd;

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        throw Error(ErrorCode::invalid_argument, "storage count overflows 64 bits");
    return a * b;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    if (b > std::numeric_limits<std::uint64_t>::max() - a)
        throw Error(ErrorCode::invalid_argument, "storage count overflows 64 bits");
    return a + b;
}

std::uint64_t checked_pow(std::uint64_t base, std::uint64_t e) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < e; ++i) r = checked_mul(r, base);
    return r;
}

} // namespace

StorageAccount storage_account(std::uint64_t d, std::uint64_t m, std::uint64_t n0, std::uint64_t N) {
    if (!d || !m || !n0 || !N) throw Error(ErrorCode::invalid_argument, "storage_account needs positive d, m, n0, N");
    StorageAccount s{d, m, n0, N};
    s.new_model_nodes = checked_add(checked_mul(d + m, checked_pow(N, d)), checked_mul(d, checked_pow(N, n0)));
    s.naive_nodes = checked_mul(m, checked_pow(N, n0 + 1));
    s.ratio = static_cast<double>(s.naive_nodes) / static_cast<double>(s.new_model_nodes);
    s.reduction_holds = d < n0 + 1;
    return s;
}

std::vector<std::vector<double>> full_grid(std::size_t p, std::size_t N) {
    if (p == 0 || N == 0) return {};
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> idx(p, 0);
    const double h = N > 1 ? 1.0 / static_cast<double>(N - 1) : 0.0;
    while (true) {
        std::vector<double> node(p);
        for (std::size_t a = 0; a < p; ++a) node[a] = static_cast<double>(idx[a]) * h;
        out.push_back(std::move(node));
        std::size_t a = 0;
        while (a < p && ++idx[a] == N) idx[a++] = 0;
        if (a == p) break;
    }
    return out;
}

// ---------------------------------------------------------------------------

BoundAudit bound_audit(const BoundAuditConfig &cfg) {
    if (!(cfg.M > 0.0 && cfg.M < 1.0)) throw Error(ErrorCode::invalid_argument, "contraction bound M must lie in (0,1)");
    if (cfg.e_G < 0.0 || cfg.e_phi < 0.0 || cfg.e_y < 0.0)
        throw Error(ErrorCode::invalid_argument, "injected error magnitudes must be nonnegative");
    if (cfg.trials < 1) throw Error(ErrorCode::invalid_argument, "bound audit needs at least one trial");

    struct Profile {
        double amp, freq, phase;
        bool constant;
        double operator()(double x) const { return constant ? amp : amp * std::sin(freq * x + phase); }
    };
    struct Trial {
        double a;
        Profile G, phi, y;
    };
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0), freq(0.5, 5.0),
        phase(0.0, 2.0 * std::numbers::pi);
    std::vector<Trial> trials(cfg.trials);
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        if (t == 0) {
            // Worst case: every error has the same sign and full magnitude.
            trials[t] = {1.0, {cfg.e_G, 0, 0, true}, {cfg.e_phi, 0, 0, true}, {cfg.e_y, 0, 0, true}};
        } else {
            const double a = unit(rng);
            trials[t] = {a, {cfg.e_G, freq(rng), phase(rng), false}, {cfg.e_phi, freq(rng), phase(rng), false},
                         {cfg.e_y, freq(rng), phase(rng), false}};
        }
    }

    const std::size_t n_max = cfg.n_max;
    // Maximum deviation per n with a chosen subset of errors switched on.
    auto run = [&](bool g, bool p, bool y) {
        std::vector<double> dev(n_max + 1, 0.0);
        for (const Trial &tr : trials) {
            double exact = tr.a;
            double phi = tr.a + (p ? tr.phi(tr.a) : 0.0);
            for (std::size_t n = 0; n <= n_max; ++n) {
                const double out = phi + (y ? tr.y(phi) : 0.0);
                dev[n] = std::max(dev[n], std::abs(out - exact));
                exact = cfg.M * exact;
                phi = cfg.M * phi + (g ? tr.G(phi) : 0.0);
            }
        }
        return dev;
    };
    auto geometric = [&](std::size_t n) { return (1.0 - std::pow(cfg.M, static_cast<double>(n + 1))) / (1.0 - cfg.M); };

    BoundAudit out;
    out.config = cfg;
    auto fit = [&](const std::vector<double> &dev, auto &&shape, double mag) {
        double c = 1.0;
        if (mag > 0.0)
            for (std::size_t n = 0; n <= n_max; ++n) c = std::max(c, dev[n] / (shape(n) * mag));
        return c;
    };
    out.C1 = fit(run(true, false, false), geometric, cfg.e_G);
    out.C2 = fit(run(false, true, false), [&](std::size_t n) { return std::pow(cfg.M, static_cast<double>(n)); }, cfg.e_phi);
    out.C3 = fit(run(false, false, true), [](std::size_t) { return 1.0; }, cfg.e_y);

    out.observed = run(true, true, true);
    out.bound.resize(n_max + 1);
    bool holds = true;
    for (std::size_t n = 0; n <= n_max; ++n) {
        out.bound[n] = out.C1 * geometric(n) * cfg.e_G + out.C2 * std::pow(cfg.M, static_cast<double>(n)) * cfg.e_phi +
                       out.C3 * cfg.e_y;
        holds = holds && out.observed[n] <= out.bound[n] * (1.0 + 1e-12) + 1e-15;
    }
    out.satisfied = holds && out.C1 <= 10.0 && out.C2 <= 10.0 && out.C3 <= 10.0;
    return out;
}

// ---------------------------------------------------------------------------

double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i)
        if (x[i] > 0.0 && y[i] > 0.0 && std::isfinite(x[i]) && std::isfinite(y[i]))
            pts.emplace_back(std::log(x[i]), std::log(y[i]));
    if (pts.size() < 3)
        throw Error(ErrorCode::degenerate_fit, "log-log fit needs at least 3 finite positive points");
    double mx = 0, my = 0;
    for (auto [a, b] : pts) mx += a, my += b;
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0, sxx = 0;
    for (auto [a, b] : pts) sxy += (a - mx) * (b - my), sxx += (a - mx) * (a - mx);
    if (sxx <= 0.0) throw Error(ErrorCode::degenerate_fit, "log-log fit needs distinct abscissae");
    return sxy / sxx;
}

ConvergenceConfig default_convergence_config() {
    ConvergenceConfig c;
    InterpSpec rbf;
    rbf.method = InterpMethod::rbf_gaussian;
    rbf.shape = 1.25;
    rbf.ridge = 1e-12;
    rbf.local_width = true;
    c.model.input_interp = rbf;
    c.model.dynamic_interp = rbf;
    c.model.observer_interp = rbf;
    return c;
}

ConvergenceResult convergence_study(const ConvergenceConfig &cfg) {
    if (cfg.step_counts.size() < 3) throw Error(ErrorCode::invalid_argument, "convergence study needs >= 3 step counts");
    if (cfg.samples < 1) throw Error(ErrorCode::invalid_argument, "convergence study needs >= 1 sample");
    if (!(cfg.y_lo > 0.0) || !(cfg.y_hi > cfg.y_lo) || !(cfg.margin >= 0.0) || !(cfg.t_final > 0.0))
        throw Error(ErrorCode::invalid_argument, "convergence study needs 0 < y_lo < y_hi, margin >= 0, t_final > 0");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> ydist(cfg.y_lo, cfg.y_hi);
    std::vector<double> ys(cfg.samples);
    for (double &y : ys) y = ydist(rng);

    ConvergenceResult out;
    for (Scheme scheme : cfg.schemes) {
        std::vector<double> dts, errs;
        for (std::size_t steps : cfg.step_counts) {
            const double dt = cfg.t_final / static_cast<double>(steps);
            ModelConfig mc = cfg.model;
            mc.scheme = scheme;
            SpiralConfig sc;
            sc.dt = dt;
            // Training starts lie on the geometric lattice y_top e^{-j dt}, so every
            // run samples the same radii and the delay vectors merge into one chain.
            // Runs extend T-1 steps past t_final so delay vectors exist up to t_final.
            const double y_top = cfg.y_hi * (1.0 + cfg.margin), y_bottom = cfg.y_lo / (1.0 + cfg.margin);
            sc.t_end = cfg.t_final + std::log1p(cfg.margin) + static_cast<double>(mc.T - 1) * dt;
            for (std::size_t j = 0;; ++j) {
                const double y = y_top * std::exp(-static_cast<double>(j) * dt);
                if (y < y_bottom) break;
                sc.initial_points.push_back({0.0, y});
            }
            const NumericalModel model = build_model(gen_spiral(sc), mc);

            std::vector<double> worst(ys.size(), 0.0);
            parallel_for(ys.size(), [&](std::size_t s) {
                const SimulationResult sim = simulate(model, {0.0, ys[s]}, steps, cfg.integrator);
                for (std::size_t k = 0; k <= steps; ++k) {
                    const double truth = ys[s] * std::exp(-static_cast<double>(k) * dt);
                    worst[s] = std::max(worst[s], std::abs(sim.observations[k](0) - truth) / truth);
                }
            });
            ConvergencePoint p{scheme, steps, dt, *std::max_element(worst.begin(), worst.end()), model.d};
            out.points.push_back(p);
            dts.push_back(dt);
            errs.push_back(p.max_error);
        }
        out.slope[scheme] = loglog_slope(dts, errs);
    }
    return out;
}

// ---------------------------------------------------------------------------

double relative_error(const VectorXd &observed, const VectorXd &predicted) {
    if (observed.size() != predicted.size())
        throw Error(ErrorCode::invalid_argument, "relative_error: dimension mismatch");
    const double num = observed.size() ? (observed - predicted).cwiseAbs().maxCoeff() : 0.0;
    const double den = observed.size() ? observed.cwiseAbs().maxCoeff() : 0.0;
    if (num == 0.0) return 0.0;
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

HoldoutResult holdout_error(const NumericalModel &model, const TrajectoryBundle &truth, std::size_t exclude_tail,
                            Integrator integrator) {
    truth.validate();
    if (truth.n0 != model.n0 || truth.m != model.m)
        throw Error(ErrorCode::invalid_argument,
                    "truth bundle has n0=" + std::to_string(truth.n0) + ", m=" + std::to_string(truth.m) +
                        " but the model expects n0=" + std::to_string(model.n0) + ", m=" + std::to_string(model.m));
    HoldoutResult out;
    out.series.resize(truth.trajectories.size());
    out.max_error.resize(truth.trajectories.size(), 0.0);
    std::vector<std::size_t> extrap(truth.trajectories.size(), 0);
    parallel_for(truth.trajectories.size(), [&](std::size_t i) {
        const Trajectory &tr = truth.trajectories[i];
        if (tr.length() <= exclude_tail) return;
        const std::size_t compared = tr.length() - exclude_tail;
        const SimulationResult sim = simulate(model, tr.input, compared - 1, integrator);
        for (std::size_t k = 0; k < compared; ++k) {
            const VectorXd obs = Eigen::Map<const VectorXd>(tr.observations[k].data(),
                                                            static_cast<Eigen::Index>(truth.m));
            const double e = relative_error(obs, sim.observations[k]);
            out.series[i].push_back(e);
            out.max_error[i] = std::max(out.max_error[i], e);
        }
        extrap[i] = sim.extrapolated_steps();
    });
    for (std::size_t i = 0; i < truth.trajectories.size(); ++i) {
        out.overall_max = std::max(out.overall_max, out.max_error[i]);
        out.extrapolated_steps += extrap[i];
    }
    return out;
}

HoldoutResult training_reproduction(const NumericalModel &model, const TrajectoryBundle &training) {
    return holdout_error(model, training, model.T);
}

// ---------------------------------------------------------------------------

double exit_chance(const std::vector<double> &train_counts, double N_T0, std::size_t n) {
    if (!(N_T0 > 0.0)) throw Error(ErrorCode::invalid_argument, "exit chance needs N_T0 > 0");
    if (train_counts.empty()) throw Error(ErrorCode::invalid_argument, "empty train count series");
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t <= n && t < train_counts.size(); ++t)
        lowest = std::min(lowest, std::max(train_counts[t], 0.0));
    return 1.0 - lowest / N_T0;
}

double EgressAnalysis::monotonicity_violation(std::size_t h) const {
    double worst = 0.0;
    for (std::size_t a = 0; a < points.size(); ++a)
        for (std::size_t b = 0; b < points.size(); ++b)
            if (points[a].N_T0 == points[b].N_T0 && points[b].N_P0 > points[a].N_P0)
                worst = std::max(worst, points[b].chance[h] - points[a].chance[h]);
    return worst;
}

EgressAnalysis egress_analysis(const NumericalModel &model, const EgressAnalysisConfig &cfg) {
    if (model.n0 != 2 || model.m != 2)
        throw Error(ErrorCode::invalid_argument, "egress analysis needs a model with inputs and outputs (N_T, N_P)");
    if (cfg.horizons.empty()) throw Error(ErrorCode::invalid_argument, "no horizons given");
    for (double v : cfg.N_T0_grid)
        if (!(v > 0.0)) throw Error(ErrorCode::invalid_argument, "N_T0 = 0 must be excluded from the analysis grid");
    const std::size_t steps = static_cast<std::size_t>(
        std::ceil(static_cast<double>(*std::max_element(cfg.horizons.begin(), cfg.horizons.end())) / model.dt));

    EgressAnalysis out;
    out.horizons = cfg.horizons;
    for (double nt : cfg.N_T0_grid)
        for (double np : cfg.N_P0_grid) out.points.push_back({nt, np, {}, false, 0.0});
    parallel_for(out.points.size(), [&](std::size_t i) {
        ChancePoint &p = out.points[i];
        const SimulationResult sim = simulate(model, {p.N_T0, p.N_P0}, steps);
        std::vector<double> nt(sim.observations.size());
        for (std::size_t k = 0; k < nt.size(); ++k) {
            nt[k] = sim.observations[k](0);
            p.clamped = p.clamped || nt[k] < 0.0;
            p.conservation_error = std::max(p.conservation_error,
                                            std::abs(sim.observations[k](0) + sim.observations[k](1) - p.N_T0 - p.N_P0));
        }
        for (std::size_t h : cfg.horizons)
            p.chance.push_back(exit_chance(nt, p.N_T0, static_cast<std::size_t>(std::llround(static_cast<double>(h) / model.dt))));
    });
    for (const auto &p : out.points) {
        out.clamped_count += p.clamped;
        out.max_conservation_error = std::max(out.max_conservation_error, p.conservation_error);
    }
    return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

// ---------------------------------------------------------------------------

PdeStudy reference_pde_study() {
    PdeStudy s;
    s.generator.dt = 0.005;
    s.generator.t_end = 0.15;
    s.model.T = 5;
    s.model.dmaps.kernel.median_factor = 2.0;
    s.model.input_interp.method = InterpMethod::rbf_gaussian;
    return s;
}

ModelConfig reference_egress_model() {
    ModelConfig m;
    m.T = 15;
    m.dmaps.kernel.median_factor = 8.0;
    m.dmaps.truncation.resolution = 0.02;
    InterpSpec phs;
    phs.method = InterpMethod::polyharmonic;
    phs.standardize = true;
    phs.order = 1;
    m.dynamic_interp = phs;
    m.observer_interp = phs;
    phs.order = 2;
    m.input_interp = phs;
    return m;
}

EgressAnalysisConfig reference_egress_analysis() {
    EgressAnalysisConfig c;
    c.N_T0_grid = linspace(10.0, 50.0, 20);
    c.N_P0_grid = linspace(0.0, 200.0, 20);
    return c;
}

} // namespace closedobs
