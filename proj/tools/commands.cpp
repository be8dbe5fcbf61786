#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace cli {

using namespace closedobs;
namespace fs = std::filesystem;

namespace {

template <class T> void set_if(const std::optional<T> &flag, T &field) {
    if (flag) field = *flag;
}

PruningRule pruning_from(const std::string &s) {
    if (s == "neighbor_injectivity") return PruningRule::neighbor_injectivity;
    if (s == "local_regression") return PruningRule::local_regression;
    throw Error(ErrorCode::invalid_argument, "unknown pruning rule '" + s + "'");
}

void add_interp(CLI::App &app, InterpFlags &f, const std::string &prefix, const std::string &what) {
    app.add_option("--" + prefix + "-method", f.method, "Method for " + what + ": nearest|shepard|rbf_gaussian|polyharmonic");
    app.add_option("--" + prefix + "-k", f.k, "Shepard neighbours for " + what + " (0 = 2(p+1))");
    app.add_option("--" + prefix + "-power", f.power, "Shepard inverse-distance power for " + what);
    app.add_option("--" + prefix + "-shape", f.shape, "Gaussian width in node spacings for " + what);
    app.add_option("--" + prefix + "-ridge", f.ridge, "Kernel diagonal regularization for " + what);
    app.add_option("--" + prefix + "-width", f.width, "Absolute gaussian width for " + what + " (overrides shape)");
    app.add_option("--" + prefix + "-local-width", f.local_width, "Per-node gaussian widths for " + what);
    app.add_option("--" + prefix + "-order", f.order, "Polyharmonic order (1: r, 2: r^2 log r, 3: r^3) for " + what);
    app.add_option("--" + prefix + "-standardize", f.standardize, "Scale input axes by node spread for " + what);
}

} // namespace

// ---------------------------------------------------------------------------

std::function<void()> &pending_action() {
    static std::function<void()> action;
    return action;
}

void on_run(CLI::App &sub, std::function<void()> action) {
    sub.callback([action = std::move(action)] { pending_action() = action; });
}

void InterpFlags::apply(InterpSpec &spec) const {
    if (method) spec.method = interp_method_from_string(*method);
    set_if(k, spec.k);
    set_if(power, spec.power);
    set_if(shape, spec.shape);
    set_if(ridge, spec.ridge);
    set_if(width, spec.width);
    set_if(local_width, spec.local_width);
    set_if(order, spec.order);
    set_if(standardize, spec.standardize);
}

void ModelFlags::add_to(CLI::App &app, bool with_preset) {
    if (with_preset)
        app.add_option("--preset", preset, "Starting configuration: default|pde|egress|convergence")
            ->check(CLI::IsMember({"default", "pde", "egress", "convergence"}))
            ->capture_default_str();
    app.add_option("--delay", delay, "Delay horizon T");
    app.add_option("--epsilon", epsilon, "Kernel bandwidth (overrides the median rule)");
    app.add_option("--epsilon-median-factor", median_factor, "Bandwidth = factor * median pairwise distance");
    app.add_option("--lambda-ratio", lambda_ratio, "Drop eigenpairs with |lambda| < ratio * |lambda_1|");
    app.add_option("--dependency-residual", dependency_residual, "Residual threshold of the local_regression rule");
    app.add_option("--pruning", pruning, "Pruning rule: neighbor_injectivity|local_regression");
    app.add_option("--neighbors", neighbors, "Ambient neighbours used by pruning");
    app.add_option("--max-candidates", max_candidates, "Eigenvectors considered by pruning");
    app.add_option("--injectivity-tolerance", injectivity_tolerance, "Stop once the false-neighbour fraction is below this");
    app.add_option("--injectivity-gain", injectivity_gain, "Minimum relative false-neighbour reduction to keep a coordinate");
    app.add_option("--resolution", resolution, "Ambient gaps below resolution*epsilon never count as false");
    app.add_option("--merge-tolerance", merge_tolerance, "Delay vectors closer than this (max-norm) are merged");
    app.add_option("--landmark-stride", landmark_stride, "Eigensolve on every n-th distinct vector, extend the rest");
    app.add_option("--scheme", scheme, "Increment scheme: one_sided|central");
    app.add_option("--extrapolation-factor", extrapolation_factor, "Flag evals beyond this many median node spacings");
    add_interp(app, all, "interp", "all three interpolants");
    add_interp(app, input, "input", "the input map");
    add_interp(app, dynamic, "dynamic", "the dynamic");
    add_interp(app, observer, "observer", "the observer");
}

ModelConfig ModelFlags::resolve() const {
    ModelConfig c;
    if (preset == "pde") c = reference_pde_study().model;
    else if (preset == "egress") c = reference_egress_model();
    else if (preset == "convergence") c = default_convergence_config().model;
    set_if(delay, c.T);
    set_if(epsilon, c.dmaps.kernel.epsilon);
    set_if(median_factor, c.dmaps.kernel.median_factor);
    auto &t = c.dmaps.truncation;
    set_if(lambda_ratio, t.lambda_ratio);
    set_if(dependency_residual, t.dependency_residual);
    if (pruning) t.rule = pruning_from(*pruning);
    set_if(neighbors, t.neighbors);
    set_if(max_candidates, t.max_candidates);
    set_if(injectivity_tolerance, t.injectivity_tolerance);
    set_if(injectivity_gain, t.injectivity_gain);
    set_if(resolution, t.resolution);
    set_if(merge_tolerance, c.dmaps.merge_tolerance);
    set_if(landmark_stride, c.dmaps.landmark_stride);
    if (scheme) c.scheme = scheme_from_string(*scheme);
    set_if(extrapolation_factor, c.extrapolation_factor);
    for (InterpSpec *s : {&c.input_interp, &c.dynamic_interp, &c.observer_interp}) all.apply(*s);
    input.apply(c.input_interp);
    dynamic.apply(c.dynamic_interp);
    observer.apply(c.observer_interp);
    if (c.T < 1) throw Error(ErrorCode::invalid_argument, "--delay must be >= 1");
    return c;
}

// ---------------------------------------------------------------------------

std::string provenance_path(const std::string &output) {
    fs::path p(output);
    return (p.parent_path() / (p.stem().string() + ".config.json")).string();
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
    out << text;
    if (!out) throw Error(ErrorCode::io_failure, "write failed: " + path);
}

std::string real(double v) { return format_real(v); }

void write_provenance(const std::string &path, const std::string &command, const json &config,
                      const std::vector<std::string> &inputs, const std::vector<std::string> &outputs) {
    json j;
    j["tool"] = "closedobs";
    j["command"] = command;
    j["threads"] = thread_count();
    j["config"] = config;
    json in = json::array();
    for (const auto &p : inputs) {
        json e{{"path", p}};
        // Content digest for bundle inputs; other inputs are listed by path only.
        try {
            char buf[17];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(bundle_hash(load_bundle(p))));
            e["bundle_hash"] = buf;
        } catch (const Error &) {
        }
        in.push_back(std::move(e));
    }
    j["inputs"] = std::move(in);
    j["outputs"] = outputs;
    write_text(path, j.dump(2) + "\n");
}

json to_json(const ModelConfig &config) { return json::parse(model_config_to_json(config)); }

json to_json(const TrajectoryBundle &b) {
    return {{"trajectories", b.trajectories.size()}, {"n0", b.n0}, {"m", b.m}, {"dt", b.dt}};
}

// ---------------------------------------------------------------------------
// generate

namespace {

json bundle_meta(const TrajectoryBundle &b) {
    json j = json::object();
    for (const auto &[k, v] : b.meta) j[k] = v;
    return j;
}

void finish_generate(const TrajectoryBundle &b, const std::string &out, const std::string &command, json config) {
    save_bundle(b, out);
    config["bundle"] = to_json(b);
    config["meta"] = bundle_meta(b);
    write_provenance(provenance_path(out), command, config, {}, {out});
    std::cout << "wrote " << b.trajectories.size() << " trajectories to " << out << '\n';
}

std::vector<RealVector> parse_points(const std::vector<std::string> &specs) {
    std::vector<RealVector> pts;
    for (const auto &s : specs) {
        RealVector p;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t used = 0;
                p.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception &) {
                throw Error(ErrorCode::invalid_argument, "bad initial point '" + s + "'");
            }
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

} // namespace

void add_generate(CLI::App &app) {
    auto *gen = app.add_subcommand("generate", "Generate a trajectory bundle from a reference system");
    gen->require_subcommand(1);

    {
        auto *sub = gen->add_subcommand("spiral", "Decaying spiral observed through its radius");
        struct Opts {
            SpiralConfig cfg;
            std::vector<std::string> initial;
            std::string out;
        };
        auto o = std::make_shared<Opts>();
        sub->add_option("--grid", o->cfg.grid, "Initial points per axis")->capture_default_str();
        sub->add_option("--lo", o->cfg.lo, "Lower corner of the initial square")->capture_default_str();
        sub->add_option("--hi", o->cfg.hi, "Upper corner of the initial square")->capture_default_str();
        sub->add_option("--dt", o->cfg.dt, "Sampling interval")->capture_default_str();
        sub->add_option("--t-end", o->cfg.t_end, "Final time")->capture_default_str();
        sub->add_option("--initial-point", o->initial, "Explicit initial point x,y (repeatable; replaces the grid)");
        sub->add_option("--out", o->out, "Output bundle (.csv or .json)")->required();
        on_run(*sub, [o] {
            o->cfg.initial_points = parse_points(o->initial);
            json c{{"grid", o->cfg.grid}, {"lo", o->cfg.lo}, {"hi", o->cfg.hi}, {"dt", o->cfg.dt},
                   {"t_end", o->cfg.t_end}, {"initial_points", o->cfg.initial_points}};
            finish_generate(gen_spiral(o->cfg), o->out, "generate spiral", c);
        });
    }
    {
        auto *sub = gen->add_subcommand("pde", "Periodic transport-diffusion equation over a (c, d) grid");
        struct Opts {
            PdeConfig cfg;
            std::string preset = "default";
            std::optional<std::vector<double>> c, d;
            std::optional<std::size_t> nx;
            std::optional<double> dt, t_end, transport;
            std::string out;
        };
        auto o = std::make_shared<Opts>();
        sub->add_option("--preset", o->preset, "default|reference (dt 0.005 up to t 0.15)")
            ->check(CLI::IsMember({"default", "reference"}))
            ->capture_default_str();
        sub->add_option("--c-values", o->c, "Diffusion coefficients c")->delimiter(',');
        sub->add_option("--d-values", o->d, "Time coefficients d")->delimiter(',');
        sub->add_option("--nx", o->nx, "Grid points (even, >= 16)");
        sub->add_option("--dt", o->dt, "Sampling interval");
        sub->add_option("--t-end", o->t_end, "Final time");
        sub->add_option("--transport-factor", o->transport, "Advection a(d) = factor * d");
        sub->add_option("--out", o->out, "Output bundle (.csv or .json)")->required();
        on_run(*sub, [o] {
            PdeConfig cfg = o->preset == "reference" ? reference_pde_study().generator : PdeConfig{};
            set_if(o->c, cfg.c_values);
            set_if(o->d, cfg.d_values);
            set_if(o->nx, cfg.nx);
            set_if(o->dt, cfg.dt);
            set_if(o->t_end, cfg.t_end);
            set_if(o->transport, cfg.transport_factor);
            json c{{"c_values", cfg.c_values}, {"d_values", cfg.d_values}, {"nx", cfg.nx}, {"dt", cfg.dt},
                   {"t_end", cfg.t_end}, {"transport_factor", cfg.transport_factor}};
            finish_generate(gen_transport_diffusion(cfg), o->out, "generate pde", c);
        });
    }
    {
        auto *sub = gen->add_subcommand("egress", "Stochastic train-to-platform egress stand-in");
        struct Opts {
            EgressConfig cfg;
            std::string out;
        };
        auto o = std::make_shared<Opts>();
        sub->add_option("--nt0-values", o->cfg.N_T0_values, "Initial passengers in the train")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--np0-values", o->cfg.N_P0_values, "Initial passengers on the platform")
            ->delimiter(',')
            ->capture_default_str();
        sub->add_option("--runs-per-pair", o->cfg.runs_per_pair, "Stochastic runs per grid pair")->capture_default_str();
        sub->add_option("--duration", o->cfg.duration, "Seconds simulated (sampled every second)")->capture_default_str();
        sub->add_option("--seed", o->cfg.seed, "Random seed")->capture_default_str();
        sub->add_option("--door-rate-base", o->cfg.door_rate_base, "Door flow without crowding (persons/s)")
            ->capture_default_str();
        sub->add_option("--congestion-coefficient", o->cfg.congestion_coefficient, "Crowding slowdown strength")
            ->capture_default_str();
        sub->add_option("--platform-capacity", o->cfg.platform_capacity, "Crowding scale on the platform")
            ->capture_default_str();
        sub->add_option("--out", o->out, "Output bundle (.csv or .json)")->required();
        on_run(*sub, [o] {
            const auto &c = o->cfg;
            json j{{"N_T0_values", c.N_T0_values},
                   {"N_P0_values", c.N_P0_values},
                   {"runs_per_pair", c.runs_per_pair},
                   {"duration", c.duration},
                   {"seed", c.seed},
                   {"door_rate_base", c.door_rate_base},
                   {"congestion_coefficient", c.congestion_coefficient},
                   {"platform_capacity", c.platform_capacity}};
            finish_generate(gen_egress(c), o->out, "generate egress", j);
        });
    }
}

// ---------------------------------------------------------------------------
// build

void add_build(CLI::App &app) {
    auto *sub = app.add_subcommand("build", "Build a closed-observable model from a trajectory bundle");
    struct Opts {
        std::string input, out;
        std::optional<bool> average;
        ModelFlags model;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--input", o->input, "Training bundle (.csv or .json)")->required();
    sub->add_option("--out", o->out, "Model file (.json)")->required();
    sub->add_option("--average-runs", o->average,
                    "Average trajectories that share an input before building (default: on for --preset egress)");
    o->model.add_to(*sub, true);
    on_run(*sub, [o] {
        const ModelConfig cfg = o->model.resolve();
        const bool average = o->average.value_or(o->model.preset == "egress");
        TrajectoryBundle bundle = load_bundle(o->input);
        if (average) bundle = average_runs(bundle);
        const NumericalModel model = build_model(bundle, cfg);
        save_model(model, o->out);
        json c{{"preset", o->model.preset}, {"average_runs", average}, {"model", to_json(cfg)}};
        write_provenance(provenance_path(o->out), "build", c, {o->input}, {o->out});
        std::cout << "d=" << model.d << " (kept eigenvectors";
        for (auto k : model.kept_indices) std::cout << ' ' << k;
        std::cout << "), epsilon=" << real(model.stats.epsilon) << ", " << model.stats.distinct_vectors
                  << " distinct delay vectors; wrote " << o->out << '\n';
    });
}

// ---------------------------------------------------------------------------
// simulate

void add_simulate(CLI::App &app) {
    auto *sub = app.add_subcommand("simulate", "Run a model from an input");
    struct Opts {
        std::string model_path, out;
        std::vector<double> x0;
        std::size_t steps = 100;
        std::string integrator = "iterate";
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--model", o->model_path, "Model file")->required();
    sub->add_option("--x0", o->x0, "Input, comma separated (use --x0=-1,0 for a leading minus)")
        ->required()
        ->delimiter(',');
    sub->add_option("--steps", o->steps, "Number of steps")->capture_default_str();
    sub->add_option("--integrator", o->integrator, "iterate|rk4")->capture_default_str();
    sub->add_option("--out", o->out, "Output CSV (default: stdout)");
    on_run(*sub, [o] {
        const NumericalModel model = load_model(o->model_path);
        const SimulationResult sim = simulate(model, o->x0, o->steps, integrator_from_string(o->integrator));
        std::ostringstream csv;
        csv << "k,t";
        for (std::size_t j = 0; j < model.d; ++j) csv << ",phi_" << j;
        for (std::size_t j = 0; j < model.m; ++j) csv << ",obs_" << j;
        csv << ",extrapolated\n";
        for (std::size_t k = 0; k < sim.observations.size(); ++k) {
            csv << k << ',' << real(static_cast<double>(k) * model.dt);
            for (Eigen::Index j = 0; j < sim.states[k].size(); ++j) csv << ',' << real(sim.states[k](j));
            for (Eigen::Index j = 0; j < sim.observations[k].size(); ++j) csv << ',' << real(sim.observations[k](j));
            csv << ',' << (sim.extrapolated[k] ? 1 : 0) << '\n';
        }
        if (o->out.empty()) {
            std::cout << csv.str();
        } else {
            write_text(o->out, csv.str());
            json c{{"model", o->model_path}, {"x0", o->x0}, {"steps", o->steps}, {"integrator", o->integrator}};
            write_provenance(provenance_path(o->out), "simulate", c, {o->model_path}, {o->out});
        }
        if (sim.extrapolated_steps())
            std::cerr << "warning: " << sim.extrapolated_steps() << " of " << sim.observations.size()
                      << " steps query far outside the interpolation nodes\n";
    });
}

// ---------------------------------------------------------------------------
// info

void add_info(CLI::App &app) {
    auto *sub = app.add_subcommand("info", "Describe a model file");
    auto path = std::make_shared<std::string>();
    sub->add_option("model", *path, "Model file")->required();
    on_run(*sub, [path] {
        const NumericalModel m = load_model(*path);
        auto &os = std::cout;
        os << "model: " << *path << '\n'
           << "d: " << m.d << "\nm: " << m.m << "\nn0: " << m.n0 << "\nT: " << m.T << "\ndt: " << real(m.dt)
           << "\nscheme: " << to_string(m.scheme) << "\nkept eigenvectors:";
        for (auto k : m.kept_indices) os << ' ' << k;
        os << "\neigenvalues:";
        for (double v : m.eigenvalues) os << ' ' << real(v);
        os << "\nepsilon: " << real(m.stats.epsilon) << "\nnodes:\n";
        const struct {
            const char *name;
            const Interpolant &f;
        } parts[] = {{"input_map", m.input_map}, {"dynamic", m.dynamic}, {"observer", m.observer}};
        for (const auto &p : parts)
            os << "  " << p.name << ": " << p.f.size() << " (" << to_string(p.f.spec().method) << ", R^" << p.f.p()
               << " -> R^" << p.f.q() << ")\n";
        os << "training: " << m.stats.trajectories << " trajectories, " << m.stats.delay_vectors << " delay vectors, "
           << m.stats.distinct_vectors << " distinct\n";
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(m.stats.bundle_hash));
        os << "bundle hash: " << hash << '\n';
    });
}

} // namespace cli
