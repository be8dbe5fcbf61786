#include "commands.hpp"

#include <iostream>
#include <sstream>

namespace cli {

using namespace closedobs;

namespace {

// Report triple for --out PREFIX: PREFIX.json, PREFIX.csv, PREFIX.config.json.
// Without --out the JSON report goes to stdout.
void emit(const std::string &prefix, const std::string &command, const json &config, const json &report,
          const std::string &csv, const std::vector<std::string> &inputs = {}) {
    if (prefix.empty()) {
        std::cout << report.dump(2) << '\n';
        return;
    }
    const std::string jpath = prefix + ".json", cpath = prefix + ".csv";
    write_text(jpath, report.dump(2) + "\n");
    write_text(cpath, csv);
    write_provenance(prefix + ".config.json", command, config, inputs, {jpath, cpath});
    std::cout << "wrote " << jpath << " and " << cpath << '\n';
}

json real_array(const std::vector<double> &v) {
    json a = json::array();
    for (double x : v) a.push_back(x);
    return a;
}

void add_convergence(CLI::App &parent) {
    auto *sub = parent.add_subcommand("convergence", "Error of the spiral pipeline as the training dt shrinks");
    struct Opts {
        ConvergenceConfig cfg = default_convergence_config();
        std::vector<std::string> schemes{"one_sided", "central"};
        std::string integrator = "rk4";
        ModelFlags model;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto &c = o->cfg;
    sub->add_option("--step-counts", c.step_counts, "Steps between t=0 and t_final")->delimiter(',')->capture_default_str();
    sub->add_option("--schemes", o->schemes, "Increment schemes")->delimiter(',')->capture_default_str();
    sub->add_option("--t-final", c.t_final, "Training horizon")->capture_default_str();
    sub->add_option("--y-lo", c.y_lo, "Lower end of the initial segment {(0, y)}")->capture_default_str();
    sub->add_option("--y-hi", c.y_hi, "Upper end of the initial segment")->capture_default_str();
    sub->add_option("--margin", c.margin, "Relative training margin beyond [y_lo, y_hi]")->capture_default_str();
    sub->add_option("--samples", c.samples, "Random initial values per run")->capture_default_str();
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--integrator", o->integrator, "iterate|rk4")->capture_default_str();
    o->model.add_to(*sub, false);
    sub->add_option("--out", o->out, "Report prefix");
    on_run(*sub, [o] {
        ConvergenceConfig cfg = o->cfg;
        ModelFlags mf = o->model;
        mf.preset = "convergence";
        cfg.model = mf.resolve();
        cfg.schemes.clear();
        for (const auto &s : o->schemes) cfg.schemes.push_back(scheme_from_string(s));
        cfg.integrator = integrator_from_string(o->integrator);
        const ConvergenceResult r = convergence_study(cfg);

        json config{{"step_counts", cfg.step_counts}, {"schemes", o->schemes},   {"t_final", cfg.t_final},
                    {"y_lo", cfg.y_lo},               {"y_hi", cfg.y_hi},         {"margin", cfg.margin},
                    {"samples", cfg.samples},         {"seed", cfg.seed},         {"integrator", o->integrator},
                    {"model", to_json(cfg.model)}};
        json report{{"kind", "convergence"}, {"points", json::array()}, {"slope", json::object()}};
        std::ostringstream csv;
        csv << "scheme,steps,dt,max_error,d\n";
        for (const auto &p : r.points) {
            report["points"].push_back(
                {{"scheme", to_string(p.scheme)}, {"steps", p.steps}, {"dt", p.dt}, {"max_error", p.max_error}, {"d", p.d}});
            csv << to_string(p.scheme) << ',' << p.steps << ',' << real(p.dt) << ',' << real(p.max_error) << ',' << p.d
                << '\n';
        }
        for (const auto &[s, slope] : r.slope) report["slope"][to_string(s)] = slope;
        emit(o->out, "validate convergence", config, report, csv.str());
    });
}

void add_storage(CLI::App &parent) {
    auto *sub = parent.add_subcommand("storage", "Node counts of full-grid interpolants: new model vs naive map");
    struct Opts {
        std::uint64_t d = 1, m = 1, n0 = 2;
        std::vector<std::uint64_t> N{1000};
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--d", o->d, "Closed-observable dimension")->capture_default_str();
    sub->add_option("--m", o->m, "Observation dimension")->capture_default_str();
    sub->add_option("--n0", o->n0, "Input dimension")->capture_default_str();
    sub->add_option("--N", o->N, "Grid points per axis (comma list for a sweep)")->delimiter(',')->capture_default_str();
    sub->add_option("--out", o->out, "Report prefix");
    on_run(*sub, [o] {
        json config{{"d", o->d}, {"m", o->m}, {"n0", o->n0}, {"N", o->N}};
        json rows = json::array();
        std::ostringstream csv;
        csv << "d,m,n0,N,new_model_nodes,naive_nodes,ratio,reduction_holds\n";
        for (auto N : o->N) {
            const StorageAccount a = storage_account(o->d, o->m, o->n0, N);
            rows.push_back({{"N", a.N},
                            {"new_model_nodes", a.new_model_nodes},
                            {"naive_nodes", a.naive_nodes},
                            {"ratio", a.ratio},
                            {"reduction_holds", a.reduction_holds}});
            csv << a.d << ',' << a.m << ',' << a.n0 << ',' << a.N << ',' << a.new_model_nodes << ',' << a.naive_nodes
                << ',' << real(a.ratio) << ',' << (a.reduction_holds ? 1 : 0) << '\n';
            if (!o->out.empty())
                std::cout << "N=" << a.N << ": new " << a.new_model_nodes << ", naive " << a.naive_nodes << ", ratio "
                          << real(a.ratio) << '\n';
        }
        json report{{"kind", "storage"}, {"d", o->d}, {"m", o->m}, {"n0", o->n0}, {"rows", rows}};
        emit(o->out, "validate storage", config, report, csv.str());
    });
}

void add_bound(CLI::App &parent) {
    auto *sub = parent.add_subcommand("bound", "Audit the prediction error bound on a synthetic contraction");
    struct Opts {
        BoundAuditConfig cfg;
        std::string out;
    };
    auto o = std::make_shared<Opts>();
    auto &c = o->cfg;
    sub->add_option("--M", c.M, "Lipschitz constant of the synthetic dynamic")->capture_default_str();
    sub->add_option("--e-G", c.e_G, "Dynamic interpolation error")->capture_default_str();
    sub->add_option("--e-phi", c.e_phi, "Input-map interpolation error")->capture_default_str();
    sub->add_option("--e-y", c.e_y, "Observer interpolation error")->capture_default_str();
    sub->add_option("--n-max", c.n_max, "Largest step count")->capture_default_str();
    sub->add_option("--trials", c.trials, "Random perturbation trials")->capture_default_str();
    sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    sub->add_option("--out", o->out, "Report prefix");
    on_run(*sub, [o] {
        const auto &c = o->cfg;
        const BoundAudit a = bound_audit(c);
        json config{{"M", c.M},         {"e_G", c.e_G},       {"e_phi", c.e_phi}, {"e_y", c.e_y},
                    {"n_max", c.n_max}, {"trials", c.trials}, {"seed", c.seed}};
        json report{{"kind", "bound"},
                    {"C1", a.C1},
                    {"C2", a.C2},
                    {"C3", a.C3},
                    {"satisfied", a.satisfied},
                    {"observed", real_array(a.observed)},
                    {"bound", real_array(a.bound)}};
        std::ostringstream csv;
        csv << "n,observed,bound\n";
        for (std::size_t n = 0; n < a.observed.size(); ++n)
            csv << n << ',' << real(a.observed[n]) << ',' << real(a.bound[n]) << '\n';
        emit(o->out, "validate bound", config, report, csv.str());
    });
}

void add_holdout(CLI::App &parent) {
    auto *sub = parent.add_subcommand("holdout", "Relative prediction error against reference trajectories");
    struct Opts {
        std::string model, truth, integrator = "iterate", out;
        std::size_t exclude_tail = 0;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--model", o->model, "Model file")->required();
    sub->add_option("--truth", o->truth, "Reference bundle (.csv or .json)")->required();
    sub->add_option("--exclude-tail", o->exclude_tail, "Ignore this many final steps of each trajectory")
        ->capture_default_str();
    sub->add_option("--integrator", o->integrator, "iterate|rk4")->capture_default_str();
    sub->add_option("--out", o->out, "Report prefix");
    on_run(*sub, [o] {
        const NumericalModel model = load_model(o->model);
        const TrajectoryBundle truth = load_bundle(o->truth);
        const HoldoutResult r = holdout_error(model, truth, o->exclude_tail, integrator_from_string(o->integrator));
        json config{{"model", o->model}, {"truth", o->truth}, {"exclude_tail", o->exclude_tail},
                    {"integrator", o->integrator}};
        json per = json::array();
        std::ostringstream csv;
        csv << "trajectory,k,t,relative_error\n";
        for (std::size_t i = 0; i < r.series.size(); ++i) {
            per.push_back({{"trajectory", i}, {"input", truth.trajectories[i].input}, {"max_error", r.max_error[i]}});
            for (std::size_t k = 0; k < r.series[i].size(); ++k)
                csv << i << ',' << k << ',' << real(static_cast<double>(k) * truth.dt) << ',' << real(r.series[i][k])
                    << '\n';
        }
        json report{{"kind", "holdout"},
                    {"overall_max", r.overall_max},
                    {"extrapolated_steps", r.extrapolated_steps},
                    {"trajectories", per}};
        emit(o->out, "validate holdout", config, report, csv.str(), {o->model, o->truth});
    });
}

void add_egress(CLI::App &parent) {
    auto *sub = parent.add_subcommand("egress", "Chance of exit over an (N_T0, N_P0) grid from an egress model");
    struct Opts {
        std::string model, out;
        EgressAnalysisConfig cfg = reference_egress_analysis();
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--model", o->model, "Model file built from egress data")->required();
    sub->add_option("--horizons", o->cfg.horizons, "Horizons n (steps)")->delimiter(',')->capture_default_str();
    sub->add_option("--nt0-grid", o->cfg.N_T0_grid, "Initial train counts")->delimiter(',');
    sub->add_option("--np0-grid", o->cfg.N_P0_grid, "Initial platform counts")->delimiter(',');
    sub->add_option("--out", o->out, "Report prefix");
    on_run(*sub, [o] {
        const NumericalModel model = load_model(o->model);
        const EgressAnalysis a = egress_analysis(model, o->cfg);
        json config{{"model", o->model},
                    {"horizons", o->cfg.horizons},
                    {"N_T0_grid", real_array(o->cfg.N_T0_grid)},
                    {"N_P0_grid", real_array(o->cfg.N_P0_grid)}};
        json viol = json::object();
        for (std::size_t h = 0; h < a.horizons.size(); ++h)
            viol[std::to_string(a.horizons[h])] = a.monotonicity_violation(h);
        json report{{"kind", "egress"},
                    {"horizons", a.horizons},
                    {"monotonicity_violation", viol},
                    {"clamped_count", a.clamped_count},
                    {"max_conservation_error", a.max_conservation_error},
                    {"points", a.points.size()}};
        std::ostringstream csv;
        csv << "N_T0,N_P0";
        for (auto h : a.horizons) csv << ",chance_" << h;
        csv << ",clamped,conservation_error\n";
        for (const auto &p : a.points) {
            csv << real(p.N_T0) << ',' << real(p.N_P0);
            for (double c : p.chance) csv << ',' << real(c);
            csv << ',' << (p.clamped ? 1 : 0) << ',' << real(p.conservation_error) << '\n';
        }
        emit(o->out, "validate egress", config, report, csv.str(), {o->model});
    });
}

} // namespace

void add_validate(CLI::App &app) {
    auto *v = app.add_subcommand("validate", "Validation studies; each writes a JSON report and a plot-ready CSV");
    v->require_subcommand(1);
    add_convergence(*v);
    add_storage(*v);
    add_bound(*v);
    add_holdout(*v);
    add_egress(*v);
}

} // namespace cli
