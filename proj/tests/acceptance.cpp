// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "closedobs/closedobs.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using namespace closedobs;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::string artifact; // everything the run produced, for the determinism rerun
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string scratch_file(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / "closedobs_acceptance";
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string file_bytes(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string model_bytes(const NumericalModel &model) {
    const auto path = scratch_file("model.json");
    save_model(model, path);
    return file_bytes(path);
}

std::string bundle_bytes(const TrajectoryBundle &b) {
    const auto path = scratch_file("bundle.csv");
    save_bundle(b, path);
    return file_bytes(path);
}

std::string simulation_bytes(const SimulationResult &sim) {
    std::string s;
    for (const auto &y : sim.observations)
        for (Eigen::Index c = 0; c < y.size(); ++c) (s += format_real(y(c))) += ',';
    return s;
}

// 1. Convergence orders of the spiral pipeline.
Outcome convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    const ConvergenceConfig cfg = default_convergence_config();
    const ConvergenceResult r = convergence_study(cfg);
    const double secs = seconds_since(t0);
    const double s1 = r.slope.at(Scheme::one_sided), s2 = r.slope.at(Scheme::central);
    const double span = static_cast<double>(cfg.step_counts.back()) / static_cast<double>(cfg.step_counts.front());
    Outcome o;
    o.pass = std::abs(s1 - 1.0) <= 0.3 && std::abs(s2 - 2.0) <= 0.3 && cfg.step_counts.size() >= 4 && span >= 10.0 &&
             secs < 120.0;
    o.detail = "one-sided slope " + num(s1) + ", central slope " + num(s2) + " over " +
               std::to_string(cfg.step_counts.size()) + " step counts (span " + num(span) + "x), " + num(secs) + " s";
    for (const auto &p : r.points) o.artifact += to_string(p.scheme) + format_real(p.max_error) + ';';
    return o;
}

// 2. Spiral needs one coordinate for every delay horizon.
Outcome spiral_dimension() {
    const TrajectoryBundle b = gen_spiral(SpiralConfig{});
    Outcome o;
    o.pass = true;
    std::string ds;
    for (std::size_t T : {2u, 5u, 10u}) {
        const DiffusionMap map = diffusion_map(delay_embed(b, T), DmapsConfig{});
        const DiffusionMap again = diffusion_map(delay_embed(b, T), DmapsConfig{});
        const bool same = map.distinct_coordinates == again.distinct_coordinates;
        o.pass = o.pass && map.d() == 1 && same;
        ds += " T=" + std::to_string(T) + ":d=" + std::to_string(map.d()) + (same ? "" : "(nondeterministic)");
        for (Eigen::Index i = 0; i < map.distinct_coordinates.size(); ++i)
            o.artifact += format_real(map.distinct_coordinates(i)) + ',';
    }
    o.detail = "retained dimensions" + ds;
    return o;
}

// 3. PDE needs two coordinates; held-out (1.6, 2) against the exact solution.
struct PdeRun {
    PdeStudy study = reference_pde_study();
    TrajectoryBundle training;
    NumericalModel model;
};

const PdeRun &pde_run(bool fresh = false) {
    static std::unique_ptr<PdeRun> cached;
    if (!cached || fresh) {
        auto r = std::make_unique<PdeRun>();
        r->training = gen_transport_diffusion(r->study.generator);
        r->model = build_model(r->training, r->study.model);
        cached = std::move(r);
    }
    return *cached;
}

Outcome pde_dimension(bool fresh) {
    const PdeRun &run = pde_run(fresh);
    PdeConfig truth_cfg = run.study.generator;
    truth_cfg.c_values = {run.study.holdout[0]};
    truth_cfg.d_values = {run.study.holdout[1]};
    const TrajectoryBundle truth = gen_transport_diffusion(truth_cfg);
    const HoldoutResult h = holdout_error(run.model, truth, run.model.T);
    Outcome o;
    o.pass = run.model.d == 2 && h.overall_max <= 0.15;
    o.detail = "d=" + std::to_string(run.model.d) + ", held-out (" + format_real(run.study.holdout[0]) + "," +
               format_real(run.study.holdout[1]) + ") max relative error " + num(h.overall_max) + " (<= 0.15)";
    o.artifact = model_bytes(run.model) + bundle_bytes(truth);
    for (double e : h.series[0]) o.artifact += format_real(e) + ',';
    return o;
}

// 4. (1.4, 2) and (2.8, 4) share c/d: identical data, identical predictions.
Outcome parameter_collapse(bool fresh) {
    const PdeRun &run = pde_run(fresh);
    PdeConfig a = run.study.generator, b = run.study.generator;
    a.c_values = {1.4};
    a.d_values = {2.0};
    b.c_values = {2.8};
    b.d_values = {4.0};
    const auto ta = gen_transport_diffusion(a), tb = gen_transport_diffusion(b);
    double gen_diff = 0.0;
    for (std::size_t k = 0; k < ta.trajectories[0].length(); ++k)
        for (std::size_t j = 0; j < ta.m; ++j)
            gen_diff = std::max(gen_diff, std::abs(ta.trajectories[0].observations[k][j] - tb.trajectories[0].observations[k][j]));

    const Interpolant &phi = run.model.input_map;
    Eigen::VectorXd xa(2), xb(2);
    xa << 1.4, 2.0;
    xb << 2.8, 4.0;
    const double phi_diff = (phi.eval(xa) - phi.eval(xb)).cwiseAbs().maxCoeff();
    const double tol = loo_error(phi.nodes(), phi.values(), phi.spec());
    const std::size_t steps = ta.trajectories[0].length() - 1 - run.model.T;
    const auto sa = simulate(run.model, {1.4, 2.0}, steps), sb = simulate(run.model, {2.8, 4.0}, steps);
    double pred_diff = 0.0;
    for (std::size_t k = 0; k <= steps; ++k)
        pred_diff = std::max(pred_diff, relative_error(sa.observations[k], sb.observations[k]));

    Outcome o;
    o.pass = gen_diff <= 1e-9 && phi_diff <= tol;
    o.detail = "generator difference " + num(gen_diff) + " (<= 1e-9); input-map difference " + num(phi_diff) +
               " <= leave-one-out tolerance " + num(tol) + "; prediction difference " + num(pred_diff) + " (relative)";
    o.artifact = simulation_bytes(sa) + simulation_bytes(sb) + format_real(tol);
    return o;
}

// 5. Storage counts against brute-force enumeration.
Outcome storage() {
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> grid_size;
    auto count = [&](std::size_t p, std::size_t N) {
        auto it = grid_size.find({p, N});
        if (it == grid_size.end()) it = grid_size.emplace(std::make_pair(p, N), full_grid(p, N).size()).first;
        return it->second;
    };
    std::size_t cases = 0, mismatches = 0;
    for (std::uint64_t d = 1; d <= 3; ++d)
        for (std::uint64_t n0 = 1; n0 <= 3; ++n0)
            for (std::uint64_t m = 1; m <= 3; ++m)
                for (std::uint64_t N = 1; N <= 20; ++N) {
                    const StorageAccount s = storage_account(d, m, n0, N);
                    const std::uint64_t brute_new = (d + m) * count(d, N) + d * count(n0, N);
                    const std::uint64_t brute_naive = m * count(n0 + 1, N);
                    ++cases;
                    mismatches += s.new_model_nodes != brute_new || s.naive_nodes != brute_naive ||
                                  s.reduction_holds != (d < n0 + 1);
                }
    const StorageAccount big = storage_account(1, 1, 2, 100000);
    const double secs = seconds_since(t0);
    const double ratio_over_N = big.ratio / 100000.0;
    Outcome o;
    o.pass = mismatches == 0 && big.reduction_holds && std::abs(ratio_over_N - 1.0) < 0.01 && secs < 1.0;
    o.detail = std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches; (1,1,2) ratio/N at N=1e5 " +
               num(ratio_over_N) + ", " + num(secs) + " s";
    o.artifact = std::to_string(mismatches) + format_real(big.ratio);
    return o;
}

// 6. Error-bound audit on the synthetic contraction.
Outcome bound() {
    Outcome o;
    o.pass = true;
    for (double M : {0.3, 0.5, 0.9}) {
        BoundAuditConfig c;
        c.M = M;
        c.e_G = 1e-3;
        c.e_phi = 1e-2;
        c.e_y = 1e-3;
        const BoundAudit a = bound_audit(c);
        BoundAuditConfig z = c;
        z.e_G = z.e_phi = z.e_y = 0.0;
        const BoundAudit zero = bound_audit(z);
        double zero_dev = 0.0;
        for (double v : zero.observed) zero_dev = std::max(zero_dev, v);
        o.pass = o.pass && a.satisfied && zero_dev <= 1e-12 && a.config.n_max == 50 && a.config.trials == 1000;
        o.detail += "M=" + format_real(M) + ": C=(" + num(a.C1) + "," + num(a.C2) + "," + num(a.C3) + ") " +
                    (a.satisfied ? "bounded" : "NOT bounded") + ", zero-error deviation " + num(zero_dev) + "; ";
        for (double v : a.observed) o.artifact += format_real(v) + ',';
    }
    return o;
}

// 8. Egress stand-in: monotone chance surfaces, conservation, speed.
struct EgressRun {
    TrajectoryBundle raw, training;
    NumericalModel model;
    EgressAnalysis analysis;
    double seconds = 0.0;
};

const EgressRun &egress_run_cached(bool fresh = false) {
    static std::unique_ptr<EgressRun> cached;
    if (!cached || fresh) {
        auto r = std::make_unique<EgressRun>();
        const auto t0 = std::chrono::steady_clock::now();
        r->raw = gen_egress(EgressConfig{});
        r->training = average_runs(r->raw);
        r->model = build_model(r->training, reference_egress_model());
        r->analysis = egress_analysis(r->model, reference_egress_analysis());
        r->seconds = seconds_since(t0);
        cached = std::move(r);
    }
    return *cached;
}

Outcome egress(bool fresh) {
    const EgressRun &r = egress_run_cached(fresh);
    double data_conservation = 0.0;
    for (const auto &tr : r.raw.trajectories)
        for (const auto &y : tr.observations)
            data_conservation = std::max(data_conservation, std::abs(y[0] + y[1] - tr.input[0] - tr.input[1]));
    const double v25 = r.analysis.monotonicity_violation(0), v50 = r.analysis.monotonicity_violation(1);
    Outcome o;
    o.pass = r.raw.trajectories.size() == 550 && r.analysis.points.size() == 400 && data_conservation == 0.0 &&
             v25 <= 0.05 && v50 <= 0.05 && r.analysis.max_conservation_error <= 2.0 && r.seconds < 300.0;
    o.detail = std::to_string(r.raw.trajectories.size()) + " runs, d=" + std::to_string(r.model.d) +
               ", c(25)/c(50) monotonicity violation " + num(v25) + "/" + num(v50) + " (<= 0.05), conservation " +
               num(data_conservation) + " in data, " + num(r.analysis.max_conservation_error) +
               " persons in predictions (<= 2), " + std::to_string(r.analysis.clamped_count) +
               " points clamped, " + num(r.seconds) + " s";
    o.artifact = bundle_bytes(r.raw) + model_bytes(r.model);
    for (const auto &p : r.analysis.points)
        for (double c : p.chance) o.artifact += format_real(c) + ',';
    return o;
}

// 7. Simulated training trajectories reproduce the training data.
Outcome training(bool fresh) {
    Outcome o;
    o.pass = true;
    const TrajectoryBundle spiral = gen_spiral(SpiralConfig{});
    ModelConfig spiral_cfg;
    const NumericalModel spiral_model = build_model(spiral, spiral_cfg);
    const struct {
        const char *name;
        const NumericalModel &model;
        const TrajectoryBundle &data;
    } cases[] = {{"spiral", spiral_model, spiral},
                 {"pde", pde_run(fresh).model, pde_run(false).training},
                 {"egress", egress_run_cached(fresh).model, egress_run_cached(false).training}};
    for (const auto &c : cases) {
        const HoldoutResult h = training_reproduction(c.model, c.data);
        o.pass = o.pass && h.overall_max <= 1e-6;
        o.detail += std::string(c.name) + " " + num(h.overall_max) + "; ";
        o.artifact += format_real(h.overall_max) + ',';
    }
    o.detail += "(<= 1e-6, final T steps excluded)";
    return o;
}

using Criterion = std::function<Outcome(bool)>;

} // namespace

int main() {
    const std::vector<std::pair<int, Criterion>> criteria = {
        {1, [](bool) { return convergence(); }},
        {2, [](bool) { return spiral_dimension(); }},
        {3, pde_dimension},
        {4, parameter_collapse},
        {5, [](bool) { return storage(); }},
        {6, [](bool) { return bound(); }},
        {7, training},
        {8, egress},
    };

    bool all = true;
    std::vector<std::string> first_artifacts;
    for (const auto &[id, run] : criteria) {
        Outcome o;
        try {
            o = run(false);
        } catch (const Error &e) {
            o.detail = std::string("error: ") + std::string(to_string(e.code())) + ": " + e.what();
        }
        all = all && o.pass;
        first_artifacts.push_back(o.artifact);
        std::printf("criterion %d: %s - %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }

    // 9. Rerun everything from scratch with the same seeds and compare outputs byte for byte.
    std::size_t identical = 0;
    std::string differing;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string again;
        try {
            again = criteria[i].second(true).artifact;
        } catch (const Error &) {
        }
        if (!first_artifacts[i].empty() && again == first_artifacts[i]) ++identical;
        else differing += " " + std::to_string(criteria[i].first);
    }
    const bool det = identical == criteria.size();
    all = all && det;
    std::printf("criterion 9: %s - %zu/%zu acceptance runs byte-identical on rerun%s\n", det ? "PASS" : "FAIL", identical,
                criteria.size(), det ? "" : (" (differ:" + differing + ")").c_str());
    return all ? 0 : 1;
}
