#include "closedobs/model.hpp"

#include "closedobs/embedding.hpp"
#include "closedobs/error.hpp"
#include "closedobs/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace closedobs {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;

std::string to_string(Scheme s) { return s == Scheme::central ? "central" : "one_sided"; }

Scheme scheme_from_string(const std::string &name) {
    if (name == "one_sided" || name == "one-sided") return Scheme::one_sided;
    if (name == "central") return Scheme::central;
    throw Error(ErrorCode::invalid_argument, "unknown difference scheme '" + name + "'");
}

std::string to_string(Integrator i) { return i == Integrator::rk4 ? "rk4" : "iterate"; }

Integrator integrator_from_string(const std::string &name) {
    if (name == "iterate") return Integrator::iterate;
    if (name == "rk4") return Integrator::rk4;
    throw Error(ErrorCode::invalid_argument, "unknown integrator '" + name + "'");
}

std::size_t SimulationResult::extrapolated_steps() const {
    return static_cast<std::size_t>(std::count(extrapolated.begin(), extrapolated.end(), true));
}

NumericalModel build_model(const TrajectoryBundle &bundle, const ModelConfig &config) {
    bundle.validate();
    if (config.scheme == Scheme::central)
        for (std::size_t i = 0; i < bundle.trajectories.size(); ++i)
            if (bundle.trajectories[i].length() < config.T + 2)
                throw Error(ErrorCode::too_short,
                            "central differences need T+2 observations; trajectory " + std::to_string(i) +
                                " has " + std::to_string(bundle.trajectories[i].length()));

    const DelayVectorSet set = delay_embed(bundle, config.T);
    const DiffusionMap map = diffusion_map(set, config.dmaps);
    const std::size_t d = map.d();
    if (d == 0)
        throw Error(ErrorCode::degenerate_coordinates,
                    "diffusion map kept no nontrivial coordinate (d=0); the observations carry no dynamics");

    NumericalModel model;
    model.T = config.T;
    model.d = d;
    model.m = bundle.m;
    model.n0 = bundle.n0;
    model.dt = bundle.dt;
    model.scheme = config.scheme;
    model.config = config;
    const Index shown = std::min<Index>(map.coords.eigenvalues.size(), 16);
    for (Index k = 0; k < shown; ++k) model.eigenvalues.push_back(map.coords.eigenvalues(k));
    model.kept_indices = map.coords.kept_indices;

    const std::size_t nd = static_cast<std::size_t>(map.distinct_points.rows());
    const MatrixXd &phi = map.distinct_coordinates;

    // Input map: trajectory inputs -> coordinates of their first delay vector.
    MatrixXd X0(static_cast<Index>(bundle.trajectories.size()), static_cast<Index>(bundle.n0));
    MatrixXd P0(X0.rows(), static_cast<Index>(d));
    for (std::size_t t = 0; t < bundle.trajectories.size(); ++t) {
        X0.row(static_cast<Index>(t)) = Eigen::Map<const VectorXd>(bundle.trajectories[t].input.data(),
                                                                    static_cast<Index>(bundle.n0)).transpose();
        P0.row(static_cast<Index>(t)) = map.row_coordinates(set.first_row[t]).transpose();
    }
    model.input_map = Interpolant::fit(X0, P0, config.input_interp);

    // Increments per delay vector, averaged over rows that share a distinct vector.
    std::vector<std::ptrdiff_t> predecessor(set.size(), -1);
    for (std::size_t i = 0; i < set.size(); ++i)
        if (set.successor[i] >= 0) predecessor[static_cast<std::size_t>(set.successor[i])] = static_cast<std::ptrdiff_t>(i);

    MatrixXd inc_sum = MatrixXd::Zero(static_cast<Index>(nd), static_cast<Index>(d));
    MatrixXd inc_lo = MatrixXd::Constant(static_cast<Index>(nd), static_cast<Index>(d), INFINITY);
    MatrixXd inc_hi = MatrixXd::Constant(static_cast<Index>(nd), static_cast<Index>(d), -INFINITY);
    std::vector<std::size_t> inc_count(nd, 0);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const std::ptrdiff_t s = set.successor[i], p = predecessor[i];
        VectorXd inc;
        if (config.scheme == Scheme::one_sided || (s >= 0 && p < 0) || (s < 0 && p >= 0)) {
            if (s >= 0) inc = map.row_coordinates(static_cast<std::size_t>(s)) - map.row_coordinates(i);
            else if (config.scheme == Scheme::central) inc = map.row_coordinates(i) - map.row_coordinates(static_cast<std::size_t>(p));
            else continue;
        } else if (s >= 0 && p >= 0) {
            inc = 0.5 * (map.row_coordinates(static_cast<std::size_t>(s)) - map.row_coordinates(static_cast<std::size_t>(p)));
        } else {
            continue;
        }
        const Index u = static_cast<Index>(map.distinct_of_row[i]);
        inc_sum.row(u) += inc.transpose();
        inc_lo.row(u) = inc_lo.row(u).cwiseMin(inc.transpose());
        inc_hi.row(u) = inc_hi.row(u).cwiseMax(inc.transpose());
        ++inc_count[static_cast<std::size_t>(u)];
    }
    std::size_t n_dyn = 0;
    for (std::size_t u = 0; u < nd; ++u) n_dyn += inc_count[u] > 0;
    if (n_dyn == 0) throw Error(ErrorCode::inconsistent_data, "no successor pairs to learn the dynamic from");
    MatrixXd dyn_nodes(static_cast<Index>(n_dyn), static_cast<Index>(d));
    MatrixXd dyn_vals(static_cast<Index>(n_dyn), static_cast<Index>(d));
    double conflict = 0.0;
    for (std::size_t u = 0, r = 0; u < nd; ++u) {
        if (!inc_count[u]) continue;
        const Index ui = static_cast<Index>(u), ri = static_cast<Index>(r++);
        dyn_nodes.row(ri) = phi.row(ui);
        dyn_vals.row(ri) = inc_sum.row(ui) / static_cast<double>(inc_count[u]);
        conflict = std::max(conflict, (inc_hi.row(ui) - inc_lo.row(ui)).maxCoeff());
    }
    model.dynamic = Interpolant::fit(dyn_nodes, dyn_vals, config.dynamic_interp);

    // Observer: coordinates -> first observation block of the delay vector.
    model.observer = Interpolant::fit(phi, map.distinct_points.leftCols(static_cast<Index>(bundle.m)),
                                      config.observer_interp);

    BuildStats &st = model.stats;
    st.bundle_hash = bundle_hash(bundle);
    st.trajectories = bundle.trajectories.size();
    st.delay_vectors = set.size();
    st.distinct_vectors = nd;
    st.dynamic_nodes = n_dyn;
    st.epsilon = map.coords.epsilon;
    st.false_neighbors = map.coords.false_neighbors;
    st.increment_conflict = conflict;
    std::vector<double> lip(static_cast<std::size_t>(n_dyn), 0.0);
    parallel_for(n_dyn, [&](std::size_t a) {
        const Index ai = static_cast<Index>(a);
        for (Index b = ai + 1; b < static_cast<Index>(n_dyn); ++b) {
            const double den = (dyn_nodes.row(ai) - dyn_nodes.row(b)).norm();
            if (den <= 0.0) continue;
            const double num = (dyn_nodes.row(ai) + dyn_vals.row(ai) - dyn_nodes.row(b) - dyn_vals.row(b)).norm();
            lip[a] = std::max(lip[a], num / den);
        }
    });
    st.lipschitz = lip.empty() ? 0.0 : *std::max_element(lip.begin(), lip.end());
    return model;
}

SimulationResult simulate(const NumericalModel &model, const RealVector &x0, std::size_t n_steps,
                          Integrator integrator) {
    if (x0.size() != model.n0)
        throw Error(ErrorCode::invalid_argument,
                    "x0 has " + std::to_string(x0.size()) + " entries, model expects n0=" + std::to_string(model.n0));
    const double factor = model.config.extrapolation_factor;
    auto far = [&](const Interpolant &f, const InterpEval &e) {
        return f.median_spacing() > 0.0 && e.nearest_distance > factor * f.median_spacing();
    };

    SimulationResult out;
    out.states.reserve(n_steps + 1);
    out.observations.reserve(n_steps + 1);
    out.extrapolated.reserve(n_steps + 1);

    const InterpEval start = model.input_map.eval_detailed(Eigen::Map<const VectorXd>(x0.data(), static_cast<Index>(x0.size())));
    VectorXd phi = start.value;
    bool flag = far(model.input_map, start);
    for (std::size_t k = 0;; ++k) {
        const InterpEval obs = model.observer.eval_detailed(phi);
        out.states.push_back(phi);
        out.observations.push_back(obs.value);
        if (k == n_steps) {
            out.extrapolated.push_back(flag || far(model.observer, obs));
            break;
        }
        const InterpEval inc = model.dynamic.eval_detailed(phi);
        out.extrapolated.push_back(flag || far(model.observer, obs) || far(model.dynamic, inc));
        flag = false;
        if (integrator == Integrator::iterate) {
            phi += inc.value;
        } else {
            // Vector field f = dG / dt, integrated over one step of length dt.
            const VectorXd k1 = inc.value;
            const VectorXd k2 = model.dynamic.eval(phi + 0.5 * k1);
            const VectorXd k3 = model.dynamic.eval(phi + 0.5 * k2);
            const VectorXd k4 = model.dynamic.eval(phi + k3);
            phi += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json matrix_json(const MatrixXd &M) {
    json rows = json::array();
    for (Index i = 0; i < M.rows(); ++i) {
        json r = json::array();
        for (Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        rows.push_back(std::move(r));
    }
    return {{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(rows)}};
}

MatrixXd matrix_from(const json &j) {
    const Index r = j.at("rows").get<Index>(), c = j.at("cols").get<Index>();
    const json &data = j.at("data");
    if (r < 0 || c < 0 || static_cast<Index>(data.size()) != r)
        throw Error(ErrorCode::corrupt_file, "matrix shape does not match its data");
    MatrixXd M(r, c);
    for (Index i = 0; i < r; ++i) {
        const json &row = data.at(static_cast<std::size_t>(i));
        if (static_cast<Index>(row.size()) != c) throw Error(ErrorCode::corrupt_file, "ragged matrix row");
        for (Index k = 0; k < c; ++k) M(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return M;
}

json spec_json(const InterpSpec &s) {
    return {{"method", to_string(s.method)}, {"k", s.k}, {"power", s.power},
            {"shape", s.shape}, {"ridge", s.ridge}, {"width", s.width}, {"local_width", s.local_width},
            {"order", s.order},        {"standardize", s.standardize}};
}

InterpSpec spec_from(const json &j) {
    InterpSpec s;
    s.method = interp_method_from_string(j.at("method").get<std::string>());
    s.k = j.at("k").get<std::size_t>();
    s.power = j.at("power").get<double>();
    s.shape = j.at("shape").get<double>();
    s.ridge = j.at("ridge").get<double>();
    s.width = j.value("width", 0.0);
    s.local_width = j.value("local_width", false);
    s.order = j.value("order", 1);
    s.standardize = j.value("standardize", false);
    return s;
}

json interp_json(const Interpolant &f) {
    json j = spec_json(f.spec());
    j["median_spacing"] = f.median_spacing();
    j["axis_scale"] = matrix_json(f.axis_scale());
    j["nodes"] = matrix_json(f.nodes());
    j["values"] = matrix_json(f.values());
    if (f.spec().method == InterpMethod::rbf_gaussian || f.spec().method == InterpMethod::polyharmonic) {
        const auto &r = f.rbf();
        j["rbf"] = {{"scale", r.scale},
                    {"weights", matrix_json(r.weights)},
                    {"center", matrix_json(r.center)},
                    {"directions", matrix_json(r.directions)},
                    {"tail", matrix_json(r.tail)}};
        if (r.widths.size()) j["rbf"]["widths"] = matrix_json(r.widths);
    }
    return j;
}

Interpolant interp_from(const json &j) {
    const InterpSpec spec = spec_from(j);
    Interpolant::RbfState r;
    if (spec.method == InterpMethod::rbf_gaussian || spec.method == InterpMethod::polyharmonic) {
        const json &jr = j.at("rbf");
        r.scale = jr.at("scale").get<double>();
        r.weights = matrix_from(jr.at("weights"));
        r.center = matrix_from(jr.at("center"));
        r.directions = matrix_from(jr.at("directions"));
        r.tail = matrix_from(jr.at("tail"));
        if (jr.contains("widths")) r.widths = matrix_from(jr.at("widths"));
    }
    return Interpolant::from_parts(matrix_from(j.at("nodes")), matrix_from(j.at("values")), spec, std::move(r),
                                   j.at("median_spacing").get<double>(),
                                   j.contains("axis_scale") ? VectorXd(matrix_from(j.at("axis_scale"))) : VectorXd());
}

std::string rule_name(PruningRule r) {
    return r == PruningRule::local_regression ? "local_regression" : "neighbor_injectivity";
}

PruningRule rule_from(const std::string &s) {
    if (s == "local_regression") return PruningRule::local_regression;
    if (s == "neighbor_injectivity") return PruningRule::neighbor_injectivity;
    throw Error(ErrorCode::corrupt_file, "unknown pruning rule '" + s + "'");
}

json config_json(const ModelConfig &c) {
    const auto &t = c.dmaps.truncation;
    return {{"T", c.T},
            {"kernel", {{"epsilon", c.dmaps.kernel.epsilon}, {"median_factor", c.dmaps.kernel.median_factor}}},
            {"truncation",
             {{"lambda_ratio", t.lambda_ratio},
              {"dependency_residual", t.dependency_residual},
              {"rule", rule_name(t.rule)},
              {"neighbors", t.neighbors},
              {"max_candidates", t.max_candidates},
              {"injectivity_tolerance", t.injectivity_tolerance},
              {"injectivity_gain", t.injectivity_gain},
              {"resolution", t.resolution}}},
            {"landmark_stride", c.dmaps.landmark_stride},
            {"merge_tolerance", c.dmaps.merge_tolerance},
            {"input_interp", spec_json(c.input_interp)},
            {"dynamic_interp", spec_json(c.dynamic_interp)},
            {"observer_interp", spec_json(c.observer_interp)},
            {"scheme", to_string(c.scheme)},
            {"extrapolation_factor", c.extrapolation_factor}};
}

ModelConfig config_from(const json &j) {
    ModelConfig c;
    c.T = j.at("T").get<std::size_t>();
    c.dmaps.kernel.epsilon = j.at("kernel").at("epsilon").get<double>();
    c.dmaps.kernel.median_factor = j.at("kernel").at("median_factor").get<double>();
    const json &t = j.at("truncation");
    auto &tr = c.dmaps.truncation;
    tr.lambda_ratio = t.at("lambda_ratio").get<double>();
    tr.dependency_residual = t.at("dependency_residual").get<double>();
    tr.rule = rule_from(t.at("rule").get<std::string>());
    tr.neighbors = t.at("neighbors").get<std::size_t>();
    tr.max_candidates = t.at("max_candidates").get<std::size_t>();
    tr.injectivity_tolerance = t.at("injectivity_tolerance").get<double>();
    tr.injectivity_gain = t.at("injectivity_gain").get<double>();
    tr.resolution = t.at("resolution").get<double>();
    c.dmaps.landmark_stride = j.at("landmark_stride").get<std::size_t>();
    c.dmaps.merge_tolerance = j.at("merge_tolerance").get<double>();
    c.input_interp = spec_from(j.at("input_interp"));
    c.dynamic_interp = spec_from(j.at("dynamic_interp"));
    c.observer_interp = spec_from(j.at("observer_interp"));
    c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
    c.extrapolation_factor = j.at("extrapolation_factor").get<double>();
    return c;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::string model_config_to_json(const ModelConfig &config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(const std::string &text) {
    try {
        return config_from(json::parse(text));
    } catch (const json::exception &e) {
        throw Error(ErrorCode::malformed_input, std::string("model config: ") + e.what());
    }
}

void save_model(const NumericalModel &model, const std::string &path) {
    const BuildStats &s = model.stats;
    json j = {{"format", "closedobs-model"},
              {"version", kModelFormatVersion},
              {"T", model.T},
              {"d", model.d},
              {"m", model.m},
              {"n0", model.n0},
              {"dt", model.dt},
              {"scheme", to_string(model.scheme)},
              {"config", config_json(model.config)},
              {"eigenvalues", model.eigenvalues},
              {"kept_indices", model.kept_indices},
              {"stats",
               {{"bundle_hash", hex64(s.bundle_hash)},
                {"trajectories", s.trajectories},
                {"delay_vectors", s.delay_vectors},
                {"distinct_vectors", s.distinct_vectors},
                {"dynamic_nodes", s.dynamic_nodes},
                {"epsilon", s.epsilon},
                {"false_neighbors", s.false_neighbors},
                {"increment_conflict", s.increment_conflict},
                {"lipschitz", s.lipschitz}}},
              {"input_map", interp_json(model.input_map)},
              {"dynamic", interp_json(model.dynamic)},
              {"observer", interp_json(model.observer)}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
    out << j.dump() << '\n';
    if (!out) throw Error(ErrorCode::io_failure, "write failed: " + path);
}

NumericalModel load_model(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_failure, "cannot open " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception &e) {
        throw Error(ErrorCode::corrupt_file, path + ": " + e.what());
    }
    try {
        if (j.value("format", std::string()) != "closedobs-model")
            throw Error(ErrorCode::corrupt_file, path + ": not a model file");
        const int version = j.at("version").get<int>();
        if (version != kModelFormatVersion)
            throw Error(ErrorCode::version_mismatch, path + ": model format version " + std::to_string(version) +
                                                         ", this build reads version " +
                                                         std::to_string(kModelFormatVersion));
        NumericalModel m;
        m.T = j.at("T").get<std::size_t>();
        m.d = j.at("d").get<std::size_t>();
        m.m = j.at("m").get<std::size_t>();
        m.n0 = j.at("n0").get<std::size_t>();
        m.dt = j.at("dt").get<double>();
        m.scheme = scheme_from_string(j.at("scheme").get<std::string>());
        m.config = config_from(j.at("config"));
        m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        m.kept_indices = j.at("kept_indices").get<std::vector<std::size_t>>();
        const json &s = j.at("stats");
        m.stats.bundle_hash = std::stoull(s.at("bundle_hash").get<std::string>(), nullptr, 16);
        m.stats.trajectories = s.at("trajectories").get<std::size_t>();
        m.stats.delay_vectors = s.at("delay_vectors").get<std::size_t>();
        m.stats.distinct_vectors = s.at("distinct_vectors").get<std::size_t>();
        m.stats.dynamic_nodes = s.at("dynamic_nodes").get<std::size_t>();
        m.stats.epsilon = s.at("epsilon").get<double>();
        m.stats.false_neighbors = s.at("false_neighbors").get<double>();
        m.stats.increment_conflict = s.at("increment_conflict").get<double>();
        m.stats.lipschitz = s.at("lipschitz").get<double>();
        m.input_map = interp_from(j.at("input_map"));
        m.dynamic = interp_from(j.at("dynamic"));
        m.observer = interp_from(j.at("observer"));
        if (m.input_map.p() != m.n0 || m.input_map.q() != m.d || m.dynamic.p() != m.d || m.dynamic.q() != m.d ||
            m.observer.p() != m.d || m.observer.q() != m.m)
            throw Error(ErrorCode::corrupt_file, path + ": interpolant dimensions disagree with the header");
        return m;
    } catch (const json::exception &e) {
        throw Error(ErrorCode::corrupt_file, path + ": " + e.what());
    } catch (const std::invalid_argument &e) {
        throw Error(ErrorCode::corrupt_file, path + ": " + e.what());
    }
}

} // namespace closedobs
