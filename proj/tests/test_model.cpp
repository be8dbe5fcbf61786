#include "closedobs/error.hpp"
#include "closedobs/generators.hpp"
#include "closedobs/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace closedobs;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string &name) {
    fs::create_directories(CLOSEDOBS_TEST_TMP);
    return (fs::path(CLOSEDOBS_TEST_TMP) / name).string();
}

std::string slurp(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TrajectoryBundle small_spiral() {
    SpiralConfig sc;
    sc.grid = 7;
    sc.dt = 0.1;
    sc.t_end = 1.5;
    return gen_spiral(sc);
}

ErrorCode code_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    ADD_FAILURE() << "expected closedobs::Error";
    return ErrorCode::invalid_argument;
}

} // namespace

TEST(Model, SpiralModelShapes) {
    ModelConfig cfg;
    cfg.T = 3;
    const auto model = build_model(small_spiral(), cfg);
    EXPECT_EQ(model.d, 1u);
    EXPECT_EQ(model.n0, 2u);
    EXPECT_EQ(model.m, 1u);
    EXPECT_EQ(model.input_map.p(), 2u);
    EXPECT_EQ(model.observer.q(), 1u);
    EXPECT_EQ(model.dynamic.p(), 1u);
    EXPECT_NEAR(model.eigenvalues.front(), 1.0, 1e-12);
    EXPECT_EQ(model.stats.trajectories, 49u);
    EXPECT_EQ(model.stats.delay_vectors, 49u * 14u);
    // Inputs on the same circle produce identical series, so delay vectors merge.
    EXPECT_LT(model.stats.distinct_vectors, model.stats.delay_vectors);
}

TEST(Model, IterateReproducesTrainingSeries) {
    const auto bundle = small_spiral();
    for (Scheme scheme : {Scheme::one_sided, Scheme::central}) {
        ModelConfig cfg;
        cfg.T = 3;
        cfg.scheme = scheme;
        const auto model = build_model(bundle, cfg);
        for (const auto &tr : bundle.trajectories) {
            const std::size_t n = tr.length() - cfg.T;
            const auto sim = simulate(model, tr.input, n);
            ASSERT_EQ(sim.observations.size(), n + 1);
            if (scheme == Scheme::central) continue; // central increments are not exact successor steps
            for (std::size_t k = 0; k <= n; ++k)
                EXPECT_NEAR(sim.observations[k](0), tr.observations[k][0], 1e-9 * std::max(1.0, tr.observations[0][0]));
        }
    }
}

TEST(Model, SaveLoadPreservesPredictionsBitwise) {
    ModelConfig cfg;
    cfg.T = 3;
    cfg.input_interp.method = InterpMethod::polyharmonic;
    cfg.input_interp.order = 2;
    cfg.input_interp.standardize = true;
    cfg.dynamic_interp.method = InterpMethod::rbf_gaussian;
    cfg.dynamic_interp.local_width = true;
    cfg.dynamic_interp.ridge = 1e-12;
    cfg.observer_interp.method = InterpMethod::nearest;
    const auto model = build_model(small_spiral(), cfg);
    const auto path = tmp_path("model.json");
    save_model(model, path);
    const auto loaded = load_model(path);
    EXPECT_EQ(loaded.d, model.d);
    EXPECT_EQ(loaded.stats.bundle_hash, model.stats.bundle_hash);
    EXPECT_EQ(model_config_to_json(loaded.config), model_config_to_json(model.config));
    for (const RealVector &x0 : {RealVector{0.3, 0.4}, RealVector{-0.9, 0.1}}) {
        const auto a = simulate(model, x0, 12, Integrator::rk4), b = simulate(loaded, x0, 12, Integrator::rk4);
        for (std::size_t k = 0; k < a.observations.size(); ++k) EXPECT_EQ(a.observations[k], b.observations[k]);
    }
    // Saving the loaded model again gives the same bytes.
    const auto again = tmp_path("model_again.json");
    save_model(loaded, again);
    EXPECT_EQ(slurp(path), slurp(again));
}

TEST(Model, ConfigJsonRoundTrip) {
    ModelConfig cfg;
    cfg.T = 9;
    cfg.dmaps.kernel.median_factor = 2.5;
    cfg.dmaps.truncation.rule = PruningRule::local_regression;
    cfg.observer_interp.method = InterpMethod::nearest;
    cfg.scheme = Scheme::central;
    const auto back = model_config_from_json(model_config_to_json(cfg));
    EXPECT_EQ(back.T, 9u);
    EXPECT_EQ(back.dmaps.truncation.rule, PruningRule::local_regression);
    EXPECT_EQ(back.observer_interp.method, InterpMethod::nearest);
    EXPECT_EQ(model_config_to_json(back), model_config_to_json(cfg));
    EXPECT_EQ(code_of([] { model_config_from_json("{"); }), ErrorCode::malformed_input);
}

TEST(Model, LoadFailures) {
    EXPECT_EQ(code_of([] { load_model(tmp_path("missing_model.json")); }), ErrorCode::io_failure);

    const auto garbage = tmp_path("garbage.json");
    std::ofstream(garbage) << "not json";
    EXPECT_EQ(code_of([&] { load_model(garbage); }), ErrorCode::corrupt_file);

    ModelConfig cfg;
    cfg.T = 3;
    const auto path = tmp_path("versioned.json");
    save_model(build_model(small_spiral(), cfg), path);
    const std::string text = std::regex_replace(slurp(path), std::regex("\"version\":1"), "\"version\":99");
    const auto bumped = tmp_path("bumped.json");
    std::ofstream(bumped, std::ios::binary) << text;
    EXPECT_EQ(code_of([&] { load_model(bumped); }), ErrorCode::version_mismatch);

    const std::string cut = slurp(path).substr(0, 200);
    const auto truncated = tmp_path("truncated.json");
    std::ofstream(truncated, std::ios::binary) << cut;
    EXPECT_EQ(code_of([&] { load_model(truncated); }), ErrorCode::corrupt_file);
}

TEST(Model, BuildAndSimulateErrors) {
    ModelConfig cfg;
    cfg.T = 15; // trajectories have 16 observations
    cfg.scheme = Scheme::central;
    EXPECT_EQ(code_of([&] { build_model(small_spiral(), cfg); }), ErrorCode::too_short);
    cfg.T = 40;
    cfg.scheme = Scheme::one_sided;
    EXPECT_EQ(code_of([&] { build_model(small_spiral(), cfg); }), ErrorCode::too_short);

    cfg.T = 3;
    const auto model = build_model(small_spiral(), cfg);
    EXPECT_EQ(code_of([&] { simulate(model, {1.0}, 3); }), ErrorCode::invalid_argument);
}

TEST(Model, FarInputsAreFlaggedAsExtrapolation) {
    ModelConfig cfg;
    cfg.T = 3;
    const auto bundle = small_spiral();
    const auto model = build_model(bundle, cfg);
    // Iterating from a training input lands on dynamic nodes at every step.
    EXPECT_EQ(simulate(model, bundle.trajectories[10].input, 5).extrapolated_steps(), 0u);
    const auto far = simulate(model, {40.0, -30.0}, 5);
    EXPECT_TRUE(far.extrapolated.front());
}

TEST(Model, SchemeAndIntegratorNames) {
    EXPECT_EQ(scheme_from_string(to_string(Scheme::central)), Scheme::central);
    EXPECT_EQ(integrator_from_string(to_string(Integrator::rk4)), Integrator::rk4);
    EXPECT_THROW(scheme_from_string("backward"), Error);
    EXPECT_THROW(integrator_from_string("euler"), Error);
}
