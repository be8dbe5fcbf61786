#pragma once

#include "closedobs/closedobs.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cli {

using json = nlohmann::ordered_json;

// Flags that override fields of a ModelConfig. Unset flags keep the preset value.
struct InterpFlags {
    std::optional<std::string> method;
    std::optional<std::size_t> k;
    std::optional<double> power, shape, ridge, width;
    std::optional<bool> local_width, standardize;
    std::optional<int> order;

    void apply(closedobs::InterpSpec &spec) const;
};

struct ModelFlags {
    std::string preset = "default";
    std::optional<std::size_t> delay;
    std::optional<double> epsilon, median_factor, lambda_ratio, dependency_residual;
    std::optional<std::string> pruning;
    std::optional<std::size_t> neighbors, max_candidates, landmark_stride;
    std::optional<double> injectivity_tolerance, injectivity_gain, resolution, merge_tolerance;
    std::optional<std::string> scheme;
    std::optional<double> extrapolation_factor;
    InterpFlags all, input, dynamic, observer;

    void add_to(CLI::App &app, bool with_preset);
    closedobs::ModelConfig resolve() const;
};

/// `out.csv` -> `out.config.json` next to it.
std::string provenance_path(const std::string &output);

/// Writes the provenance record for `outputs`. No timestamps, so reruns are byte-identical.
void write_provenance(const std::string &path, const std::string &command, const json &config,
                      const std::vector<std::string> &inputs, const std::vector<std::string> &outputs);

json to_json(const closedobs::ModelConfig &config);
json to_json(const closedobs::TrajectoryBundle &bundle);

void write_text(const std::string &path, const std::string &text);
std::string real(double v); // shortest round-trip decimal

// Subcommands only record their action during parsing; main runs it once the
// global options (--threads) are applied.
void on_run(CLI::App &sub, std::function<void()> action);
std::function<void()> &pending_action();

void add_generate(CLI::App &app);
void add_build(CLI::App &app);
void add_simulate(CLI::App &app);
void add_info(CLI::App &app);
void add_validate(CLI::App &app);

} // namespace cli
