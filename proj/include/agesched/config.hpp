#pragma once

// Run configuration loaded from a YAML file. Sections: model, grid, solver,
// simulation, benchmarks, output. Unknown keys are rejected.

#include "agesched/model.hpp"
#include "agesched/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace agesched {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    Mode mode = Mode::kUts;
    std::vector<double> pmf;
    double alpha = 2.0;
    double tau_min = 1e-6;
    double tau_max = 1e3;
    /// One entry for solve/simulate; compare sweeps over all of them.
    std::vector<double> p_bar{1.0};

    /// Upper end of the state grid; unset means "auto": 2 b tau*(p_bar), twice
    /// the longest task at the zero-wait constant speed.
    std::optional<double> y_max;
    int q_max = 50;

    SolverConfig solver;

    long long n_epochs = 1000000;
    std::uint64_t seed = 42;
    bool trace = false;

    int optimal_wait_grid = 200;
    std::optional<double> z_max;

    std::filesystem::path output_dir = "out";

    /// Model for one budget value.
    SystemModel model(double p_bar) const;
    /// Model for the single configured budget; throws ConfigError on a sweep.
    SystemModel model() const;
    double y_max_for(double p_bar) const;
};

/// Throws ConfigError on unreadable files, unknown keys, bad types or values
/// that break a model, grid or solver invariant.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& yaml_text);

} // namespace agesched
