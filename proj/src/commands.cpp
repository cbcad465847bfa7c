#include "agesched/commands.hpp"

#include "agesched/benchmarks.hpp"
#include "agesched/io.hpp"
#include "agesched/simulator.hpp"
#include "agesched/structure.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

namespace agesched {

namespace fs = std::filesystem;

namespace {

SolverConfig capped_solver(const RunConfig& cfg, int cap) {
    SolverConfig s = cfg.solver;
    s.threads = s.threads > 0 ? std::min(s.threads, cap) : cap;
    return s;
}

bool is_benchmark_name(const std::string& name) {
    return name == "zero_wait" || name == "optimal_wait" || name == "dvs_pts" ||
           name == "dvs_uts";
}

BenchmarkResult make_benchmark(const std::string& name, const SystemModel& model,
                               const RunConfig& cfg) {
    if (name == "zero_wait")
        return zero_wait_constant_speed(model);
    if (name == "optimal_wait")
        return optimal_wait_constant_speed(model, {cfg.z_max, cfg.optimal_wait_grid, true});
    if (name == "dvs_pts")
        return dvs_pts(model);
    return dvs_uts(model);
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    return nlohmann::json::parse(in);
}

} // namespace

int thread_cap() {
    if (const char* env = std::getenv("AGE_SCHED_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_solve(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    try {
        const SystemModel model = cfg.model();
        const QuantizedStateSpace grid(cfg.y_max_for(model.power.p_bar), cfg.q_max);
        fs::create_directories(out);
        const SolveResult r = dinkelbach_solve(model, grid, capped_solver(cfg, thread_cap()));
        const StructureReport structure = analyze_structure(r, model, grid);

        write_file_atomic(out / "policy.csv", policy_csv(r.policy, grid));
        write_file_atomic(out / "value.csv", value_csv(r.value, grid));
        nlohmann::json result = {{"gamma_star", r.gamma_star},
                                 {"lambda_star", r.lambda_star},
                                 {"mode", std::string(to_string(model.mode))},
                                 {"p_bar", model.power.p_bar},
                                 {"y_max", grid.y_max()},
                                 {"q_max", grid.size()},
                                 {"iterations", r.diagnostics.bisection_iterations},
                                 {"J_residual", r.diagnostics.J_residual},
                                 {"clamp_mass", r.diagnostics.clamp_mass},
                                 {"diagnostics", to_json(r.diagnostics)},
                                 {"structure", to_json(structure)}};
        write_file_atomic(out / "result.json", result.dump(2) + "\n");

        log << "gamma* = " << format_double(r.gamma_star)
            << "  lambda* = " << format_double(r.lambda_star) << '\n';
        for (const std::string& w : r.diagnostics.warnings)
            log << "warning: " << w << '\n';
        return r.diagnostics.converged ? kExitOk : kExitInfeasible;
    } catch (const InfeasibleError& e) {
        log << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const ConvergenceError& e) {
        log << "not converged: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

int cmd_simulate(const RunConfig& cfg, const std::string& policy, const fs::path& out,
                 std::optional<std::uint64_t> seed, std::ostream& log) {
    try {
        SystemModel model = cfg.model();
        SimulationOptions opts{cfg.n_epochs, seed.value_or(cfg.seed), cfg.trace};
        std::optional<PolicyFunction> rule;
        std::string source = policy;
        if (is_benchmark_name(policy)) {
            BenchmarkResult b = make_benchmark(policy, model, cfg);
            model.mode = b.mode;
            rule = std::move(b.policy);
        } else {
            const QuantizedStateSpace grid(cfg.y_max_for(model.power.p_bar), cfg.q_max);
            QuantizedPolicy table = read_policy_csv(policy, grid);
            for (const Action& a : table.actions)
                model.check_action(a);
            rule = PolicyFunction::from_quantized(std::move(table), grid);
        }
        fs::create_directories(out);
        const SimulationReport report = simulate(*rule, model, opts);
        nlohmann::json j = to_json(report);
        j["policy"] = source;
        j["mode"] = std::string(to_string(model.mode));
        write_file_atomic(out / "sim.json", j.dump(2) + "\n");
        if (cfg.trace)
            write_file_atomic(out / "trace.csv", trace_csv(report));
        log << "avg AoI = " << format_double(report.avg_aoi)
            << "  avg power = " << format_double(report.avg_power) << '\n';
        return kExitOk;
    } catch (const InfeasibleError& e) {
        log << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

namespace {

struct Cell {
    double p_bar = 0.0;
    std::string policy;
};

const char* const kComparePolicies[] = {"age_minimal_pts", "age_minimal_uts", "zero_wait",
                                        "optimal_wait",    "dvs_pts",         "dvs_uts"};

std::string run_cell(const Cell& cell, const RunConfig& cfg, int solver_threads) {
    std::string analytic_aoi;
    std::string analytic_power;
    std::string status = "ok";
    std::optional<SimulationReport> sim;
    try {
        SystemModel model = cfg.model(cell.p_bar);
        SimulationOptions opts{cfg.n_epochs, cfg.seed, false};
        if (cell.policy.starts_with("age_minimal")) {
            model.mode = cell.policy == "age_minimal_pts" ? Mode::kPts : Mode::kUts;
            const QuantizedStateSpace grid(cfg.y_max_for(cell.p_bar), cfg.q_max);
            SolverConfig s = cfg.solver;
            s.threads = solver_threads;
            const SolveResult r = dinkelbach_solve(model, grid, s);
            analytic_aoi = format_double(r.gamma_star);
            analytic_power = format_double(r.diagnostics.policy_power);
            if (!r.diagnostics.converged)
                status = "not_converged";
            sim = simulate(PolicyFunction::from_quantized(r.policy, grid), model, opts);
        } else {
            BenchmarkResult b = make_benchmark(cell.policy, model, cfg);
            model.mode = b.mode;
            analytic_aoi = b.analytic_aoi ? format_double(*b.analytic_aoi) : "";
            analytic_power = format_double(b.analytic_power);
            sim = simulate(b.policy, model, opts);
        }
    } catch (const std::exception& e) {
        status = std::string("error: ") + e.what();
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
    }
    return format_double(cell.p_bar) + ',' + cell.policy + ',' + analytic_aoi + ',' +
           (sim ? format_double(sim->avg_aoi) : "") + ',' + analytic_power + ',' +
           (sim ? format_double(sim->avg_power) : "") + ',' + status + '\n';
}

} // namespace

int cmd_compare(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    std::vector<Cell> cells;
    for (double p : cfg.p_bar)
        for (const char* name : kComparePolicies)
            cells.push_back({p, name});

    try {
        const fs::path cell_dir = out / "cells";
        fs::create_directories(cell_dir);
        const int workers = std::min<int>(thread_cap(), static_cast<int>(cells.size()));
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < cells.size(); i = next++) {
                const std::string row = run_cell(cells[i], cfg, 1);
                write_file_atomic(cell_dir / ("cell_" + std::to_string(i) + ".csv"), row);
            }
        };
        {
            std::vector<std::jthread> pool;
            for (int t = 1; t < workers; ++t)
                pool.emplace_back(work);
            work();
        }

        std::string table =
            "p_bar,policy,analytic_aoi,sim_aoi,analytic_power,sim_power,status\n";
        int failures = 0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const fs::path part = cell_dir / ("cell_" + std::to_string(i) + ".csv");
            std::ifstream in(part);
            std::ostringstream row;
            row << in.rdbuf();
            if (row.str().find(",ok\n") == std::string::npos)
                ++failures;
            table += row.str();
        }
        write_file_atomic(out / "comparison.csv", table);
        fs::remove_all(cell_dir);
        log << "wrote " << cells.size() << " rows";
        if (failures)
            log << " (" << failures << " with errors)";
        log << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

int cmd_verify(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
    SolveResult r;
    SystemModel model = cfg.model(cfg.p_bar.front());
    std::optional<QuantizedStateSpace> grid;
    try {
        model = cfg.model();
        grid.emplace(cfg.y_max_for(model.power.p_bar), cfg.q_max);
        const nlohmann::json result = read_json(out / "result.json");
        r.gamma_star = result.at("gamma_star").get<double>();
        r.lambda_star = result.at("lambda_star").get<double>();
        r.policy = read_policy_csv(out / "policy.csv", *grid);
        for (const Action& a : r.policy.actions)
            model.check_action(a);
        r.value.values = read_value_csv(out / "value.csv", *grid);
        r.value.slopes = envelope_slopes(r.policy, r.gamma_star, r.lambda_star, model, *grid);
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    }
    const StructureReport report = analyze_structure(r, model, *grid);
    try {
        write_file_atomic(out / "structure.json", to_json(report).dump(2) + "\n");
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    }
    log << "water-filling dev " << format_double(report.waterfilling.max_dev)
        << ", ordering violations " << report.tau_monotonicity_violations
        << (report.bounds_inactive ? "" : " (bounds active, not enforced)") << ", fixed point "
        << (report.fixed_point_max_residual ? format_double(*report.fixed_point_max_residual)
                                            : std::string("skipped"))
        << '\n';
    log << (report.passed() ? "PASS" : "FAIL") << '\n';
    return report.passed() ? kExitOk : kExitVerifyFailed;
}

int cmd_oracle(int b, double alpha, double p_bar, std::ostream& out) {
    try {
        const FixedSizeSolution closed = closed_form_fixed_size(b, alpha, p_bar);
        const FixedSizeSolution bound = constrained_fixed_size(b, alpha, p_bar);
        const nlohmann::json j = {
            {"b", b},
            {"alpha", alpha},
            {"p_bar", p_bar},
            {"closed_form", {{"tau_star", closed.tau}, {"z_star", closed.z}, {"gamma_star", closed.gamma}}},
            {"zero_wait_feasible", {{"tau_star", bound.tau}, {"z_star", bound.z}, {"gamma_star", bound.gamma}}}};
        out << j.dump(2) << '\n';
        return kExitOk;
    } catch (const std::exception& e) {
        out << "error: " << e.what() << '\n';
        return kExitInput;
    }
}

} // namespace agesched
