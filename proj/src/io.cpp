#include "agesched/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace agesched {

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        cells.push_back(cell);
    return cells;
}

double parse_number(const std::string& cell, int line_no) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::runtime_error("line " + std::to_string(line_no) + ": bad number '" + cell +
                                 "'");
    return v;
}

// Data rows of a CSV with a header, each already split and checked for width.
std::vector<std::vector<double>> parse_table(const std::string& text, std::size_t min_cols) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty table");
    const std::size_t width = split(line).size();
    if (width < min_cols)
        throw std::runtime_error("table header has too few columns");
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != width)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(width) + " columns");
        std::vector<double> row;
        for (const std::string& c : cells)
            row.push_back(parse_number(c, line_no));
        rows.push_back(std::move(row));
    }
    return rows;
}

void check_grid_row(const std::vector<double>& row, int q, const QuantizedStateSpace& grid) {
    if (row[0] != q + 1 ||
        std::abs(row[1] - grid.midpoint(q)) > 1e-9 * std::max(1.0, grid.y_max()))
        throw std::runtime_error("row " + std::to_string(q + 1) +
                                 " does not match the configured state grid");
}

} // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush())
            throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string policy_csv(const QuantizedPolicy& policy, const QuantizedStateSpace& grid) {
    const int b = policy.size() ? static_cast<int>(policy[0].tau.size()) : 0;
    std::string out = "q,y_mid,z";
    for (int x = 1; x <= b; ++x)
        out += ",tau_" + std::to_string(x);
    out += '\n';
    for (int q = 0; q < policy.size(); ++q) {
        out += std::to_string(q + 1) + ',' + format_double(grid.midpoint(q)) + ',' +
               format_double(policy[q].z);
        for (double t : policy[q].tau)
            out += ',' + format_double(t);
        out += '\n';
    }
    return out;
}

QuantizedPolicy parse_policy_csv(const std::string& text, const QuantizedStateSpace& grid) {
    const auto rows = parse_table(text, 4);
    if (static_cast<int>(rows.size()) != grid.size())
        throw std::runtime_error("policy has " + std::to_string(rows.size()) +
                                 " rows, grid has " + std::to_string(grid.size()));
    QuantizedPolicy policy;
    for (int q = 0; q < grid.size(); ++q) {
        const auto& row = rows[q];
        check_grid_row(row, q, grid);
        policy.actions.push_back(Action{row[2], std::vector<double>(row.begin() + 3, row.end())});
    }
    return policy;
}

QuantizedPolicy read_policy_csv(const std::filesystem::path& path,
                                const QuantizedStateSpace& grid) {
    return parse_policy_csv(read_text(path), grid);
}

std::string value_csv(const ValueFunction& value, const QuantizedStateSpace& grid) {
    std::string out = "q,y_mid,R\n";
    for (int q = 0; q < grid.size(); ++q)
        out += std::to_string(q + 1) + ',' + format_double(grid.midpoint(q)) + ',' +
               format_double(value.values[q]) + '\n';
    return out;
}

std::vector<double> read_value_csv(const std::filesystem::path& path,
                                   const QuantizedStateSpace& grid) {
    const auto rows = parse_table(read_text(path), 3);
    if (static_cast<int>(rows.size()) != grid.size())
        throw std::runtime_error("value table size does not match the grid");
    std::vector<double> values;
    for (int q = 0; q < grid.size(); ++q) {
        check_grid_row(rows[q], q, grid);
        values.push_back(rows[q][2]);
    }
    return values;
}

std::string trace_csv(const SimulationReport& report) {
    std::string out = "n,y,z,x,L,area,W\n";
    for (const EpochRecord& e : report.trace)
        out += std::to_string(e.n) + ',' + format_double(e.y) + ',' + format_double(e.z) + ',' +
               std::to_string(e.x) + ',' + format_double(e.service) + ',' +
               format_double(e.area) + ',' + format_double(e.energy) + '\n';
    return out;
}

nlohmann::json to_json(const SolveDiagnostics& d) {
    nlohmann::json trace = nlohmann::json::array();
    for (const BisectionStep& s : d.trace)
        trace.push_back({{"gamma", s.gamma},
                         {"lambda", s.lambda},
                         {"J", s.J},
                         {"dual_iterations", s.dual_iterations},
                         {"value_sweeps", s.value_sweeps}});
    return {{"converged", d.converged},
            {"bisection_iterations", d.bisection_iterations},
            {"dual_iterations", d.dual_iterations},
            {"value_sweeps", d.value_sweeps},
            {"value_iterations", d.value_iterations},
            {"value_span", d.value_span},
            {"value_stalled", d.value_stalled},
            {"bellman_residual", d.bellman_residual},
            {"J_residual", d.J_residual},
            {"J_tolerance", d.J_tolerance},
            {"constraint_slack", d.constraint_slack},
            {"clamp_mass", d.clamp_mass},
            {"policy_aoi", d.policy_aoi},
            {"policy_power", d.policy_power},
            {"y_support", {d.support_min, d.support_max}},
            {"bisection_trace", trace},
            {"warnings", d.warnings}};
}

nlohmann::json to_json(const StructureReport& r) {
    nlohmann::json j = {{"threshold_hat_y", r.waterfilling.hat_y},
                        {"waits", r.waterfilling.waits},
                        {"waterfill_max_dev", r.waterfilling.max_dev},
                        {"slope_dev", r.waterfilling.slope_dev},
                        {"bounds_inactive", r.bounds_inactive},
                        {"tau_monotonicity_violations", r.tau_monotonicity_violations},
                        {"tau_monotonicity_checked", r.bounds_inactive},
                        {"tau_constancy_below_threshold", r.tau_constancy},
                        {"delta_y", r.delta_y},
                        {"passed", r.passed()}};
    if (r.fixed_point_max_residual)
        j["fixed_point_max_residual"] = *r.fixed_point_max_residual;
    else
        j["fixed_point_max_residual"] = nullptr;
    return j;
}

nlohmann::json to_json(const SimulationReport& r) {
    return {{"n_epochs", r.n_epochs},
            {"warmup_epochs", r.warmup_epochs},
            {"seed", r.seed},
            {"rng", "splitmix64-counter"},
            {"avg_aoi", r.avg_aoi},
            {"avg_power", r.avg_power},
            {"y_support", {r.y_min, r.y_max}}};
}

} // namespace agesched
