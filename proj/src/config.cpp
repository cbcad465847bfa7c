#include "agesched/config.hpp"

#include "agesched/policy.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace agesched {

namespace {

void reject_unknown(const YAML::Node& node, const std::string& section,
                    const std::set<std::string>& known) {
    if (!node.IsMap())
        throw ConfigError("section '" + section + "' must be a mapping");
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!known.contains(key))
            throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
    }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& section) {
    if (!node[key])
        return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("bad value for '" + section + "." + key + "'");
    }
}

std::vector<double> read_list_or_scalar(const YAML::Node& node, const std::string& name) {
    try {
        if (node.IsSequence())
            return node.as<std::vector<double>>();
        return {node.as<double>()};
    } catch (const YAML::Exception&) {
        throw ConfigError("bad value for '" + name + "'");
    }
}

void parse_model(const YAML::Node& node, RunConfig& cfg) {
    reject_unknown(node, "model",
                   {"mode", "b", "pmf", "uniform", "alpha", "p_bar", "tau_min", "tau_max"});
    std::string mode = "uts";
    read(node, "mode", mode, "model");
    try {
        cfg.mode = parse_mode(mode);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    std::optional<int> b;
    if (node["b"])
        b = node["b"].as<int>();
    if (node["pmf"] && node["uniform"])
        throw ConfigError("give either model.pmf or model.uniform, not both");
    if (node["pmf"]) {
        cfg.pmf = read_list_or_scalar(node["pmf"], "model.pmf");
        if (b && *b != static_cast<int>(cfg.pmf.size()))
            throw ConfigError("model.b does not match the length of model.pmf");
    } else if (node["uniform"]) {
        const auto range = node["uniform"].as<std::vector<int>>();
        if (range.size() != 2 || !b)
            throw ConfigError("model.uniform needs [lo, hi] and model.b");
        try {
            const TaskSizeDistribution d = TaskSizeDistribution::uniform(range[0], range[1], *b);
            cfg.pmf.assign(d.pmf().begin(), d.pmf().end());
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else if (b) {
        if (*b < 1)
            throw ConfigError("model.b must be >= 1");
        cfg.pmf.assign(*b, 0.0);
        cfg.pmf.back() = 1.0;
    } else {
        throw ConfigError("model needs pmf, uniform or b");
    }
    read(node, "alpha", cfg.alpha, "model");
    read(node, "tau_min", cfg.tau_min, "model");
    read(node, "tau_max", cfg.tau_max, "model");
    if (node["p_bar"])
        cfg.p_bar = read_list_or_scalar(node["p_bar"], "model.p_bar");
    if (cfg.p_bar.empty())
        throw ConfigError("model.p_bar must not be empty");
}

void parse_solver(const YAML::Node& node, SolverConfig& s) {
    reject_unknown(node, "solver",
                   {"eps_R", "eps_a", "eps_lambda", "eps_gamma", "s0", "dual_rule",
                    "landing_slopes", "max_value_iterations", "max_benders_iterations",
                    "max_gradient_iterations", "max_dual_iterations",
                    "max_bisection_iterations", "gamma_upper", "threads"});
    read(node, "eps_R", s.eps_R, "solver");
    read(node, "eps_a", s.eps_a, "solver");
    read(node, "eps_lambda", s.eps_lambda, "solver");
    read(node, "eps_gamma", s.eps_gamma, "solver");
    read(node, "s0", s.s0, "solver");
    read(node, "max_value_iterations", s.max_value_iterations, "solver");
    read(node, "max_benders_iterations", s.max_benders_iterations, "solver");
    read(node, "max_gradient_iterations", s.max_gradient_iterations, "solver");
    read(node, "max_dual_iterations", s.max_dual_iterations, "solver");
    read(node, "max_bisection_iterations", s.max_bisection_iterations, "solver");
    read(node, "threads", s.threads, "solver");
    if (node["gamma_upper"]) {
        double g = 0.0;
        read(node, "gamma_upper", g, "solver");
        s.gamma_upper = g;
    }
    if (node["dual_rule"]) {
        const std::string rule = node["dual_rule"].as<std::string>();
        if (rule == "bracketed")
            s.dual_rule = DualStepRule::kBracketed;
        else if (rule == "diminishing")
            s.dual_rule = DualStepRule::kDiminishing;
        else
            throw ConfigError("solver.dual_rule must be 'bracketed' or 'diminishing'");
    }
    if (node["landing_slopes"]) {
        const std::string mode = node["landing_slopes"].as<std::string>();
        if (mode == "refresh")
            s.landing_slopes = LandingSlopes::kRefresh;
        else if (mode == "frozen")
            s.landing_slopes = LandingSlopes::kFrozen;
        else
            throw ConfigError("solver.landing_slopes must be 'refresh' or 'frozen'");
    }
}

void validate(const RunConfig& cfg) {
    try {
        for (double p : cfg.p_bar) {
            cfg.model(p);
            QuantizedStateSpace(cfg.y_max_for(p), cfg.q_max);
        }
        cfg.solver.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.n_epochs < 1)
        throw ConfigError("simulation.n_epochs must be >= 1");
    if (cfg.optimal_wait_grid < 2)
        throw ConfigError("benchmarks.optimal_wait_grid must be >= 2");
    if (cfg.z_max && !(*cfg.z_max > 0.0))
        throw ConfigError("benchmarks.z_max must be positive");
}

} // namespace

SystemModel RunConfig::model(double p_bar) const {
    PowerModel power{alpha, tau_min, tau_max, p_bar};
    power.validate();
    return SystemModel{TaskSizeDistribution(pmf), power, mode};
}

SystemModel RunConfig::model() const {
    if (p_bar.size() != 1)
        throw ConfigError("this command needs a single model.p_bar value, got a sweep of " +
                          std::to_string(p_bar.size()));
    return model(p_bar.front());
}

double RunConfig::y_max_for(double p_bar) const {
    if (y_max)
        return *y_max;
    const double tau = std::pow(p_bar, -(alpha - 1.0) / (alpha + 1.0));
    return 2.0 * static_cast<double>(pmf.size()) * tau;
}

RunConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("YAML parse error: ") + e.what());
    }
    if (!root.IsMap())
        throw ConfigError("config root must be a mapping");
    reject_unknown(root, "<root>",
                   {"model", "grid", "solver", "simulation", "benchmarks", "output"});
    if (!root["model"])
        throw ConfigError("config needs a 'model' section");

    RunConfig cfg;
    try {
        parse_model(root["model"], cfg);
        if (const YAML::Node g = root["grid"]) {
            reject_unknown(g, "grid", {"y_max", "q_max"});
            if (g["y_max"] && !(g["y_max"].IsScalar() && g["y_max"].Scalar() == "auto")) {
                double y = 0.0;
                read(g, "y_max", y, "grid");
                cfg.y_max = y;
            }
            read(g, "q_max", cfg.q_max, "grid");
        }
        if (const YAML::Node s = root["solver"])
            parse_solver(s, cfg.solver);
        if (const YAML::Node s = root["simulation"]) {
            reject_unknown(s, "simulation", {"n_epochs", "seed", "trace"});
            read(s, "n_epochs", cfg.n_epochs, "simulation");
            read(s, "seed", cfg.seed, "simulation");
            read(s, "trace", cfg.trace, "simulation");
        }
        if (const YAML::Node s = root["benchmarks"]) {
            reject_unknown(s, "benchmarks", {"optimal_wait_grid", "z_max"});
            read(s, "optimal_wait_grid", cfg.optimal_wait_grid, "benchmarks");
            if (s["z_max"]) {
                double z = 0.0;
                read(s, "z_max", z, "benchmarks");
                cfg.z_max = z;
            }
        }
        if (const YAML::Node s = root["output"]) {
            reject_unknown(s, "output", {"dir"});
            std::string dir = cfg.output_dir.string();
            read(s, "dir", dir, "output");
            cfg.output_dir = dir;
        }
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

} // namespace agesched
