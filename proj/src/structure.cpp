#include "agesched/structure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace agesched {

namespace {

constexpr double kWaitEps = 1e-9;

bool has_mass(int x, const SystemModel& model) {
    return model.mode == Mode::kPts ? model.dist.pmf(x) > 0.0 : model.dist.survival(x) > 0.0;
}

} // namespace

WaterfillingReport check_waterfilling(const QuantizedPolicy& policy,
                                      const QuantizedStateSpace& grid) {
    WaterfillingReport r;
    int last = -1;
    for (int q = 0; q < policy.size(); ++q)
        if (policy[q].z > kWaitEps)
            last = q;
    if (last < 0)
        return r;
    r.waits = true;
    r.hat_y = grid.midpoint(last) + policy[last].z;
    for (int q = 0; q < policy.size(); ++q) {
        const double expected = std::max(0.0, r.hat_y - grid.midpoint(q));
        r.max_dev = std::max(r.max_dev, std::abs(policy[q].z - expected));
        if (q + 1 < policy.size() && policy[q].z > kWaitEps && policy[q + 1].z > kWaitEps) {
            const double slope = (policy[q + 1].z - policy[q].z) / grid.delta();
            r.slope_dev = std::max(r.slope_dev, std::abs(slope + 1.0));
        }
    }
    return r;
}

bool bounds_inactive(const QuantizedPolicy& policy, const PowerModel& power) {
    for (const Action& a : policy.actions)
        for (double t : a.tau)
            if (t - power.tau_min < 1e-3 || power.tau_max - t < 1e-3)
                return false;
    return true;
}

int check_tau_monotonicity(const QuantizedPolicy& policy, const SystemModel& model) {
    constexpr double kSlack = 1e-6;
    const int b = model.b();
    int violations = 0;
    for (const Action& a : policy.actions) {
        for (int x = 1; x <= b; ++x) {
            if (!has_mass(x, model))
                continue;
            for (int xp = x + 1; xp <= b; ++xp) {
                if (!has_mass(xp, model))
                    continue;
                const double tx = a.tau[x - 1];
                const double txp = a.tau[xp - 1];
                bool ok = txp <= tx + kSlack;
                if (model.mode == Mode::kPts)
                    ok = ok && static_cast<double>(x) / xp * tx <= txp + kSlack;
                violations += ok ? 0 : 1;
            }
        }
    }
    return violations;
}

double check_tau_constancy_below_threshold(const QuantizedPolicy& policy,
                                           const QuantizedStateSpace& grid,
                                           const SystemModel& model, double hat_y) {
    double worst = 0.0;
    for (int x = 1; x <= model.b(); ++x) {
        if (!has_mass(x, model))
            continue;
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (int q = 0; q < policy.size() && grid.midpoint(q) < hat_y; ++q) {
            lo = std::min(lo, policy[q].tau[x - 1]);
            hi = std::max(hi, policy[q].tau[x - 1]);
        }
        if (hi > 0.0)
            worst = std::max(worst, (hi - lo) / hi);
    }
    return worst;
}

double H_alpha(double u, const PowerModel& power) {
    if (std::isinf(u) && u > 0.0)
        return power.tau_max;
    if (!(u > 0.0))
        return power.tau_min;
    const double t = std::pow(u, (power.alpha - 1.0) / (power.alpha + 1.0));
    return std::clamp(t, power.tau_min, power.tau_max);
}

std::optional<double> fixed_point_residual(const QuantizedPolicy& policy,
                                           const ValueFunction& value, double lambda_star,
                                           const SystemModel& model,
                                           const QuantizedStateSpace& grid) {
    if (!(lambda_star > 0.0))
        return std::nullopt;
    const double alpha = model.power.alpha;
    const int b = model.b();
    const double numerator = 2.0 * lambda_star / (alpha - 1.0);
    double worst = 0.0;
    for (int q = 0; q < policy.size(); ++q) {
        const Action& a = policy[q];
        const double wait_end = grid.midpoint(q) + a.z;
        for (int x = 1; x <= b; ++x) {
            double psi;
            if (model.mode == Mode::kPts) {
                psi = value.slope_at(x * a.tau[x - 1], grid);
            } else {
                const double mass = model.dist.survival(x);
                if (mass <= 0.0)
                    continue;
                double weighted = 0.0;
                for (int k = x; k <= b; ++k)
                    weighted += model.dist.pmf(k) *
                                value.slope_at(service_time(k, a.tau, Mode::kUts), grid);
                psi = weighted / mass;
            }
            const double denom = psi + wait_end;
            const double u = denom > 0.0 ? numerator / denom
                                         : std::numeric_limits<double>::infinity();
            worst = std::max(worst, std::abs(a.tau[x - 1] - H_alpha(u, model.power)));
        }
    }
    return worst;
}

namespace {

void check_fixed_size_inputs(int b, double alpha, double p_bar) {
    if (b < 1)
        throw std::domain_error("b must be >= 1");
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::domain_error("alpha must lie in (1, 2]");
    if (!(p_bar > 0.0) || !std::isfinite(p_bar))
        throw std::domain_error("p_bar must be positive");
}

} // namespace

FixedSizeSolution closed_form_fixed_size(int b, double alpha, double p_bar) {
    check_fixed_size_inputs(b, alpha, p_bar);
    const double tau = std::pow((alpha - 1.0) * p_bar, (1.0 - alpha) / (1.0 + alpha));
    return {tau, 0.0, 1.5 * b * tau};
}

FixedSizeSolution constrained_fixed_size(int b, double alpha, double p_bar) {
    check_fixed_size_inputs(b, alpha, p_bar);
    const double tau = std::pow(p_bar, -(alpha - 1.0) / (alpha + 1.0));
    return {tau, 0.0, 1.5 * b * tau};
}

bool StructureReport::passed() const {
    const double tol = 2.0 * delta_y;
    if (waterfilling.max_dev > tol)
        return false;
    if (bounds_inactive && tau_monotonicity_violations > 0)
        return false;
    if (fixed_point_max_residual && *fixed_point_max_residual > tol)
        return false;
    return true;
}

StructureReport analyze_structure(const SolveResult& result, const SystemModel& model,
                                  const QuantizedStateSpace& grid) {
    StructureReport r;
    r.delta_y = grid.delta();
    r.waterfilling = check_waterfilling(result.policy, grid);
    r.bounds_inactive = bounds_inactive(result.policy, model.power);
    r.tau_monotonicity_violations = check_tau_monotonicity(result.policy, model);
    r.tau_constancy =
        check_tau_constancy_below_threshold(result.policy, grid, model, r.waterfilling.hat_y);
    r.fixed_point_max_residual =
        fixed_point_residual(result.policy, result.value, result.lambda_star, model, grid);
    return r;
}

} // namespace agesched
