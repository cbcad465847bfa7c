#include "agesched/benchmarks.hpp"

#include "agesched/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace agesched {

namespace {

// Solves decreasing(t) = target for t in [lo, hi] by bisection in log t.
template <class F>
double bisect_decreasing(F&& fn, double target, double lo, double hi) {
    for (int it = 0; it < 200 && hi / lo - 1.0 > 1e-15; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (fn(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

double constant_speed(const PowerModel& p) {
    return std::pow(p.p_bar, -(p.alpha - 1.0) / (p.alpha + 1.0));
}

void require_in_bounds(double tau, const PowerModel& p, const char* what) {
    if (tau < p.tau_min || tau > p.tau_max)
        throw InfeasibleError(std::string(what) + ": calibrated batch time " +
                              std::to_string(tau) + " lies outside [tau_min, tau_max]");
}

} // namespace

double renewal_zero_wait_aoi(std::span<const double> tau, const TaskSizeDistribution& dist,
                             Mode mode) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (int x = 1; x <= dist.max_size(); ++x) {
        const double l = service_time(x, tau, mode);
        m1 += dist.pmf(x) * l;
        m2 += dist.pmf(x) * l * l;
    }
    return m1 + m2 / (2.0 * m1);
}

BenchmarkResult zero_wait_constant_speed(const SystemModel& model) {
    const PowerModel& p = model.power;
    const double tau = constant_speed(p);
    require_in_bounds(tau, p, "zero-wait constant speed");
    BenchmarkResult r;
    r.name = "zero_wait";
    r.mode = model.mode;
    r.tau.assign(model.b(), tau);
    const TaskSizeDistribution& d = model.dist;
    r.analytic_aoi = tau * (d.variance() / (2.0 * d.mean()) + 1.5 * d.mean());
    r.analytic_power = batch_energy(tau, p.alpha) / tau;
    r.policy = PolicyFunction::constant(Action{0.0, r.tau});
    return r;
}

BenchmarkResult dvs_uts(const SystemModel& model) {
    const PowerModel& p = model.power;
    const TaskSizeDistribution& d = model.dist;
    const int b = model.b();
    const double exponent = (p.alpha - 1.0) / (p.alpha + 1.0);
    std::vector<double> share(b);
    double total = 0.0;
    for (int x = 1; x <= b; ++x) {
        share[x - 1] = std::pow(d.survival(x), exponent);
        total += share[x - 1];
    }
    for (double& s : share)
        s /= total;

    auto schedule = [&](double deadline) {
        std::vector<double> tau(b);
        for (int x = 0; x < b; ++x)
            tau[x] = deadline * share[x];
        return tau;
    };
    auto power = [&](double deadline) {
        const std::vector<double> tau = schedule(deadline);
        return expected_energy(tau, d, Mode::kUts, p.alpha) /
               expected_service_time(tau, d, Mode::kUts);
    };

    // Sizes beyond the support get share 0; they never run, so only the
    // positive shares constrain the deadline range.
    double smallest = std::numeric_limits<double>::infinity();
    double largest = 0.0;
    for (double s : share)
        if (s > 0.0) {
            smallest = std::min(smallest, s);
            largest = std::max(largest, s);
        }
    const double t_lo = p.tau_min / smallest;
    const double t_hi = p.tau_max / largest;
    if (!(t_lo <= t_hi) || power(t_lo) < p.p_bar || power(t_hi) > p.p_bar)
        throw InfeasibleError("dvs_uts: power budget not reachable within the speed bounds");
    const double deadline = bisect_decreasing(power, p.p_bar, t_lo, t_hi);

    BenchmarkResult r;
    r.name = "dvs_uts";
    r.mode = Mode::kUts;
    r.deadline = deadline;
    r.tau = schedule(deadline);
    for (double& t : r.tau)
        t = std::clamp(t, p.tau_min, p.tau_max);
    r.analytic_aoi = renewal_zero_wait_aoi(r.tau, d, Mode::kUts);
    r.analytic_power = power(deadline);
    r.policy = PolicyFunction::constant(Action{0.0, r.tau});
    return r;
}

BenchmarkResult dvs_pts(const SystemModel& model) {
    const PowerModel& p = model.power;
    const TaskSizeDistribution& d = model.dist;
    const int b = model.b();
    const double k = (p.alpha + 1.0) / (p.alpha - 1.0);
    const double deadline = std::pow(d.moment(k) / p.p_bar, 1.0 / k);

    BenchmarkResult r;
    r.name = "dvs_pts";
    r.mode = Mode::kPts;
    r.deadline = deadline;
    r.tau.resize(b);
    for (int x = 1; x <= b; ++x) {
        r.tau[x - 1] = deadline / x;
        if (d.pmf(x) > 0.0)
            require_in_bounds(r.tau[x - 1], p, "dvs_pts");
        else
            r.tau[x - 1] = std::clamp(r.tau[x - 1], p.tau_min, p.tau_max);
    }
    r.analytic_aoi = 1.5 * deadline;
    r.analytic_power = expected_energy(r.tau, d, Mode::kPts, p.alpha) / deadline;
    r.policy = PolicyFunction::constant(Action{0.0, r.tau});
    return r;
}

namespace {

struct WaitEvaluation {
    double beta = 0.0;
    double aoi = std::numeric_limits<double>::infinity();
    double duration = 0.0;
    bool cap_binding = false;
};

// Threshold-wait policy at constant batch time tau; Y = tau X.
WaitEvaluation evaluate_wait(double tau, double z_max, const SystemModel& model) {
    const TaskSizeDistribution& d = model.dist;
    const int b = model.b();
    const double mean_service = tau * d.mean();
    const double min_duration = d.mean() * batch_energy(tau, model.power.alpha) / model.power.p_bar;

    auto moments = [&](double beta) {
        double m1 = 0.0;
        double m2 = 0.0;
        for (int x = 1; x <= b; ++x) {
            const double y = tau * x;
            const double dur = y + std::clamp(beta - y, 0.0, z_max);
            m1 += d.pmf(x) * dur;
            m2 += d.pmf(x) * dur * dur;
        }
        return std::pair{m1, m2};
    };
    auto excess = [&](double beta) {
        const auto [m1, m2] = moments(beta);
        return m1 - std::max(min_duration, m2 / (2.0 * beta));
    };

    WaitEvaluation e;
    if (min_duration > mean_service + z_max)
        return e;
    double lo = 1e-12 * std::max(1.0, tau);
    double hi = tau * b + z_max;
    while (excess(hi) < 0.0)
        hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) < 0.0 ? lo : hi) = mid;
    }
    e.beta = hi;
    const auto [m1, m2] = moments(e.beta);
    e.duration = m1;
    e.aoi = m2 / (2.0 * m1) + mean_service;
    e.cap_binding = e.beta - tau > z_max;
    return e;
}

} // namespace

BenchmarkResult optimal_wait_constant_speed(const SystemModel& model,
                                            const OptimalWaitOptions& options) {
    const PowerModel& p = model.power;
    const TaskSizeDistribution& d = model.dist;
    if (options.grid_points < 2)
        throw std::invalid_argument("optimal-wait speed grid needs at least 2 points");

    const double tau_star = constant_speed(p);
    const double zero_wait_aoi = tau_star * (d.variance() / (2.0 * d.mean()) + 1.5 * d.mean());
    const double z_max = options.z_max.value_or(10.0 * zero_wait_aoi);
    if (!(z_max > 0.0))
        throw std::invalid_argument("z_max must be positive");

    // Fastest speed the capped wait can pay for: E[X] e(tau) / p_bar = tau E[X] + z_max.
    auto slack = [&](double tau) {
        return d.mean() * batch_energy(tau, p.alpha) / p.p_bar - tau * d.mean();
    };
    double tau_hi = std::min(tau_star, p.tau_max);
    double tau_lo = p.tau_min;
    if (slack(tau_lo) > z_max)
        tau_lo = bisect_decreasing(slack, z_max, tau_lo, std::max(tau_hi, tau_lo));
    if (!(tau_lo < tau_hi))
        throw InfeasibleError("optimal-wait: empty feasible speed range");

    // Skip the end point where the wait cap binds exactly.
    const int n = options.grid_points;
    double best_tau = tau_hi;
    WaitEvaluation best = evaluate_wait(tau_hi, z_max, model);
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) {
        grid[i] = tau_lo + (tau_hi - tau_lo) * (i + 1) / n;
        const WaitEvaluation e = evaluate_wait(grid[i], z_max, model);
        if (e.aoi < best.aoi) {
            best = e;
            best_tau = grid[i];
        }
    }

    if (options.refine) {
        const double step = (tau_hi - tau_lo) / n;
        double a = std::max(tau_lo + 1e-3 * step, best_tau - step);
        double c = std::min(tau_hi, best_tau + step);
        const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
        auto cost = [&](double t) { return evaluate_wait(t, z_max, model).aoi; };
        double x1 = c - phi * (c - a);
        double x2 = a + phi * (c - a);
        double f1 = cost(x1);
        double f2 = cost(x2);
        for (int it = 0; it < 100 && c - a > 1e-13 * c; ++it) {
            if (f1 < f2) {
                c = x2;
                x2 = x1;
                f2 = f1;
                x1 = c - phi * (c - a);
                f1 = cost(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (c - a);
                f2 = cost(x2);
            }
        }
        const double t = 0.5 * (a + c);
        const WaitEvaluation e = evaluate_wait(t, z_max, model);
        if (e.aoi < best.aoi) {
            best = e;
            best_tau = t;
        }
    }

    BenchmarkResult r;
    r.name = "optimal_wait";
    r.mode = model.mode;
    r.tau.assign(model.b(), best_tau);
    r.beta = best.beta;
    r.z_max = z_max;
    r.analytic_aoi = best.aoi;
    r.analytic_power = d.mean() * batch_energy(best_tau, p.alpha) / best.duration;
    r.z_cap_binding = best.cap_binding;
    const double beta = best.beta;
    r.policy = PolicyFunction([tau = r.tau, beta, z_max](double y) {
        return Action{std::clamp(beta - y, 0.0, z_max), tau};
    });
    return r;
}

std::vector<BenchmarkResult> all_benchmarks(const SystemModel& model) {
    return {zero_wait_constant_speed(model), optimal_wait_constant_speed(model),
            dvs_pts(model), dvs_uts(model)};
}

} // namespace agesched
