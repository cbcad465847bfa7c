#include "agesched/solver.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace agesched;
using doctest::Approx;

namespace {

SystemModel two_size(Mode mode, double p_bar = 8.0) {
    return SystemModel{TaskSizeDistribution({0.7, 0.3}), PowerModel{2.0, 1e-6, 1e3, p_bar}, mode};
}

SystemModel fixed_size(int b, double alpha, double p_bar) {
    return SystemModel{TaskSizeDistribution::fixed(b), PowerModel{alpha, 1e-6, 1e3, p_bar},
                       Mode::kUts};
}

// Brute-force min over a single batch time with the exactly optimal wait:
// Q is quadratic in z with unit curvature.
double brute_force_min_q(double y, const ValueFunction& value, double gamma, double lambda,
                         const SystemModel& model, const QuantizedStateSpace& grid) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 20000; ++i) {
        const double tau = 0.02 + 2.0 * i / 20000.0;
        Action a{0.0, {tau}};
        a.z = std::max(0.0, -grad_q_z(y, a, gamma, lambda, model));
        best = std::min(best, q_function(y, a, value, gamma, lambda, model, grid));
    }
    return best;
}

} // namespace

TEST_CASE("next state lands in the containing interval") {
    const QuantizedStateSpace grid(1.0, 25);
    const std::vector<double> tau{0.5, 0.4};
    bool clamped = true;
    CHECK(next_state(2, tau, Mode::kUts, grid, &clamped) == 22);
    CHECK_FALSE(clamped);
    CHECK(next_state(1, std::vector<double>{0.02, 0.02}, Mode::kUts, grid) == 0);
    CHECK(next_state(2, std::vector<double>{0.6, 0.6}, Mode::kUts, grid, &clamped) == 24);
    CHECK(clamped);
}

TEST_CASE("Q-function reduces to the Lagrangian cost on flat value functions") {
    const SystemModel model = two_size(Mode::kUts);
    const QuantizedStateSpace grid(1.0, 25);
    const Action a{0.1, {0.5, 0.4}};
    const double g = lagrangian_cost(0.5, a, 1.0, 0.3, model);

    ValueFunction zero{std::vector<double>(25, 0.0), {}};
    CHECK(q_function(0.5, a, zero, 1.0, 0.3, model, grid) == Approx(g));
    ValueFunction flat{std::vector<double>(25, 2.5), {}};
    CHECK(q_function(0.5, a, flat, 1.0, 0.3, model, grid) == Approx(g + 2.5));

    // R(l) = l sampled at the midpoints: 0.7 R(0.5) + 0.3 R(0.9) = 0.62.
    ValueFunction linear;
    for (int q = 0; q < 25; ++q)
        linear.values.push_back(grid.midpoint(q));
    CHECK(q_function(0.5, a, linear, 1.0, 0.3, model, grid) == Approx(g + 0.62));
    // Unit slopes inside each interval reproduce R(l) = l exactly as well.
    linear.slopes.assign(25, 1.0);
    CHECK(q_function(0.5, a, linear, 1.0, 0.3, model, grid) == Approx(g + 0.62));
}

TEST_CASE("wait gradient") {
    const SystemModel model = two_size(Mode::kUts);
    CHECK(grad_q_z(0.5, Action{0.1, {0.5, 0.4}}, 1.0, 0.0, model) == Approx(0.22));
    // Stationary wait.
    const Action a{1.0 + 0.2 * 8.0 - 0.5 - 0.62, {0.5, 0.4}};
    CHECK(grad_q_z(0.5, a, 1.0, 0.2, model) == Approx(0.0).epsilon(1e-12));
    CHECK(grad_q_z(0.3, Action{0.0, {0.5, 0.4}}, 0.0, 0.0, model) > 0.0);
}

TEST_CASE("speed gradient matches a central difference of Q") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const QuantizedStateSpace grid(3.0, 30);
    for (Mode mode : {Mode::kPts, Mode::kUts}) {
        const SystemModel model{TaskSizeDistribution({0.2, 0.5, 0.3}),
                                PowerModel{1.7, 1e-6, 1e3, 4.0}, mode};
        for (int trial = 0; trial < 30; ++trial) {
            ValueFunction value;
            for (int q = 0; q < 30; ++q) {
                value.values.push_back(unit(rng));
                value.slopes.push_back(2.0 * unit(rng) - 1.0);
            }
            const Action a{unit(rng), {0.2 + 0.5 * unit(rng), 0.2 + 0.3 * unit(rng),
                                       0.2 + 0.2 * unit(rng)}};
            const double y = 2.5 * unit(rng);
            const double lambda = unit(rng);
            for (int x = 1; x <= 3; ++x) {
                const double h = 1e-7;
                Action up = a, down = a;
                up.tau[x - 1] += h;
                down.tau[x - 1] -= h;
                // Skip draws where the step crosses an interval boundary.
                bool crosses = false;
                for (int k = 1; k <= 3; ++k)
                    crosses = crosses || next_state(k, up.tau, mode, grid) !=
                                             next_state(k, down.tau, mode, grid);
                if (crosses)
                    continue;
                const double fd = (q_function(y, up, value, 1.0, lambda, model, grid) -
                                   q_function(y, down, value, 1.0, lambda, model, grid)) /
                                  (2.0 * h);
                CHECK(grad_q_tau(y, a, value, x, lambda, model, grid) ==
                      Approx(fd).epsilon(1e-5).scale(1.0));
            }
        }
    }
}

TEST_CASE("speed gradient corner cases") {
    const QuantizedStateSpace grid(2.0, 20);
    const ValueFunction flat{std::vector<double>(20, 0.0), std::vector<double>(20, 0.0)};
    const SystemModel uts = two_size(Mode::kUts);
    CHECK(grad_q_tau(0.0, Action{0.0, {0.5, 0.4}}, flat, 1, 0.0, uts, grid) == 0.0);

    const SystemModel pts{TaskSizeDistribution({0.0, 1.0}), PowerModel{}, Mode::kPts};
    CHECK(grad_q_tau(0.4, Action{0.2, {0.5, 0.4}}, flat, 1, 0.7, pts, grid) == 0.0);

    // Interior fixed point of the speed condition: tau = (2 lambda / (y + z))^(1/3) at alpha=2.
    const SystemModel one{TaskSizeDistribution::fixed(1), PowerModel{2.0, 1e-6, 1e3, 8.0},
                          Mode::kPts};
    const double lambda = 0.3, y = 0.4, z = 0.2;
    const double tau = std::cbrt(2.0 * lambda / (y + z));
    CHECK(grad_q_tau(y, Action{z, {tau}}, flat, 1, lambda, one, grid) ==
          Approx(0.0).scale(1.0).epsilon(1e-6));
}

TEST_CASE("envelope slope vanishes while waiting") {
    const SystemModel model = two_size(Mode::kUts);
    const QuantizedStateSpace grid(1.0, 25);
    QuantizedPolicy policy = QuantizedPolicy::constant(25, Action{0.0, {0.5, 0.4}});
    const double gamma = 1.2, lambda = 0.05;
    for (int q = 0; q < 25; ++q)
        policy[q].z = std::max(0.0, gamma + lambda * 8.0 - grid.midpoint(q) - 0.62);
    for (int q = 0; q < 25; ++q) {
        const double s = grad_R_y(q, policy, gamma, lambda, model, grid);
        if (policy[q].z > 0.0)
            CHECK(s == Approx(0.0).scale(1.0));
        else
            CHECK(s >= 0.0);
    }
    const QuantizedPolicy zero_wait = QuantizedPolicy::constant(25, Action{0.0, {0.5, 0.4}});
    CHECK(grad_R_y(3, zero_wait, 0.0, 0.0, model, grid) == Approx(0.62 + grid.midpoint(3)));
}

TEST_CASE("Benders inner loop descends from any warm start and finds the minimum") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const QuantizedStateSpace grid(2.0, 20);
    const SystemModel model{TaskSizeDistribution::fixed(1), PowerModel{2.0, 1e-3, 1e3, 4.0},
                            Mode::kUts};
    SolverConfig cfg;
    for (int trial = 0; trial < 15; ++trial) {
        ValueFunction value;
        for (int q = 0; q < 20; ++q) {
            // Convex increasing R with matching slopes.
            const double y = grid.midpoint(q);
            value.values.push_back(0.3 * y * y);
            value.slopes.push_back(0.6 * y);
        }
        const double y = grid.midpoint(static_cast<int>(20 * unit(rng)) % 20);
        const double gamma = 0.5 + 2.0 * unit(rng);
        const double lambda = 0.05 + unit(rng);
        const Action warm{2.0 * unit(rng), {0.05 + 1.5 * unit(rng)}};
        const BendersResult res = benders_inner(y, warm, value, gamma, lambda, model, grid, cfg);
        CHECK(res.q_value <= q_function(y, warm, value, gamma, lambda, model, grid) + 1e-12);
        CHECK(res.q_value ==
              Approx(q_function(y, res.action, value, gamma, lambda, model, grid)));
        const double brute = brute_force_min_q(y, value, gamma, lambda, model, grid);
        CHECK(res.q_value <= brute + 1e-6);
        CHECK_NOTHROW(model.check_action(res.action));
    }
}

TEST_CASE("Benders inner loop: free energy gives the stationary wait") {
    const SystemModel model = two_size(Mode::kUts);
    const QuantizedStateSpace grid(1.0, 25);
    const ValueFunction flat{std::vector<double>(25, 0.0), std::vector<double>(25, 0.0)};
    const BendersResult r = benders_inner(0.3, initial_action(model), flat, 5.0, 0.0, model,
                                          grid, SolverConfig{});
    const double l_bar = expected_service_time(r.action.tau, model.dist, model.mode);
    CHECK(r.action.tau[0] == Approx(model.power.tau_min));
    CHECK(r.action.z == Approx(5.0 - 0.3 - l_bar));
}

TEST_CASE("Benders inner loop leaves tau_min when energy gets a price") {
    // At tau_min the energy gradient is about 1e30; the speed block must still move.
    const SystemModel model = fixed_size(1, 1.5, 1.0);
    const QuantizedStateSpace grid(2.0, 50);
    const ValueFunction flat{std::vector<double>(50, 0.0), std::vector<double>(50, 0.0)};
    const Action stuck{3.0, {model.power.tau_min}};
    const BendersResult r = benders_inner(1.0, stuck, flat, 3.0, 0.1, model, grid, SolverConfig{});
    CHECK(r.action.tau[0] > 0.1);
    CHECK(std::abs(grad_q_tau(1.0, r.action, flat, 1, 0.1, model, grid)) < 1e-6);
}

TEST_CASE("fixed-size solve at alpha = 1.5 runs zero wait at the budget-tight speed") {
    // One unit task per epoch: AoI 1.5 tau with tau = P^(-(alpha-1)/(alpha+1)) = 1 at P = 1.
    const SystemModel model = fixed_size(1, 1.5, 1.0);
    const QuantizedStateSpace grid(2.0, 50);
    const SolveResult r = dinkelbach_solve(model, grid, SolverConfig{});
    CHECK(std::abs(r.gamma_star - 1.5) <= 2.0 * grid.delta());
    CHECK(std::abs(r.diagnostics.policy_power - 1.0) <= 0.02);
}

TEST_CASE("first Bellman backup from zero is the pointwise minimum of the cost") {
    const SystemModel model{TaskSizeDistribution::fixed(1), PowerModel{2.0, 1e-3, 1e3, 4.0},
                            Mode::kUts};
    const QuantizedStateSpace grid(2.0, 10);
    SolverConfig cfg;
    const ValueFunction zero{std::vector<double>(10, 0.0), std::vector<double>(10, 0.0)};
    const SweepResult sweep =
        bellman_sweep(zero, QuantizedPolicy::constant(10, initial_action(model)), 1.5, 0.2,
                      model, grid, cfg);
    for (int q = 0; q < 10; ++q)
        CHECK(sweep.value.values[q] ==
              Approx(brute_force_min_q(grid.midpoint(q), zero, 1.5, 0.2, model, grid))
                  .epsilon(1e-7));
}

TEST_CASE("value iteration span never grows") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double f1 = 0.2 + 0.6 * unit(rng);
        const SystemModel model{TaskSizeDistribution({f1, 1.0 - f1}),
                                PowerModel{1.3 + 0.7 * unit(rng), 1e-6, 1e3, 1.0 + 7.0 * unit(rng)},
                                trial % 2 ? Mode::kPts : Mode::kUts};
        const QuantizedStateSpace grid(2.0 * 2.0, 20);
        SolverConfig cfg;
        cfg.max_value_iterations = 300;
        const ValueIterationResult vi =
            value_iteration(0.5 + unit(rng), 0.01 + 0.2 * unit(rng), model, grid, cfg);
        for (std::size_t m = 1; m < vi.span_trace.size(); ++m)
            CHECK(vi.span_trace[m] <= vi.span_trace[m - 1] * (1.0 + 1e-9) + 1e-12);
    }
}

TEST_CASE("stationary law of a constant policy sits on the reachable service times") {
    const SystemModel model = two_size(Mode::kUts);
    const QuantizedStateSpace grid(1.0, 25);
    const QuantizedPolicy policy = QuantizedPolicy::constant(25, Action{0.0, {0.5, 0.4}});
    const StationaryDistribution st = stationary_distribution(policy, model, grid);
    double total = 0.0;
    for (double p : st.probs)
        total += p;
    CHECK(total == Approx(1.0).epsilon(1e-12));
    CHECK(st.probs[12] == Approx(0.7).epsilon(1e-9));
    CHECK(st.probs[22] == Approx(0.3).epsilon(1e-9));
    CHECK(st.clamp_mass == 0.0);

    const QuantizedPolicy slow = QuantizedPolicy::constant(25, Action{0.0, {0.6, 0.6}});
    CHECK(stationary_distribution(slow, model, grid).clamp_mass == Approx(0.3));
}

TEST_CASE("policy statistics of a constant zero-wait policy match renewal formulas") {
    const SystemModel model = two_size(Mode::kUts);
    const QuantizedStateSpace grid(1.0, 25);
    const Action a{0.0, {0.5, 0.4}};
    const QuantizedPolicy policy = QuantizedPolicy::constant(25, a);
    const PolicyStatistics s =
        policy_statistics(policy, stationary_distribution(policy, model, grid), model, grid);
    // L in {0.5, 0.9} with probabilities {0.7, 0.3}.
    const double m1 = 0.7 * 0.5 + 0.3 * 0.9;
    const double m2 = 0.7 * 0.25 + 0.3 * 0.81;
    CHECK(s.duration == Approx(m1));
    CHECK(s.average_aoi() == Approx(m1 + m2 / (2.0 * m1)));
    CHECK(s.average_power() == Approx(5.875 / m1));
    CHECK(s.support_min == Approx(0.5));
    CHECK(s.support_max == Approx(0.9));
}

TEST_CASE("dual update and J") {
    PolicyStatistics s;
    s.duration = 1.0;
    s.energy = 8.0;
    s.age = 2.0;
    CHECK(dual_update(0.3, s, 0.1, 8.0) == 0.3);
    s.energy = 4.0;
    CHECK(dual_update(0.01, s, 0.1, 8.0) == 0.0);
    CHECK(dual_update(0.0, s, 0.1, 8.0) == 0.0);
    s.energy = 10.0;
    CHECK(dual_update(0.3, s, 0.1, 8.0) > 0.3);
    CHECK(evaluate_J(0.0, s) > 0.0);
    CHECK(evaluate_J(1e6, s) < 0.0);
}

TEST_CASE("fixed-size solve matches the closed form at alpha = 2") {
    const SystemModel model = fixed_size(2, 2.0, 8.0);
    const QuantizedStateSpace grid(2.0, 50);
    const SolveResult r = dinkelbach_solve(model, grid, SolverConfig{});
    CHECK(std::abs(r.gamma_star - 1.5) <= 2.0 * grid.delta());
    CHECK(r.lambda_star > 0.0);
    // The visited state is the service time 2 tau = 1: run at tau = 0.5 without waiting.
    const int visited = grid.interval_of(r.diagnostics.support_min);
    CHECK(r.policy[visited].tau[0] == Approx(0.5).epsilon(2.0 * grid.delta()));
    CHECK(r.policy[visited].z <= 2.0 * grid.delta());
    CHECK(std::abs(r.diagnostics.policy_power - 8.0) <= 0.02 * 8.0);

    // J brackets zero around gamma*.
    auto j_at = [&](double g) {
        const DualResult d = solve_dual(g, r.lambda_star, model, grid, SolverConfig{});
        return evaluate_J(g, d.stats);
    };
    CHECK(j_at(r.gamma_star - 0.1) > 0.0);
    CHECK(j_at(r.gamma_star + 0.1) < 0.0);
}

TEST_CASE("UTS solve: bisection bracket, residuals and determinism") {
    const SystemModel model = two_size(Mode::kUts);
    const QuantizedStateSpace grid(1.0, 25);
    SolverConfig cfg;
    const SolveResult r = dinkelbach_solve(model, grid, cfg);
    const SolveDiagnostics& d = r.diagnostics;
    CHECK(d.converged);
    CHECK(r.lambda_star >= 0.0);
    CHECK(std::abs(d.J_residual) <= d.J_tolerance);
    CHECK(d.bellman_residual <= 1e-6);
    CHECK(d.constraint_slack <= 1e-3);
    CHECK(d.clamp_mass <= 1e-6);
    CHECK(std::abs(d.policy_aoi - r.gamma_star) <= 1e-3);

    // Along the bisection, J is strictly decreasing in gamma.
    std::vector<BisectionStep> steps = d.trace;
    std::sort(steps.begin(), steps.end(),
              [](const BisectionStep& a, const BisectionStep& b) { return a.gamma < b.gamma; });
    for (std::size_t i = 1; i < steps.size(); ++i)
        CHECK(steps[i].J < steps[i - 1].J);

    // Envelope slope against a central difference of R where the policy waits.
    for (int q = 1; q + 1 < grid.size(); ++q) {
        if (r.policy[q - 1].z <= 0.0 || r.policy[q + 1].z <= 0.0)
            continue;
        const double fd = (r.value.values[q + 1] - r.value.values[q - 1]) / (2.0 * grid.delta());
        CHECK(std::abs(grad_R_y(q, r.policy, r.gamma_star, r.lambda_star, model, grid) - fd) <=
              2.0 * grid.delta());
    }

    const SolveResult again = dinkelbach_solve(model, grid, cfg);
    CHECK(again.gamma_star == r.gamma_star);
    CHECK(again.lambda_star == r.lambda_star);
    CHECK(again.policy == r.policy);
    CHECK(again.value.values == r.value.values);
}

TEST_CASE("too small a bracket is reported as infeasible") {
    SolverConfig cfg;
    cfg.gamma_upper = 0.5;
    CHECK_THROWS_AS(dinkelbach_solve(fixed_size(2, 2.0, 8.0), QuantizedStateSpace(2.0, 20), cfg),
                    InfeasibleError);
    cfg = SolverConfig{};
    cfg.eps_R = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("diminishing dual steps reach the same multiplier region") {
    const SystemModel model = two_size(Mode::kUts);
    const QuantizedStateSpace grid(1.0, 25);
    SolverConfig cfg;
    const DualResult bracketed = solve_dual(1.0, 0.0, model, grid, cfg);
    cfg.dual_rule = DualStepRule::kDiminishing;
    cfg.max_dual_iterations = 400;
    cfg.s0 = 0.02;
    const DualResult diminishing = solve_dual(1.0, bracketed.lambda * 0.8, model, grid, cfg);
    CHECK(diminishing.lambda >= 0.0);
    CHECK(diminishing.lambda == Approx(bracketed.lambda).epsilon(0.1));
}
