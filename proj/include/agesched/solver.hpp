#pragma once

// Age-minimal scheduling solver: alternating projected-gradient minimization
// of the Q-function inside each Bellman backup, relative value iteration on
// the quantized state grid, a dual loop on the power multiplier and an outer
// bisection on the Dinkelbach variable.

#include "agesched/model.hpp"
#include "agesched/policy.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace agesched {

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Value function on the grid midpoints. `slopes` holds the envelope
/// derivative dR/dy at each midpoint, taken from the policy that produced
/// `values`; within an interval R is extended linearly with that slope. An
/// empty `slopes` means a piece-wise constant R.
struct ValueFunction {
    std::vector<double> values;
    std::vector<double> slopes;

    /// R evaluated at an arbitrary state.
    double at(double l, const QuantizedStateSpace& grid) const;
    double slope_at(double l, const QuantizedStateSpace& grid) const;
};

enum class DualStepRule {
    kDiminishing, // s_l = s0 / l
    kBracketed,   // sub-gradient steps until the sign flips, then regula falsi
};

enum class LandingSlopes {
    kRefresh, // look up dR/dy at the current landing interval every evaluation
    kFrozen,  // keep the landing intervals of the warm start for a whole backup
};

struct SolverConfig {
    double eps_R = 1e-9;
    double eps_a = 1e-12;
    double eps_lambda = 1e-7;
    double eps_gamma = 1e-4;
    /// Initial dual step; 0 selects 0.1 / p_bar.
    double s0 = 0.0;
    DualStepRule dual_rule = DualStepRule::kBracketed;
    LandingSlopes landing_slopes = LandingSlopes::kRefresh;

    int max_value_iterations = 5000;
    int max_benders_iterations = 100;
    int max_gradient_iterations = 500;
    int max_dual_iterations = 200;
    int max_bisection_iterations = 200;

    /// Upper end of the initial bisection bracket; default is twice the AoI
    /// of a feasible constant-speed reference policy.
    std::optional<double> gamma_upper;
    /// Worker threads for a Bellman sweep; 0 means the runtime default.
    int threads = 0;

    /// Throws std::invalid_argument on non-positive tolerances or caps.
    void validate() const;
};

/// Interval reached when a task of x batches is run with speeds `tau`.
int next_state(int x, std::span<const double> tau, Mode mode, const QuantizedStateSpace& grid,
               bool* clamped = nullptr);

/// Expected next-state value plus the Lagrangian epoch cost.
double q_function(double y, const Action& a, const ValueFunction& value, double gamma,
                  double lambda, const SystemModel& model, const QuantizedStateSpace& grid);

/// Envelope derivative of R at interval q under the policy that produced R.
double grad_R_y(int q, const QuantizedPolicy& policy, double gamma, double lambda,
                const SystemModel& model, const QuantizedStateSpace& grid);
std::vector<double> envelope_slopes(const QuantizedPolicy& policy, double gamma, double lambda,
                                    const SystemModel& model, const QuantizedStateSpace& grid);

/// dQ/dtau_x (x is 1-based), with dR/dy read from `value.slopes` at the
/// landing intervals.
double grad_q_tau(double y, const Action& a, const ValueFunction& value, int x, double lambda,
                  const SystemModel& model, const QuantizedStateSpace& grid);
double grad_q_z(double y, const Action& a, double gamma, double lambda, const SystemModel& model);

struct BendersResult {
    Action action;
    double q_value = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Minimizes Q(y, .) by alternating projected-gradient updates of the speed
/// block and the waiting time, starting from `warm`.
BendersResult benders_inner(double y, const Action& warm, const ValueFunction& value,
                            double gamma, double lambda, const SystemModel& model,
                            const QuantizedStateSpace& grid, const SolverConfig& cfg);

struct SweepResult {
    ValueFunction value;
    QuantizedPolicy policy;
    int unconverged_states = 0;
};

/// One Jacobi Bellman backup over all midpoints. Values are not normalized.
SweepResult bellman_sweep(const ValueFunction& value, const QuantizedPolicy& warm, double gamma,
                          double lambda, const SystemModel& model,
                          const QuantizedStateSpace& grid, const SolverConfig& cfg);

struct ValueIterationResult {
    ValueFunction value;
    QuantizedPolicy policy;
    int iterations = 0;
    bool converged = false;
    /// Average Lagrangian cost per epoch (mid-range of the last difference).
    double gain = 0.0;
    /// span(R^{m+1} - R^m) for every sweep.
    std::vector<double> span_trace;
    int unconverged_backups = 0;
    /// The span stopped shrinking (a policy whose landings split across an
    /// interval boundary into several closed classes); iteration stopped early.
    bool stalled = false;
};

/// Default starting action: zero wait and the constant speed that meets the
/// budget, clamped to the speed bounds.
Action initial_action(const SystemModel& model);

/// Relative value iteration for fixed (gamma, lambda). `warm` seeds both R^0
/// and the per-state starting actions; without it R^0 = 0.
ValueIterationResult value_iteration(double gamma, double lambda, const SystemModel& model,
                                     const QuantizedStateSpace& grid, const SolverConfig& cfg,
                                     const ValueIterationResult* warm = nullptr);

/// max_q |R(y_q) - min_a Q(y_q, a)| for a converged value function.
double bellman_residual(const ValueIterationResult& vi, double gamma, double lambda,
                        const SystemModel& model, const QuantizedStateSpace& grid,
                        const SolverConfig& cfg);

struct StationaryDistribution {
    std::vector<double> probs;
    /// Probability per epoch that the next state lands at or beyond y_max.
    double clamp_mass = 0.0;
    int iterations = 0;
};

/// Stationary law of the embedded interval chain, by lazy power iteration
/// started from the law of the first state a simulation would visit.
/// Throws ConvergenceError when the iteration cap is reached.
StationaryDistribution stationary_distribution(const QuantizedPolicy& policy,
                                               const SystemModel& model,
                                               const QuantizedStateSpace& grid,
                                               int max_iterations = 1000000);

/// Long-run per-epoch expectations of the policy. The state is the exact
/// service time of the previous task (not the interval midpoint), so these
/// are the averages a simulation of the quantized policy converges to.
struct PolicyStatistics {
    double duration = 0.0; // E[Y + Z]
    double age = 0.0;      // E[g1]
    double energy = 0.0;   // E[W]
    double service = 0.0;  // E[L]
    double clamp_mass = 0.0;
    double support_min = 0.0;
    double support_max = 0.0;

    double average_aoi() const { return age / duration; }
    double average_power() const { return energy / duration; }
};

PolicyStatistics policy_statistics(const QuantizedPolicy& policy,
                                   const StationaryDistribution& stationary,
                                   const SystemModel& model, const QuantizedStateSpace& grid);

/// Projected sub-gradient step on the power multiplier.
double dual_update(double lambda, const PolicyStatistics& stats, double step, double p_bar);

/// E[g1 - gamma g2] under the policy's stationary law.
double evaluate_J(double gamma, const PolicyStatistics& stats);

struct BisectionStep {
    double gamma = 0.0;
    double lambda = 0.0;
    double J = 0.0;
    int dual_iterations = 0;
    int value_sweeps = 0;
};

struct SolveDiagnostics {
    int bisection_iterations = 0;
    int dual_iterations = 0;   // at the final gamma
    int value_sweeps = 0;      // over the whole solve
    int value_iterations = 0;  // of the final value iteration
    double value_span = 0.0;   // final span(R^{m+1} - R^m)
    double bellman_residual = 0.0;
    double J_residual = 0.0;
    double J_tolerance = 0.0;
    double constraint_slack = 0.0; // E[W] - p_bar E[Y+Z] at the returned policy
    double clamp_mass = 0.0;
    double policy_aoi = 0.0;
    double policy_power = 0.0;
    double support_min = 0.0;
    double support_max = 0.0;
    bool converged = true;
    /// Final value iteration stopped on a stalled span rather than eps_R.
    bool value_stalled = false;
    std::vector<BisectionStep> trace;
    std::vector<std::string> warnings;
};

struct SolveResult {
    double gamma_star = 0.0;
    double lambda_star = 0.0;
    QuantizedPolicy policy;
    ValueFunction value;
    SolveDiagnostics diagnostics;
};

/// Reference AoI of a feasible constant-speed policy (zero wait when the
/// budget allows it inside the speed bounds, otherwise tau_max plus the
/// constant wait that meets the budget).
double reference_policy_aoi(const SystemModel& model);

/// Minimal average AoI under the power budget, with its multiplier and
/// policy. Throws InfeasibleError when no valid bisection bracket exists.
SolveResult dinkelbach_solve(const SystemModel& model, const QuantizedStateSpace& grid,
                             const SolverConfig& cfg);

/// The dual loop alone, for a fixed Dinkelbach variable.
struct DualResult {
    double lambda = 0.0;
    ValueIterationResult vi;
    PolicyStatistics stats;
    int iterations = 0;
    int value_sweeps = 0;
    bool converged = false;
    std::vector<double> lambda_trace;
};

DualResult solve_dual(double gamma, double lambda0, const SystemModel& model,
                      const QuantizedStateSpace& grid, const SolverConfig& cfg,
                      const ValueIterationResult* warm = nullptr);

} // namespace agesched
