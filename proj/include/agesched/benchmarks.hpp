#pragma once

// Comparison policies calibrated to the power budget: zero-wait constant
// speed, optimal-wait constant speed, and deadline-based speed scaling with
// and without knowledge of the task size.

#include "agesched/model.hpp"
#include "agesched/policy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace agesched {

struct BenchmarkResult {
    std::string name;
    /// Mode the policy must be simulated in.
    Mode mode = Mode::kUts;
    /// Batch times of the calibrated policy (per batch index, or per task
    /// size for the size-aware deadline policy).
    std::vector<double> tau;
    /// Deadline for the deadline-based policies.
    std::optional<double> deadline;
    /// Waiting threshold and cap for the optimal-wait policy.
    std::optional<double> beta;
    std::optional<double> z_max;
    /// Long-run AoI and power from renewal formulas.
    std::optional<double> analytic_aoi;
    double analytic_power = 0.0;
    /// Optimal-wait only: the wait cap binds at the returned optimum.
    bool z_cap_binding = false;
    PolicyFunction policy{PolicyFunction::constant(Action{})};
};

/// AoI of a zero-wait policy whose service times are i.i.d. copies of L:
/// E[L] + E[L^2] / (2 E[L]).
double renewal_zero_wait_aoi(std::span<const double> tau, const TaskSizeDistribution& dist,
                             Mode mode);

/// tau* = p_bar^(-(alpha-1)/(alpha+1)) for every batch, no waiting.
BenchmarkResult zero_wait_constant_speed(const SystemModel& model);

/// Batch times proportional to Pr[X >= x]^((alpha-1)/(alpha+1)) within a
/// common deadline T tuned by bisection until E[W] / E[L] = p_bar.
BenchmarkResult dvs_uts(const SystemModel& model);

/// Each task of size x runs at tau = T / x; T from
/// E[X^((alpha+1)/(alpha-1))] T^(-(alpha+1)/(alpha-1)) = p_bar.
BenchmarkResult dvs_pts(const SystemModel& model);

struct OptimalWaitOptions {
    /// Wait cap; default is ten times the zero-wait constant-speed AoI.
    std::optional<double> z_max;
    int grid_points = 200;
    /// Golden-section refinement around the best grid point.
    bool refine = true;
};

/// Constant speed tau with the threshold wait z(y) = clamp(beta - y, 0, z_max),
/// beta found by bisection on the budget-aware fixed point, tau chosen on a
/// grid over [tau_lo, tau*] where tau_lo is the fastest speed the wait cap can
/// still pay for.
BenchmarkResult optimal_wait_constant_speed(const SystemModel& model,
                                            const OptimalWaitOptions& options = {});

/// All four benchmarks in a fixed order.
std::vector<BenchmarkResult> all_benchmarks(const SystemModel& model);

} // namespace agesched
