#pragma once

// Structural checks on a solved policy (water-filling waits, speed ordering
// across batches, flat speeds below the waiting threshold, the speed fixed
// point) and the closed form for a deterministic task size.

#include "agesched/solver.hpp"

#include <optional>

namespace agesched {

struct WaterfillingReport {
    /// Age at which service starts whenever the policy waits; 0 when the
    /// policy never waits.
    double hat_y = 0.0;
    /// max_q |z_q - [hat_y - y_q]+|.
    double max_dev = 0.0;
    /// Largest deviation of the discrete slope of z from -1 where z > 0.
    double slope_dev = 0.0;
    bool waits = false;
};

WaterfillingReport check_waterfilling(const QuantizedPolicy& policy,
                                      const QuantizedStateSpace& grid);

/// True when no speed entry lies within 1e-3 of either speed bound.
bool bounds_inactive(const QuantizedPolicy& policy, const PowerModel& power);

/// Number of (q, x < x') pairs breaking the speed ordering of the mode, with
/// 1e-6 slack. Sizes without probability mass are skipped.
///   PTS: (x / x') tau_x <= tau_x' <= tau_x
///   UTS: tau_x >= tau_x'
int check_tau_monotonicity(const QuantizedPolicy& policy, const SystemModel& model);

/// Largest relative spread (max - min) / max of any speed coordinate over the
/// midpoints below hat_y.
double check_tau_constancy_below_threshold(const QuantizedPolicy& policy,
                                           const QuantizedStateSpace& grid,
                                           const SystemModel& model, double hat_y);

/// clamp(u^((alpha-1)/(alpha+1)), tau_min, tau_max); +inf maps to tau_max.
double H_alpha(double u, const PowerModel& power);

/// max_{q,x} |tau_q[x] - H_alpha(2 lambda / (alpha-1) / (psi + y + z))| with
/// psi the mass-weighted slope of R at the landing points of the sizes that
/// run batch x. nullopt when lambda is zero.
std::optional<double> fixed_point_residual(const QuantizedPolicy& policy,
                                           const ValueFunction& value, double lambda_star,
                                           const SystemModel& model,
                                           const QuantizedStateSpace& grid);

struct FixedSizeSolution {
    double tau = 0.0;
    double z = 0.0;
    double gamma = 0.0;
};

/// Closed form for X = b: tau = ((alpha-1) p_bar)^((1-alpha)/(1+alpha)),
/// z = 0, gamma = 1.5 b tau.
FixedSizeSolution closed_form_fixed_size(int b, double alpha, double p_bar);

/// Optimum of the same problem with the wait kept non-negative: the budget
/// binds at zero wait, tau = p_bar^(-(alpha-1)/(alpha+1)). Agrees with the
/// closed form at alpha = 2.
FixedSizeSolution constrained_fixed_size(int b, double alpha, double p_bar);

struct StructureReport {
    WaterfillingReport waterfilling;
    bool bounds_inactive = false;
    int tau_monotonicity_violations = 0;
    double tau_constancy = 0.0;
    std::optional<double> fixed_point_max_residual;
    double delta_y = 0.0;

    /// Water-filling within 2 delta_y, ordering clean when the bounds are
    /// inactive, fixed point within 2 delta_y when it applies.
    bool passed() const;
};

StructureReport analyze_structure(const SolveResult& result, const SystemModel& model,
                                  const QuantizedStateSpace& grid);

} // namespace agesched
