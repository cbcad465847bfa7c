#pragma once

// Primitive quantities of the update-processing system: the task-size
// distribution, the chip power model, scheduling actions and the per-epoch
// cost terms used by the solver.
//
// All times are execution-time units (seconds per cycle batch); the energy
// unit absorbs the capacitance and batch-size constants.

#include <span>
#include <string_view>
#include <vector>

namespace agesched {

enum class Mode { kPts, kUts };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

/// Batch-count distribution of one update task, supported on 1..b.
class TaskSizeDistribution {
public:
    /// `pmf[k]` is Pr[X = k + 1]. Entries must be non-negative and sum to 1
    /// within 1e-12; they are renormalized exactly afterwards.
    explicit TaskSizeDistribution(std::vector<double> pmf);

    /// Deterministic size X = b.
    static TaskSizeDistribution fixed(int b);
    /// Uniform over [lo, hi] inside a support of length b.
    static TaskSizeDistribution uniform(int lo, int hi, int b);

    int max_size() const { return static_cast<int>(pmf_.size()); }
    /// Pr[X = x], x in 1..b.
    double pmf(int x) const { return pmf_[x - 1]; }
    /// Pr[X >= x], x in 1..b.
    double survival(int x) const { return survival_[x - 1]; }
    /// Pr[X <= x], x in 1..b.
    double cdf(int x) const { return 1.0 - (x < max_size() ? survival_[x] : 0.0); }

    std::span<const double> pmf() const { return pmf_; }
    double mean() const;
    double variance() const;
    /// E[X^p] for real p.
    double moment(double p) const;

private:
    std::vector<double> pmf_;
    std::vector<double> survival_;
};

struct PowerModel {
    double alpha = 2.0;
    double tau_min = 1e-6;
    double tau_max = 1e3;
    double p_bar = 1.0;

    /// Throws std::invalid_argument when any invariant is violated.
    void validate() const;
};

/// Waiting time plus one batch execution time per task size (PTS) or per
/// batch index (UTS).
struct Action {
    double z = 0.0;
    std::vector<double> tau;

    bool operator==(const Action&) const = default;
};

/// Distribution, chip and task-size knowledge bundled together.
struct SystemModel {
    TaskSizeDistribution dist;
    PowerModel power;
    Mode mode = Mode::kUts;

    int b() const { return dist.max_size(); }
    /// Throws std::invalid_argument if `a` is outside the action set.
    void check_action(const Action& a) const;
};

/// Energy to run one batch in time `tau`: (1/tau)^(2/(alpha-1)).
double batch_energy(double tau, double alpha);
/// d/dtau of batch_energy.
double batch_energy_derivative(double tau, double alpha);

/// Service time of a task with x batches under the speed vector `tau`.
double service_time(int x, std::span<const double> tau, Mode mode);
/// Energy spent on a task with x batches.
double task_energy(int x, std::span<const double> tau, Mode mode, double alpha);

double expected_service_time(std::span<const double> tau, const TaskSizeDistribution& dist,
                             Mode mode);
double expected_energy(std::span<const double> tau, const TaskSizeDistribution& dist, Mode mode,
                       double alpha);

/// Age area accumulated over one epoch that starts with age y, waits z and
/// whose update then takes l to process.
double epoch_area(double y, double z, double l_bar);

struct CostTerms {
    double age = 0.0;      // g1: expected epoch area
    double duration = 0.0; // g2: epoch length y + z
    double power = 0.0;    // g3: expected energy minus budgeted energy
};

CostTerms cost_terms(double y, const Action& a, const SystemModel& model);

/// g1 - gamma g2 + lambda g3.
double lagrangian_cost(double y, const Action& a, double gamma, double lambda,
                       const SystemModel& model);

} // namespace agesched
