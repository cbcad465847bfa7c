#include "agesched/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace agesched {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr int kMaxHalvings = 80;

// Landing weight of batch coordinate x in the expected cost: how much mass
// of the task-size law sees tau_x.
double coordinate_weight(int x, const SystemModel& model) {
    return model.mode == Mode::kPts ? x * model.dist.pmf(x) : model.dist.survival(x);
}

// Q(y, a) with R extended linearly inside each interval. When `frozen` is
// set, the landing interval of size x is pinned to frozen[x - 1].
class QSurrogate {
public:
    QSurrogate(double y, const ValueFunction& value, double gamma, double lambda,
               const SystemModel& model, const QuantizedStateSpace& grid,
               const std::vector<int>* frozen)
        : y_(y), value_(value), gamma_(gamma), lambda_(lambda), model_(model), grid_(grid),
          frozen_(frozen), b_(model.b()), slopes_(b_) {}

    int landing_interval(int x, double l) const {
        return frozen_ ? (*frozen_)[x - 1] : grid_.interval_of(l);
    }

    double value_term(int x, double l) const {
        const int q = landing_interval(x, l);
        double r = value_.values[q];
        if (!value_.slopes.empty())
            r += value_.slopes[q] * (l - grid_.midpoint(q));
        return r;
    }

    double slope_term(int x, double l) const {
        if (value_.slopes.empty())
            return 0.0;
        return value_.slopes[landing_interval(x, l)];
    }

    double value(const Action& a) const {
        double expected_r = 0.0;
        double cumulative = 0.0;
        for (int x = 1; x <= b_; ++x) {
            const double f = model_.dist.pmf(x);
            cumulative += a.tau[x - 1];
            if (f == 0.0)
                continue;
            const double l = model_.mode == Mode::kPts ? x * a.tau[x - 1] : cumulative;
            expected_r += f * value_term(x, l);
        }
        return expected_r + lagrangian_cost(y_, a, gamma_, lambda_, model_);
    }

    // Gradient in tau. Coordinates with zero weight get the per-size
    // stationarity expression instead (the gradient divided by the weight).
    void grad_tau(const Action& a, std::vector<double>& out) const {
        const double alpha = model_.power.alpha;
        const double d = y_ + a.z;
        out.assign(b_, 0.0);
        if (model_.mode == Mode::kPts) {
            for (int x = 1; x <= b_; ++x) {
                const double t = a.tau[x - 1];
                const double inner =
                    slope_term(x, x * t) + d + lambda_ * batch_energy_derivative(t, alpha);
                const double w = coordinate_weight(x, model_);
                out[x - 1] = w > 0.0 ? w * inner : inner;
            }
            return;
        }
        double cumulative = 0.0;
        for (int x = 1; x <= b_; ++x) {
            cumulative += a.tau[x - 1];
            slopes_[x - 1] = slope_term(x, cumulative);
        }
        double tail = 0.0;
        for (int x = b_; x >= 1; --x) {
            tail += model_.dist.pmf(x) * slopes_[x - 1];
            const double own = d + lambda_ * batch_energy_derivative(a.tau[x - 1], alpha);
            const double w = model_.dist.survival(x);
            out[x - 1] = w > 0.0 ? tail + w * own : slopes_[x - 1] + own;
        }
    }

    double y() const { return y_; }

    double grad_z(const Action& a) const {
        return expected_service_time(a.tau, model_.dist, model_.mode) + y_ + a.z - gamma_ -
               lambda_ * model_.power.p_bar;
    }

private:
    double y_;
    const ValueFunction& value_;
    double gamma_;
    double lambda_;
    const SystemModel& model_;
    const QuantizedStateSpace& grid_;
    const std::vector<int>* frozen_;
    int b_;
    mutable std::vector<double> slopes_;
};

double clamp_tau(double t, const PowerModel& p) { return std::clamp(t, p.tau_min, p.tau_max); }

// Projected gradient with Armijo backtracking on the active speed
// coordinates, z fixed. Returns the number of accepted steps.
int speed_block(const QSurrogate& q, Action& a, const std::vector<char>& active,
                const SystemModel& model, const SolverConfig& cfg) {
    const int b = model.b();
    std::vector<double> grad;
    Action trial = a;
    double current = q.value(a);
    double step = 1.0;
    int accepted = 0;
    for (int it = 0; it < cfg.max_gradient_iterations; ++it) {
        q.grad_tau(a, grad);
        bool moved = false;
        double max_change = 0.0;
        auto backtrack = [&] {
            for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
                double directional = 0.0;
                max_change = 0.0;
                for (int k = 0; k < b; ++k) {
                    trial.tau[k] = active[k] ? clamp_tau(a.tau[k] - step * grad[k], model.power)
                                             : a.tau[k];
                    const double change = trial.tau[k] - a.tau[k];
                    directional += grad[k] * change;
                    max_change = std::max(max_change, std::abs(change));
                }
                if (max_change == 0.0)
                    return;
                const double candidate = q.value(trial);
                if (candidate <= current + kArmijoC * directional) {
                    moved = true;
                    current = candidate;
                    return;
                }
            }
        };
        backtrack();
        if (!moved && max_change > 0.0) {
            // Near tau_min the energy gradient is so steep that every halving
            // still projects to tau_max. Retry with no coordinate moving by
            // more than its own size.
            step = 1.0;
            for (int k = 0; k < b; ++k)
                if (active[k] && grad[k] != 0.0)
                    step = std::min(step, a.tau[k] / std::abs(grad[k]));
            backtrack();
        }
        if (!moved)
            return accepted;
        a.tau = trial.tau;
        ++accepted;
        double scale = 1.0;
        for (int k = 0; k < b; ++k)
            scale = std::max(scale, std::abs(a.tau[k]));
        if (max_change <= 1e-13 * scale)
            break;
        step = std::min(1.0, step * 2.0);
    }
    return accepted;
}

// The objective is an exact quadratic in z with unit curvature, so a unit
// projected-gradient step already lands on the minimizer; the backtracking
// loop is kept for the general rule.
void wait_block(const QSurrogate& q, Action& a) {
    const double current = q.value(a);
    const double g = q.grad_z(a);
    Action trial = a;
    for (double step = 1.0; step > 1e-20; step *= 0.5) {
        trial.z = std::max(0.0, a.z - step * g);
        if (trial.z == a.z)
            return;
        if (q.value(trial) <= current + kArmijoC * g * (trial.z - a.z)) {
            a.z = trial.z;
            return;
        }
    }
}

// Coordinates that carry no probability mass do not change Q; give them the
// value the stationarity condition would pick if they carried a vanishing
// mass, so the reported schedule stays meaningful.
void settle_massless(const QSurrogate& q, Action& a, const std::vector<char>& active,
                     double lambda, const SystemModel& model) {
    const double alpha = model.power.alpha;
    const int b = model.b();
    for (int pass = 0; pass < 4; ++pass) {
        for (int x = 1; x <= b; ++x) {
            if (active[x - 1])
                continue;
            const double l = model.mode == Mode::kPts
                                 ? x * a.tau[x - 1]
                                 : service_time(x, a.tau, Mode::kUts);
            const double denom = q.slope_term(x, l) + q.y() + a.z;
            a.tau[x - 1] = denom > 0.0 ? clamp_tau(std::pow(2.0 * lambda / (alpha - 1.0) / denom,
                                                            (alpha - 1.0) / (alpha + 1.0)),
                                                   model.power)
                                       : model.power.tau_max;
        }
    }
}

} // namespace

double ValueFunction::at(double l, const QuantizedStateSpace& grid) const {
    const int q = grid.interval_of(l);
    double r = values[q];
    if (!slopes.empty())
        r += slopes[q] * (l - grid.midpoint(q));
    return r;
}

double ValueFunction::slope_at(double l, const QuantizedStateSpace& grid) const {
    return slopes.empty() ? 0.0 : slopes[grid.interval_of(l)];
}

void SolverConfig::validate() const {
    if (!(eps_R > 0.0 && eps_a > 0.0 && eps_lambda > 0.0 && eps_gamma > 0.0))
        throw std::invalid_argument("solver tolerances must be positive");
    if (s0 < 0.0)
        throw std::invalid_argument("initial dual step must be non-negative");
    if (max_value_iterations < 1 || max_benders_iterations < 1 || max_gradient_iterations < 1 ||
        max_dual_iterations < 1 || max_bisection_iterations < 1)
        throw std::invalid_argument("iteration caps must be >= 1");
    if (gamma_upper && !(*gamma_upper > 0.0))
        throw std::invalid_argument("gamma upper bound must be positive");
}

int next_state(int x, std::span<const double> tau, Mode mode, const QuantizedStateSpace& grid,
               bool* clamped) {
    const double l = service_time(x, tau, mode);
    if (clamped)
        *clamped = grid.is_clamped(l);
    return grid.interval_of(l);
}

double q_function(double y, const Action& a, const ValueFunction& value, double gamma,
                  double lambda, const SystemModel& model, const QuantizedStateSpace& grid) {
    return QSurrogate(y, value, gamma, lambda, model, grid, nullptr).value(a);
}

double grad_R_y(int q, const QuantizedPolicy& policy, double gamma, double lambda,
                const SystemModel& model, const QuantizedStateSpace& grid) {
    const Action& a = policy[q];
    return expected_service_time(a.tau, model.dist, model.mode) + grid.midpoint(q) + a.z -
           gamma - lambda * model.power.p_bar;
}

std::vector<double> envelope_slopes(const QuantizedPolicy& policy, double gamma, double lambda,
                                    const SystemModel& model, const QuantizedStateSpace& grid) {
    std::vector<double> slopes(grid.size());
    for (int q = 0; q < grid.size(); ++q)
        slopes[q] = grad_R_y(q, policy, gamma, lambda, model, grid);
    return slopes;
}

double grad_q_tau(double y, const Action& a, const ValueFunction& value, int x, double lambda,
                  const SystemModel& model, const QuantizedStateSpace& grid) {
    if (x < 1 || x > model.b())
        throw std::out_of_range("batch index outside [1, b]");
    const double alpha = model.power.alpha;
    const double d = y + a.z;
    const double own = d + lambda * batch_energy_derivative(a.tau[x - 1], alpha);
    if (model.mode == Mode::kPts) {
        const double f = model.dist.pmf(x);
        if (f == 0.0)
            return 0.0;
        return x * f * (value.slope_at(x * a.tau[x - 1], grid) + own);
    }
    double tail = 0.0;
    double cumulative = service_time(x, a.tau, Mode::kUts);
    for (int k = x; k <= model.b(); ++k) {
        if (k > x)
            cumulative += a.tau[k - 1];
        tail += model.dist.pmf(k) * value.slope_at(cumulative, grid);
    }
    return tail + model.dist.survival(x) * own;
}

double grad_q_z(double y, const Action& a, double gamma, double lambda, const SystemModel& model) {
    return expected_service_time(a.tau, model.dist, model.mode) + y + a.z - gamma -
           lambda * model.power.p_bar;
}

BendersResult benders_inner(double y, const Action& warm, const ValueFunction& value,
                            double gamma, double lambda, const SystemModel& model,
                            const QuantizedStateSpace& grid, const SolverConfig& cfg) {
    const int b = model.b();
    Action a = warm;
    a.z = std::max(0.0, a.z);
    for (double& t : a.tau)
        t = clamp_tau(t, model.power);

    std::vector<int> frozen;
    if (cfg.landing_slopes == LandingSlopes::kFrozen) {
        frozen.resize(b);
        for (int x = 1; x <= b; ++x)
            frozen[x - 1] = next_state(x, a.tau, model.mode, grid);
    }
    const QSurrogate q(y, value, gamma, lambda, model, grid, frozen.empty() ? nullptr : &frozen);

    std::vector<char> active(b);
    for (int x = 1; x <= b; ++x)
        active[x - 1] = coordinate_weight(x, model) > 0.0;

    // Q is convex in tau for fixed z and quadratic in z, but not jointly
    // convex: alternation can stall at z = 0 with slow speeds. Run it from the
    // warm start with the exact wait first, and from a zero-wait start, and
    // keep the better end point.
    auto alternate = [&](Action start, bool wait_first) {
        BendersResult r;
        if (wait_first)
            wait_block(q, start);
        double previous = q.value(start);
        for (int k = 1; k <= cfg.max_benders_iterations; ++k) {
            r.iterations = k;
            speed_block(q, start, active, model, cfg);
            wait_block(q, start);
            const double current = q.value(start);
            const bool settled =
                std::abs(current - previous) <= cfg.eps_a * std::max(1.0, std::abs(current));
            previous = current;
            if (settled) {
                r.converged = true;
                break;
            }
        }
        settle_massless(q, start, active, lambda, model);
        r.q_value = q.value(start);
        r.action = std::move(start);
        return r;
    };

    BendersResult result = alternate(a, true);
    Action zero_wait = a;
    zero_wait.z = 0.0;
    BendersResult other = alternate(std::move(zero_wait), false);
    other.iterations += result.iterations;
    result.iterations = other.iterations;
    if (other.q_value < result.q_value) {
        other.converged = other.converged && result.converged;
        return other;
    }
    result.converged = other.converged && result.converged;
    return result;
}

namespace {

int resolve_threads(const SolverConfig& cfg) {
    if (cfg.threads > 0)
        return cfg.threads;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

} // namespace

SweepResult bellman_sweep(const ValueFunction& value, const QuantizedPolicy& warm, double gamma,
                          double lambda, const SystemModel& model,
                          const QuantizedStateSpace& grid, const SolverConfig& cfg) {
    const int n = grid.size();
    SweepResult out;
    out.value.values.assign(n, 0.0);
    out.policy.actions.resize(n);
    std::vector<char> converged(n, 1);

    // Jacobi sweep: state q reads only `value` and writes only slot q.
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_threads(cfg))
    for (int q = 0; q < n; ++q) {
        BendersResult r =
            benders_inner(grid.midpoint(q), warm[q], value, gamma, lambda, model, grid, cfg);
        out.value.values[q] = r.q_value;
        out.policy.actions[q] = std::move(r.action);
        converged[q] = r.converged;
    }
    out.unconverged_states = static_cast<int>(std::count(converged.begin(), converged.end(), 0));
    out.value.slopes = envelope_slopes(out.policy, gamma, lambda, model, grid);
    return out;
}

Action initial_action(const SystemModel& model) {
    const PowerModel& p = model.power;
    const double tau = clamp_tau(std::pow(p.p_bar, -(p.alpha - 1.0) / (p.alpha + 1.0)), p);
    return Action{0.0, std::vector<double>(model.b(), tau)};
}

ValueIterationResult value_iteration(double gamma, double lambda, const SystemModel& model,
                                     const QuantizedStateSpace& grid, const SolverConfig& cfg,
                                     const ValueIterationResult* warm) {
    ValueIterationResult out;
    if (warm) {
        out.value = warm->value;
        out.policy = warm->policy;
    } else {
        out.value.values.assign(grid.size(), 0.0);
        out.value.slopes.assign(grid.size(), 0.0);
        out.policy = QuantizedPolicy::constant(grid.size(), initial_action(model));
    }

    for (int m = 1; m <= cfg.max_value_iterations; ++m) {
        SweepResult sweep = bellman_sweep(out.value, out.policy, gamma, lambda, model, grid, cfg);
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int q = 0; q < grid.size(); ++q) {
            const double diff = sweep.value.values[q] - out.value.values[q];
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
        const double span = hi - lo;
        out.span_trace.push_back(span);
        out.gain = 0.5 * (hi + lo);
        out.iterations = m;
        out.unconverged_backups += sweep.unconverged_states;

        // Relative values: pin R at the first midpoint to zero.
        const double shift = sweep.value.values[0];
        for (double& r : sweep.value.values)
            r -= shift;
        out.value = std::move(sweep.value);
        out.policy = std::move(sweep.policy);

        if (span <= cfg.eps_R) {
            out.converged = true;
            break;
        }
        constexpr int kStallWindow = 50;
        if (m > kStallWindow &&
            span >= (1.0 - 1e-3) * out.span_trace[m - 1 - kStallWindow]) {
            out.stalled = true;
            break;
        }
    }
    return out;
}

double bellman_residual(const ValueIterationResult& vi, double gamma, double lambda,
                        const SystemModel& model, const QuantizedStateSpace& grid,
                        const SolverConfig& cfg) {
    const SweepResult next = bellman_sweep(vi.value, vi.policy, gamma, lambda, model, grid, cfg);
    double worst = 0.0;
    for (int q = 0; q < grid.size(); ++q)
        worst = std::max(worst, std::abs(next.value.values[q] - vi.value.values[q] - vi.gain));
    return worst;
}

StationaryDistribution stationary_distribution(const QuantizedPolicy& policy,
                                               const SystemModel& model,
                                               const QuantizedStateSpace& grid,
                                               int max_iterations) {
    const int n = grid.size();
    const int b = model.b();
    if (policy.size() != n)
        throw std::invalid_argument("policy table size does not match the state grid");

    // Sparse rows: at most b successors per interval.
    std::vector<int> succ(static_cast<std::size_t>(n) * b);
    for (int q = 0; q < n; ++q)
        for (int x = 1; x <= b; ++x)
            succ[q * b + x - 1] = next_state(x, policy[q].tau, model.mode, grid);

    StationaryDistribution out;
    std::vector<double> pi(n, 0.0);
    // First state of a run: the task started from y = 0.
    const int start = grid.interval_of(0.0);
    for (int x = 1; x <= b; ++x)
        pi[succ[start * b + x - 1]] += model.dist.pmf(x);

    std::vector<double> next(n);
    bool converged = false;
    for (int it = 1; it <= max_iterations; ++it) {
        for (int q = 0; q < n; ++q)
            next[q] = 0.5 * pi[q];
        for (int q = 0; q < n; ++q) {
            if (pi[q] == 0.0)
                continue;
            for (int x = 1; x <= b; ++x)
                next[succ[q * b + x - 1]] += 0.5 * pi[q] * model.dist.pmf(x);
        }
        double change = 0.0;
        for (int q = 0; q < n; ++q)
            change += std::abs(next[q] - pi[q]);
        pi.swap(next);
        out.iterations = it;
        if (change <= 1e-12) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("stationary distribution power iteration did not converge");

    double total = 0.0;
    for (double p : pi)
        total += p;
    for (double& p : pi)
        p /= total;

    for (int q = 0; q < n; ++q)
        for (int x = 1; x <= b; ++x)
            if (grid.is_clamped(service_time(x, policy[q].tau, model.mode)))
                out.clamp_mass += pi[q] * model.dist.pmf(x);
    out.probs = std::move(pi);
    return out;
}

PolicyStatistics policy_statistics(const QuantizedPolicy& policy,
                                   const StationaryDistribution& stationary,
                                   const SystemModel& model, const QuantizedStateSpace& grid) {
    const int b = model.b();
    const double alpha = model.power.alpha;
    const int n = grid.size();
    std::vector<double> l_bar(n), w_bar(n);
    for (int q = 0; q < n; ++q) {
        l_bar[q] = expected_service_time(policy[q].tau, model.dist, model.mode);
        w_bar[q] = expected_energy(policy[q].tau, model.dist, model.mode, alpha);
    }

    PolicyStatistics s;
    s.clamp_mass = stationary.clamp_mass;
    s.support_min = std::numeric_limits<double>::infinity();
    s.support_max = -s.support_min;
    // Y is the service time of the task issued from the previous state; the
    // action taken at Y is that of the interval containing it.
    for (int q = 0; q < n; ++q) {
        const double pq = stationary.probs[q];
        if (pq == 0.0)
            continue;
        for (int x = 1; x <= b; ++x) {
            const double w = pq * model.dist.pmf(x);
            if (w == 0.0)
                continue;
            const double y = service_time(x, policy[q].tau, model.mode);
            const int next = grid.interval_of(y);
            const double z = policy[next].z;
            s.duration += w * (y + z);
            s.age += w * epoch_area(y, z, l_bar[next]);
            s.energy += w * w_bar[next];
            s.service += w * l_bar[next];
            if (w > 1e-9) {
                s.support_min = std::min(s.support_min, y);
                s.support_max = std::max(s.support_max, y);
            }
        }
    }
    return s;
}

double dual_update(double lambda, const PolicyStatistics& stats, double step, double p_bar) {
    return std::max(0.0, lambda - step * (p_bar * stats.duration - stats.energy));
}

double evaluate_J(double gamma, const PolicyStatistics& stats) {
    return stats.age - gamma * stats.duration;
}

namespace {

double constraint_gap(const PolicyStatistics& stats, double p_bar) {
    return stats.energy - p_bar * stats.duration;
}

struct Evaluation {
    ValueIterationResult vi;
    PolicyStatistics stats;
};

Evaluation evaluate_at(double gamma, double lambda, const SystemModel& model,
                       const QuantizedStateSpace& grid, const SolverConfig& cfg,
                       const ValueIterationResult* warm) {
    Evaluation e;
    e.vi = value_iteration(gamma, lambda, model, grid, cfg, warm);
    const StationaryDistribution st = stationary_distribution(e.vi.policy, model, grid);
    e.stats = policy_statistics(e.vi.policy, st, model, grid);
    return e;
}

} // namespace

DualResult solve_dual(double gamma, double lambda0, const SystemModel& model,
                      const QuantizedStateSpace& grid, const SolverConfig& cfg,
                      const ValueIterationResult* warm) {
    const double p_bar = model.power.p_bar;
    const double s0 = cfg.s0 > 0.0 ? cfg.s0 : 0.1 / p_bar;

    DualResult out;
    double lambda = std::max(0.0, lambda0);
    Evaluation e = evaluate_at(gamma, lambda, model, grid, cfg, warm);
    out.value_sweeps += e.vi.iterations;
    out.lambda_trace.push_back(lambda);

    // Bracket ends for the bracketed rule: lo has a violated budget (gap > 0),
    // hi a slack one (gap < 0).
    struct End {
        double lambda, gap;
    };
    std::optional<End> lo, hi;
    int retained_side = 0;

    for (int l = 1; l <= cfg.max_dual_iterations; ++l) {
        out.iterations = l;
        const double gap = constraint_gap(e.stats, p_bar);
        const double scale = p_bar * e.stats.duration;
        if (std::abs(gap) <= 1e-12 * scale || (lambda == 0.0 && gap <= 0.0)) {
            out.converged = true;
            break;
        }

        double next;
        if (cfg.dual_rule == DualStepRule::kDiminishing) {
            next = dual_update(lambda, e.stats, s0 / l, p_bar);
        } else {
            if (gap > 0.0) {
                if (lo && retained_side == -1 && hi)
                    hi->gap *= 0.5; // Illinois: hi kept twice in a row
                lo = End{lambda, gap};
                retained_side = hi ? -1 : 0;
            } else {
                if (hi && retained_side == 1 && lo)
                    lo->gap *= 0.5;
                hi = End{lambda, gap};
                retained_side = lo ? 1 : 0;
            }
            if (lo && hi) {
                next = lo->lambda + lo->gap * (hi->lambda - lo->lambda) / (lo->gap - hi->gap);
            } else if (lo) {
                // The gap can be orders of magnitude off scale near lambda = 0,
                // so grow lambda geometrically instead of stepping by the gap.
                next = std::max(2.0 * lambda, s0);
            } else {
                next = 0.5 * lambda;
                if (next < 0.5 * s0 * 1e-6)
                    next = 0.0;
            }
        }

        if (std::abs(next - lambda) <= cfg.eps_lambda) {
            out.converged = true;
            break;
        }
        lambda = next;
        e = evaluate_at(gamma, lambda, model, grid, cfg, &e.vi);
        out.value_sweeps += e.vi.iterations;
        out.lambda_trace.push_back(lambda);
    }
    out.lambda = lambda;
    out.vi = std::move(e.vi);
    out.stats = e.stats;
    return out;
}

double reference_policy_aoi(const SystemModel& model) {
    const PowerModel& p = model.power;
    const TaskSizeDistribution& d = model.dist;
    const double mean = d.mean();
    const double second = d.moment(2.0);
    const double tau_cs = std::pow(p.p_bar, -(p.alpha - 1.0) / (p.alpha + 1.0));
    const double tau = clamp_tau(tau_cs, p);
    // Constant speed: Y = L = tau X. Wait z so that E[X] e(tau) / (tau E[X] + z) <= p_bar.
    const double z = std::max(0.0, mean * batch_energy(tau, p.alpha) / p.p_bar - tau * mean);
    const double ey = tau * mean;
    const double ey2 = tau * tau * second;
    const double area = (ey + z) * ey + 0.5 * (ey2 + 2.0 * z * ey + z * z);
    return area / (ey + z);
}

SolveResult dinkelbach_solve(const SystemModel& model, const QuantizedStateSpace& grid,
                             const SolverConfig& cfg) {
    model.power.validate();
    cfg.validate();

    SolveResult result;
    SolveDiagnostics& diag = result.diagnostics;

    double lo = 0.0;
    double hi = cfg.gamma_upper ? *cfg.gamma_upper : 2.0 * reference_policy_aoi(model);

    DualResult top = solve_dual(hi, 0.0, model, grid, cfg);
    diag.value_sweeps += top.value_sweeps;
    const double j_top = evaluate_J(hi, top.stats);
    diag.trace.push_back({hi, top.lambda, j_top, top.iterations, top.value_sweeps});
    if (j_top > 0.0)
        throw InfeasibleError("no policy reaches average AoI " + std::to_string(hi) +
                              " under the power budget; bisection bracket is invalid");

    ValueIterationResult warm = top.vi;
    double lambda = top.lambda;
    int steps = 0;
    while (hi - lo > cfg.eps_gamma && steps < cfg.max_bisection_iterations) {
        ++steps;
        const double gamma = 0.5 * (lo + hi);
        DualResult dual = solve_dual(gamma, lambda, model, grid, cfg, &warm);
        diag.value_sweeps += dual.value_sweeps;
        const double j = evaluate_J(gamma, dual.stats);
        diag.trace.push_back({gamma, dual.lambda, j, dual.iterations, dual.value_sweeps});
        if (!dual.converged)
            diag.warnings.push_back("dual loop hit its cap at gamma=" + std::to_string(gamma));
        if (j <= 0.0)
            hi = gamma;
        else
            lo = gamma;
        warm = std::move(dual.vi);
        lambda = dual.lambda;
    }
    diag.bisection_iterations = steps;
    if (hi - lo > cfg.eps_gamma) {
        diag.converged = false;
        diag.warnings.push_back("bisection hit its iteration cap");
    }

    result.gamma_star = 0.5 * (lo + hi);
    DualResult final_dual = solve_dual(result.gamma_star, lambda, model, grid, cfg, &warm);
    diag.value_sweeps += final_dual.value_sweeps;
    diag.dual_iterations = final_dual.iterations;
    diag.value_iterations = final_dual.vi.iterations;
    diag.value_span = final_dual.vi.span_trace.empty() ? 0.0 : final_dual.vi.span_trace.back();
    if (!final_dual.converged) {
        diag.converged = false;
        diag.warnings.push_back("dual loop did not converge at gamma*");
    }
    diag.value_stalled = final_dual.vi.stalled;
    if (final_dual.vi.stalled) {
        diag.warnings.push_back("value iteration span stalled at " +
                                std::to_string(diag.value_span) + " at gamma*");
    } else if (!final_dual.vi.converged) {
        diag.converged = false;
        diag.warnings.push_back("value iteration did not converge at gamma*");
    }

    const PolicyStatistics& st = final_dual.stats;
    diag.J_residual = evaluate_J(result.gamma_star, st);
    diag.J_tolerance = st.duration * cfg.eps_gamma;
    diag.constraint_slack = constraint_gap(st, model.power.p_bar);
    diag.clamp_mass = st.clamp_mass;
    diag.policy_aoi = st.average_aoi();
    diag.policy_power = st.average_power();
    diag.support_min = st.support_min;
    diag.support_max = st.support_max;
    diag.bellman_residual = bellman_residual(final_dual.vi, result.gamma_star, final_dual.lambda,
                                             model, grid, cfg);
    if (st.clamp_mass > 1e-6)
        diag.warnings.push_back("clamped transition mass " + std::to_string(st.clamp_mass) +
                                " exceeds 1e-6; consider a larger y_max");

    result.lambda_star = final_dual.lambda;
    result.policy = std::move(final_dual.vi.policy);
    result.value = std::move(final_dual.vi.value);
    return result;
}

} // namespace agesched
