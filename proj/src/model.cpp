#include "agesched/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace agesched {

std::string_view to_string(Mode mode) { return mode == Mode::kPts ? "pts" : "uts"; }

Mode parse_mode(std::string_view text) {
    if (text == "pts" || text == "PTS")
        return Mode::kPts;
    if (text == "uts" || text == "UTS")
        return Mode::kUts;
    throw std::invalid_argument("unknown mode '" + std::string(text) + "' (expected pts|uts)");
}

TaskSizeDistribution::TaskSizeDistribution(std::vector<double> pmf) : pmf_(std::move(pmf)) {
    if (pmf_.empty())
        throw std::invalid_argument("task-size pmf must have at least one entry");
    double total = 0.0;
    for (double p : pmf_) {
        if (!std::isfinite(p) || p < 0.0)
            throw std::invalid_argument("task-size pmf entries must be finite and non-negative");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("task-size pmf sums to " + std::to_string(total) +
                                    ", expected 1 within 1e-12");
    for (double& p : pmf_)
        p /= total;

    survival_.assign(pmf_.size(), 0.0);
    double tail = 0.0;
    for (std::size_t k = pmf_.size(); k-- > 0;) {
        tail += pmf_[k];
        survival_[k] = tail;
    }
    survival_[0] = 1.0;
}

TaskSizeDistribution TaskSizeDistribution::fixed(int b) {
    if (b < 1)
        throw std::invalid_argument("fixed task size must be >= 1");
    std::vector<double> pmf(b, 0.0);
    pmf.back() = 1.0;
    return TaskSizeDistribution(std::move(pmf));
}

TaskSizeDistribution TaskSizeDistribution::uniform(int lo, int hi, int b) {
    if (lo < 1 || hi < lo || hi > b)
        throw std::invalid_argument("uniform task size needs 1 <= lo <= hi <= b");
    std::vector<double> pmf(b, 0.0);
    for (int x = lo; x <= hi; ++x)
        pmf[x - 1] = 1.0 / (hi - lo + 1);
    return TaskSizeDistribution(std::move(pmf));
}

double TaskSizeDistribution::mean() const { return moment(1.0); }

double TaskSizeDistribution::variance() const {
    const double m = mean();
    return moment(2.0) - m * m;
}

double TaskSizeDistribution::moment(double p) const {
    double acc = 0.0;
    for (int x = 1; x <= max_size(); ++x)
        acc += pmf(x) * std::pow(static_cast<double>(x), p);
    return acc;
}

void PowerModel::validate() const {
    if (!(alpha > 1.0 && alpha <= 2.0))
        throw std::invalid_argument("alpha must lie in (1, 2]");
    if (!(tau_min > 0.0))
        throw std::invalid_argument("tau_min must be positive");
    if (!(tau_max >= tau_min) || !std::isfinite(tau_max))
        throw std::invalid_argument("tau_max must be finite and >= tau_min");
    if (!(p_bar > 0.0) || !std::isfinite(p_bar))
        throw std::invalid_argument("power budget must be positive");
}

void SystemModel::check_action(const Action& a) const {
    if (!(a.z >= 0.0) || !std::isfinite(a.z))
        throw std::invalid_argument("action waiting time must be finite and >= 0");
    if (static_cast<int>(a.tau.size()) != b())
        throw std::invalid_argument("action speed vector has length " +
                                    std::to_string(a.tau.size()) + ", expected " +
                                    std::to_string(b()));
    for (double t : a.tau)
        if (!(t >= power.tau_min && t <= power.tau_max))
            throw std::invalid_argument("batch time " + std::to_string(t) +
                                        " outside [tau_min, tau_max]");
}

double batch_energy(double tau, double alpha) {
    if (!(tau > 0.0))
        throw std::domain_error("batch execution time must be positive");
    if (!(alpha > 1.0))
        throw std::domain_error("alpha must exceed 1");
    return std::pow(tau, -2.0 / (alpha - 1.0));
}

double batch_energy_derivative(double tau, double alpha) {
    return 2.0 / (1.0 - alpha) * std::pow(tau, (1.0 + alpha) / (1.0 - alpha));
}

double service_time(int x, std::span<const double> tau, Mode mode) {
    if (x < 1 || x > static_cast<int>(tau.size()))
        throw std::out_of_range("task size " + std::to_string(x) + " outside [1, " +
                                std::to_string(tau.size()) + "]");
    if (mode == Mode::kPts)
        return x * tau[x - 1];
    return std::accumulate(tau.begin(), tau.begin() + x, 0.0);
}

double task_energy(int x, std::span<const double> tau, Mode mode, double alpha) {
    if (x < 1 || x > static_cast<int>(tau.size()))
        throw std::out_of_range("task size outside [1, b]");
    if (mode == Mode::kPts)
        return x * batch_energy(tau[x - 1], alpha);
    double w = 0.0;
    for (int k = 0; k < x; ++k)
        w += batch_energy(tau[k], alpha);
    return w;
}

double expected_service_time(std::span<const double> tau, const TaskSizeDistribution& dist,
                             Mode mode) {
    double acc = 0.0;
    for (int x = 1; x <= dist.max_size(); ++x)
        acc += mode == Mode::kPts ? dist.pmf(x) * x * tau[x - 1] : dist.survival(x) * tau[x - 1];
    return acc;
}

double expected_energy(std::span<const double> tau, const TaskSizeDistribution& dist, Mode mode,
                       double alpha) {
    double acc = 0.0;
    for (int x = 1; x <= dist.max_size(); ++x) {
        const double weight = mode == Mode::kPts ? dist.pmf(x) * x : dist.survival(x);
        if (weight > 0.0)
            acc += weight * batch_energy(tau[x - 1], alpha);
    }
    return acc;
}

double epoch_area(double y, double z, double l_bar) {
    const double d = y + z;
    return d * l_bar + 0.5 * d * d;
}

CostTerms cost_terms(double y, const Action& a, const SystemModel& model) {
    const double l_bar = expected_service_time(a.tau, model.dist, model.mode);
    const double w_bar = expected_energy(a.tau, model.dist, model.mode, model.power.alpha);
    const double d = y + a.z;
    return {epoch_area(y, a.z, l_bar), d, w_bar - d * model.power.p_bar};
}

double lagrangian_cost(double y, const Action& a, double gamma, double lambda,
                       const SystemModel& model) {
    const CostTerms g = cost_terms(y, a, model);
    return g.age - gamma * g.duration + lambda * g.power;
}

} // namespace agesched
