#include "agesched/simulator.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

namespace agesched {

std::uint64_t CounterRng::next_u64() {
    std::uint64_t z = seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double CounterRng::next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

int sample_task_size(const TaskSizeDistribution& dist, CounterRng& rng) {
    const double u = rng.next_uniform();
    const int b = dist.max_size();
    double cumulative = 0.0;
    for (int x = 1; x < b; ++x) {
        cumulative += dist.pmf(x);
        if (u < cumulative)
            return x;
    }
    return b;
}

long long warmup_epochs(long long n_epochs) { return std::max<long long>(100, n_epochs / 100); }

SimulationReport simulate(const PolicyFunction& policy, const SystemModel& model,
                          const SimulationOptions& options) {
    if (options.n_epochs < 1)
        throw std::invalid_argument("n_epochs must be >= 1");
    const double alpha = model.power.alpha;
    CounterRng rng(options.seed);

    SimulationReport report;
    report.n_epochs = options.n_epochs;
    report.warmup_epochs = warmup_epochs(options.n_epochs);
    report.seed = options.seed;
    report.y_min = std::numeric_limits<double>::infinity();
    report.y_max = -report.y_min;
    if (options.keep_trace)
        report.trace.reserve(static_cast<std::size_t>(options.n_epochs));

    auto checked_action = [&](double y) {
        Action a = policy(y);
        try {
            model.check_action(a);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("policy returned an invalid action at y=" +
                                        std::to_string(y) + ": " + e.what());
        }
        return a;
    };

    const Action first = checked_action(0.0);
    double y = service_time(sample_task_size(model.dist, rng), first.tau, model.mode);

    double area_sum = 0.0;
    double duration_sum = 0.0;
    double energy_sum = 0.0;
    const long long total = report.warmup_epochs + options.n_epochs;
    for (long long n = 0; n < total; ++n) {
        const Action a = checked_action(y);
        const int x = sample_task_size(model.dist, rng);
        const double l = service_time(x, a.tau, model.mode);
        const double area = epoch_area(y, a.z, l);
        const double w = task_energy(x, a.tau, model.mode, alpha);
        if (n >= report.warmup_epochs) {
            area_sum += area;
            duration_sum += y + a.z;
            energy_sum += w;
            report.y_min = std::min(report.y_min, y);
            report.y_max = std::max(report.y_max, y);
            if (options.keep_trace)
                report.trace.push_back({n - report.warmup_epochs + 1, y, a.z, x, l, area, w});
        }
        y = l;
    }
    if (!(duration_sum > 0.0))
        throw std::invalid_argument("simulated epochs have zero total duration");
    report.avg_aoi = area_sum / duration_sum;
    report.avg_power = energy_sum / duration_sum;
    return report;
}

} // namespace agesched
