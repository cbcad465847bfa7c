#pragma once

// Seeded simulation of the generate-at-will update loop: each epoch waits,
// draws a task size, runs it with the chosen speeds and accumulates the age
// area and the energy spent.

#include "agesched/model.hpp"
#include "agesched/policy.hpp"

#include <cstdint>
#include <vector>

namespace agesched {

/// SplitMix64 used as a counter-based generator: the n-th output is the
/// SplitMix64 finalizer applied to seed + n * golden-gamma.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double next_uniform();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Inverse-CDF draw of a batch count in 1..b.
int sample_task_size(const TaskSizeDistribution& dist, CounterRng& rng);

struct EpochRecord {
    long long n = 0;
    double y = 0.0;
    double z = 0.0;
    int x = 0;
    double service = 0.0;
    double area = 0.0;
    double energy = 0.0;
};

struct SimulationReport {
    long long n_epochs = 0;
    long long warmup_epochs = 0;
    std::uint64_t seed = 0;
    double avg_aoi = 0.0;   // sum of areas / sum of durations
    double avg_power = 0.0; // sum of energies / sum of durations
    double y_min = 0.0;
    double y_max = 0.0;
    std::vector<EpochRecord> trace;
};

struct SimulationOptions {
    long long n_epochs = 1000000;
    std::uint64_t seed = 42;
    bool keep_trace = false;
};

/// Warm-up epochs run before the n measured ones.
long long warmup_epochs(long long n_epochs);

/// Runs warmup_epochs(n) + n epochs starting from the service time of a task
/// drawn under policy(0). Throws std::invalid_argument when n < 1 or the
/// policy returns an action outside the action set.
SimulationReport simulate(const PolicyFunction& policy, const SystemModel& model,
                          const SimulationOptions& options);

} // namespace agesched
