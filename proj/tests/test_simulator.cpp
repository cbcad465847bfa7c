#include "agesched/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace agesched;
using doctest::Approx;

namespace {

SystemModel two_size(Mode mode) {
    return SystemModel{TaskSizeDistribution({0.7, 0.3}), PowerModel{2.0, 1e-6, 1e3, 8.0}, mode};
}

} // namespace

TEST_CASE("counter generator is a pure function of seed and position") {
    CounterRng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const std::uint64_t va = a.next_u64();
        CHECK(va == b.next_u64());
        CHECK(va != c.next_u64());
    }
    CHECK(a.counter() == 100);
    // Reference value of SplitMix64 with state 0 after one step.
    CounterRng zero(0);
    CHECK(zero.next_u64() == 0xe220a8397b1dcdafULL);
    CounterRng u(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.next_uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("inverse-CDF task sizes follow the law") {
    CounterRng one(1);
    const TaskSizeDistribution single({1.0});
    for (int i = 0; i < 100; ++i)
        CHECK(sample_task_size(single, one) == 1);

    CounterRng rng(42);
    const TaskSizeDistribution two({0.7, 0.3});
    int ones = 0;
    for (int i = 0; i < 1000000; ++i)
        ones += sample_task_size(two, rng) == 1;
    CHECK(ones / 1e6 >= 0.698);
    CHECK(ones / 1e6 <= 0.702);

    const TaskSizeDistribution five = TaskSizeDistribution::uniform(1, 5, 5);
    double sum = 0.0;
    for (int i = 0; i < 1000000; ++i)
        sum += sample_task_size(five, rng);
    CHECK(sum / 1e6 >= 2.99);
    CHECK(sum / 1e6 <= 3.01);
}

TEST_CASE("deterministic size gives exact averages") {
    const SystemModel model{TaskSizeDistribution::fixed(2), PowerModel{2.0, 1e-6, 1e3, 8.0},
                            Mode::kUts};
    const PolicyFunction policy = PolicyFunction::constant(Action{0.0, {0.5, 0.5}});
    const SimulationReport r = simulate(policy, model, {5000, 1, true});
    CHECK(r.avg_aoi == Approx(1.5).epsilon(1e-12));
    CHECK(r.avg_power == Approx(8.0).epsilon(1e-12));
    CHECK(r.y_min == Approx(1.0));
    CHECK(r.y_max == Approx(1.0));
    CHECK(r.trace.size() == 5000);
    CHECK(r.warmup_epochs == 100);
    CHECK(r.trace.front().n == 1);
}

TEST_CASE("zero-wait constant speed converges to the renewal AoI") {
    const PolicyFunction policy = PolicyFunction::constant(Action{0.0, {0.5, 0.5}});
    const SimulationReport r = simulate(policy, two_size(Mode::kUts), {1000000, 42, false});
    const double analytic = 0.5 * (0.21 / 2.6 + 1.95);
    CHECK(std::abs(r.avg_aoi / analytic - 1.0) <= 0.01);
    CHECK(std::abs(r.avg_power / 8.0 - 1.0) <= 0.01);
}

TEST_CASE("reported averages are ratios of sums over the trace") {
    const PolicyFunction policy([](double y) {
        return Action{std::max(0.0, 0.7 - y), {0.45, 0.4}};
    });
    const SimulationReport r = simulate(policy, two_size(Mode::kPts), {20000, 9, true});
    double area = 0.0, duration = 0.0, energy = 0.0;
    for (const EpochRecord& e : r.trace) {
        area += e.area;
        duration += e.y + e.z;
        energy += e.energy;
        CHECK(e.area == Approx(epoch_area(e.y, e.z, e.service)));
    }
    CHECK(r.avg_aoi == Approx(area / duration).epsilon(1e-12));
    CHECK(r.avg_power == Approx(energy / duration).epsilon(1e-12));
    // The next state is the realized service time.
    for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i].y == r.trace[i - 1].service);
}

TEST_CASE("identical inputs reproduce bit-identical reports") {
    const PolicyFunction policy = PolicyFunction::constant(Action{0.1, {0.5, 0.3}});
    const SimulationReport a = simulate(policy, two_size(Mode::kUts), {50000, 7, false});
    const SimulationReport b = simulate(policy, two_size(Mode::kUts), {50000, 7, false});
    const SimulationReport c = simulate(policy, two_size(Mode::kUts), {50000, 8, false});
    CHECK(a.avg_aoi == b.avg_aoi);
    CHECK(a.avg_power == b.avg_power);
    CHECK(a.avg_aoi != c.avg_aoi);
}

TEST_CASE("invalid inputs") {
    const PolicyFunction ok = PolicyFunction::constant(Action{0.0, {0.5, 0.5}});
    CHECK_THROWS_AS(simulate(ok, two_size(Mode::kUts), {0, 1, false}), std::invalid_argument);
    const PolicyFunction bad = PolicyFunction::constant(Action{-1.0, {0.5, 0.5}});
    CHECK_THROWS_AS(simulate(bad, two_size(Mode::kUts), {10, 1, false}), std::invalid_argument);
    const PolicyFunction short_tau = PolicyFunction::constant(Action{0.0, {0.5}});
    CHECK_THROWS_AS(simulate(short_tau, two_size(Mode::kUts), {10, 1, false}),
                    std::invalid_argument);
}
