#include "agesched/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace agesched {

QuantizedStateSpace::QuantizedStateSpace(double y_max, int q_max)
    : y_max_(y_max), q_max_(q_max), delta_(y_max / q_max) {
    if (!(y_max > 0.0) || !std::isfinite(y_max))
        throw std::invalid_argument("y_max must be positive and finite");
    if (q_max < 1)
        throw std::invalid_argument("q_max must be >= 1");
}

int QuantizedStateSpace::interval_of(double y) const {
    if (!(y > 0.0))
        return 0;
    if (y >= y_max_)
        return q_max_ - 1;
    const int q = static_cast<int>(std::floor(y / delta_));
    return q < q_max_ ? q : q_max_ - 1;
}

PolicyFunction PolicyFunction::from_quantized(QuantizedPolicy policy, QuantizedStateSpace grid) {
    if (policy.size() != grid.size())
        throw std::invalid_argument("policy table size does not match the state grid");
    return PolicyFunction([policy = std::move(policy), grid](double y) {
        return policy[grid.interval_of(y)];
    });
}

PolicyFunction PolicyFunction::constant(Action a) {
    return PolicyFunction([a = std::move(a)](double) { return a; });
}

} // namespace agesched
