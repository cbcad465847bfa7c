#pragma once

// Piece-wise constant state quantization and the policy tables defined on it.

#include "agesched/model.hpp"

#include <functional>
#include <vector>

namespace agesched {

/// [0, y_max) split into q_max equal intervals. Interval indices are 0-based
/// in code; files and reports use 1-based numbering.
class QuantizedStateSpace {
public:
    QuantizedStateSpace(double y_max, int q_max);

    int size() const { return q_max_; }
    double y_max() const { return y_max_; }
    double delta() const { return delta_; }
    double midpoint(int q) const { return (q + 0.5) * delta_; }

    /// Interval containing y; values outside [0, y_max) clamp to the first or
    /// last interval.
    int interval_of(double y) const;
    bool is_clamped(double y) const { return y >= y_max_; }

private:
    double y_max_;
    int q_max_;
    double delta_;
};

/// One action per state interval; the policy is constant on each interval.
struct QuantizedPolicy {
    std::vector<Action> actions;

    int size() const { return static_cast<int>(actions.size()); }
    const Action& operator[](int q) const { return actions[q]; }
    Action& operator[](int q) { return actions[q]; }
    bool operator==(const QuantizedPolicy&) const = default;

    static QuantizedPolicy constant(int q_max, const Action& a) {
        return {std::vector<Action>(q_max, a)};
    }
};

/// Any stationary rule mapping the current state y to an action.
class PolicyFunction {
public:
    using Rule = std::function<Action(double)>;

    explicit PolicyFunction(Rule rule) : rule_(std::move(rule)) {}

    static PolicyFunction from_quantized(QuantizedPolicy policy, QuantizedStateSpace grid);
    static PolicyFunction constant(Action a);

    Action operator()(double y) const { return rule_(y); }

private:
    Rule rule_;
};

} // namespace agesched
