#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fame/rng.hpp"

namespace fame {

/**
Parameters of a point-mass reach task.

The state is a position in a box. An action is clipped to
[-max_action, max_action] per dimension and moves the point by
step_size * action, plus Gaussian noise; the result is clipped to the box.
An episode succeeds once the position is within `success_radius` of the goal.
*/
struct PointmassSpec {
    std::size_t state_dim = 1;
    double state_low = -2.0;
    double state_high = 2.0;
    /// Start position; drawn uniformly in the box when absent.
    std::optional<std::vector<double>> start;
    /// Goal position; drawn uniformly in the box when absent.
    std::optional<std::vector<double>> goal;
    double max_action = 1.0;
    /// Displacement per unit of action.
    double step_size = 0.25;
    double dynamics_noise_std = 0.0;
    std::size_t horizon = 25;
    double success_radius = 0.15;
    std::size_t cells_per_dim = 16;
    double success_reward = 1.0;
    /// Weight of the distance-progress shaping term in the reward.
    double progress_weight = 1.0;

    void validate() const {
        if (state_dim != 1 && state_dim != 2) throw std::invalid_argument("PointmassSpec: state_dim must be 1 or 2");
        if (!(state_low < state_high)) throw std::invalid_argument("PointmassSpec: state_low must be below state_high");
        if (!(max_action > 0.0)) throw std::invalid_argument("PointmassSpec: max_action must be positive");
        if (!(step_size > 0.0)) throw std::invalid_argument("PointmassSpec: step_size must be positive");
        if (!(dynamics_noise_std >= 0.0)) throw std::invalid_argument("PointmassSpec: negative dynamics noise");
        if (horizon == 0) throw std::invalid_argument("PointmassSpec: horizon must be at least 1");
        if (!(success_radius > 0.0)) throw std::invalid_argument("PointmassSpec: success_radius must be positive");
        if (cells_per_dim == 0) throw std::invalid_argument("PointmassSpec: cells_per_dim must be positive");
        for (const auto* v : {&start, &goal}) {
            if (!*v) continue;
            if ((*v)->size() != state_dim) throw std::invalid_argument("PointmassSpec: position has wrong dimension");
            for (double x : **v)
                if (x < state_low || x > state_high) throw std::invalid_argument("PointmassSpec: position outside box");
        }
    }
};

struct ContinuousTask {
    std::size_t state_dim = 1;
    std::vector<double> start;
    std::vector<double> goal;
    /// Per-dimension action bounds [low, high].
    std::vector<std::pair<double, double>> action_bounds;
    double step_size = 1.0;
    double dynamics_noise_std = 0.0;
    std::size_t horizon = 1;
    double success_radius = 0.1;
    double state_low = -1.0;
    double state_high = 1.0;
    std::size_t cells_per_dim = 1;
    double success_reward = 1.0;
    double progress_weight = 1.0;

    std::size_t action_dim() const { return state_dim; }

    std::size_t n_cells() const {
        std::size_t n = 1;
        for (std::size_t d = 0; d < state_dim; ++d) n *= cells_per_dim;
        return n;
    }

    /// Index of the discretization cell holding a position.
    std::size_t cell_of(const std::vector<double>& x) const {
        const double width = (state_high - state_low) / static_cast<double>(cells_per_dim);
        std::size_t index = 0;
        for (std::size_t d = 0; d < state_dim; ++d) {
            auto c = static_cast<long long>(std::floor((x[d] - state_low) / width));
            c = std::clamp<long long>(c, 0, static_cast<long long>(cells_per_dim) - 1);
            index = index * cells_per_dim + static_cast<std::size_t>(c);
        }
        return index;
    }

    double distance_to_goal(const std::vector<double>& x) const {
        double total = 0.0;
        for (std::size_t d = 0; d < state_dim; ++d) total += (x[d] - goal[d]) * (x[d] - goal[d]);
        return std::sqrt(total);
    }

    bool success(const std::vector<double>& x) const { return distance_to_goal(x) <= success_radius; }

    std::vector<double> clip_action(std::vector<double> a) const {
        for (std::size_t d = 0; d < a.size(); ++d) a[d] = std::clamp(a[d], action_bounds[d].first, action_bounds[d].second);
        return a;
    }

    bool operator==(const ContinuousTask&) const = default;
};

struct ContinuousStep {
    std::vector<double> next_state;
    double reward = 0.0;
    bool done = false;
    bool success = false;
};

/// Applies one clipped action. Reward is the decrease in distance to the
/// goal (scaled by progress_weight) plus success_reward on reaching it.
inline ContinuousStep step(const ContinuousTask& task, const std::vector<double>& state,
                           const std::vector<double>& action, Rng& rng) {
    if (state.size() != task.state_dim || action.size() != task.action_dim())
        throw std::invalid_argument("step: dimension mismatch");
    const auto a = task.clip_action(action);
    ContinuousStep out;
    out.next_state = state;
    for (std::size_t d = 0; d < task.state_dim; ++d) {
        double x = state[d] + task.step_size * a[d];
        if (task.dynamics_noise_std > 0.0) x += rng.normal(0.0, task.dynamics_noise_std);
        out.next_state[d] = std::clamp(x, task.state_low, task.state_high);
    }
    const double before = task.distance_to_goal(state);
    const double after = task.distance_to_goal(out.next_state);
    out.success = task.success(out.next_state);
    out.reward = task.progress_weight * (before - after) + (out.success ? task.success_reward : 0.0);
    out.done = out.success;
    return out;
}

/// Builds a point-mass task as a pure function of (spec, seed).
inline ContinuousTask generate_pointmass(const PointmassSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(derive_seed(seed, 0x706d61737373ULL));
    ContinuousTask task;
    task.state_dim = spec.state_dim;
    task.state_low = spec.state_low;
    task.state_high = spec.state_high;
    auto draw = [&] {
        std::vector<double> x(spec.state_dim);
        for (double& v : x) v = rng.uniform(spec.state_low, spec.state_high);
        return x;
    };
    task.start = spec.start ? *spec.start : draw();
    task.goal = spec.goal ? *spec.goal : draw();
    task.action_bounds.assign(spec.state_dim, {-spec.max_action, spec.max_action});
    task.step_size = spec.step_size;
    task.dynamics_noise_std = spec.dynamics_noise_std;
    task.horizon = spec.horizon;
    task.success_radius = spec.success_radius;
    task.cells_per_dim = spec.cells_per_dim;
    task.success_reward = spec.success_reward;
    task.progress_weight = spec.progress_weight;
    return task;
}

}  // namespace fame
