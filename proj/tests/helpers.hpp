#pragma once

#include <cstddef>
#include <vector>

#include "fame/config.hpp"
#include "fame/mdp.hpp"
#include "fame/rng.hpp"
#include "fame/tables.hpp"

namespace fame::test {

/// Dense random MDP with a random start distribution and no terminal states.
inline TabularMdp random_mdp(Rng& rng, std::size_t states, std::size_t actions, double gamma) {
    TabularMdp mdp(states, actions, gamma);
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t a = 0; a < actions; ++a) {
            double total = 0.0;
            for (std::size_t n = 0; n < states; ++n) total += mdp.p(s, a, n) = rng.uniform() + 0.01;
            for (std::size_t n = 0; n < states; ++n) mdp.p(s, a, n) /= total;
            mdp.r(s, a) = rng.uniform(-1.0, 1.0);
        }
    double total = 0.0;
    for (double& x : mdp.start_dist) total += x = rng.uniform() + 0.01;
    for (double& x : mdp.start_dist) x /= total;
    return mdp;
}

inline CategoricalPolicyTable random_policy(Rng& rng, std::size_t states, std::size_t actions) {
    CategoricalPolicyTable pi(states, actions);
    for (std::size_t s = 0; s < states; ++s) {
        double total = 0.0;
        for (double& p : pi.row(s)) total += p = rng.uniform() + 0.05;
        for (double& p : pi.row(s)) p /= total;
    }
    return pi;
}

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double tv = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
    return 0.5 * tv;
}

/// Two-task gridworld A-B-A sequence sized for fast tests.
inline RunConfig small_gridworld_config(Method method, std::uint64_t seed, std::size_t steps = 600) {
    const auto task = [](std::uint64_t env_seed, Cell start, Cell goal) {
        TaskEntry e;
        e.family = TaskFamily::gridworld;
        e.seed = env_seed;
        e.grid.width = 4;
        e.grid.height = 4;
        e.grid.start = start;
        e.grid.goal = goal;
        e.grid.step_reward = -0.01;
        e.grid.max_episode_steps = 30;
        return e;
    };
    const auto a = task(1, {0, 0}, {0, 3});
    const auto b = task(2, {3, 3}, {3, 0});
    RunConfig cfg;
    cfg.method = method;
    cfg.seed = seed;
    cfg.sequence.steps_per_task = steps;
    cfg.sequence.tasks = {a, b, a};
    cfg.learner.epsilon = {1.0, 0.05, steps / 3};
    cfg.learner.bc_steps = steps / 10;
    cfg.meta_records = steps / 20;
    cfg.warmup_episodes = 3;
    cfg.curve_points = 6;
    cfg.curve_episodes = 2;
    return cfg;
}

inline RunConfig small_pointmass_config(Method method, std::uint64_t seed, std::size_t steps = 600) {
    const auto task = [](std::uint64_t env_seed, double start, double goal) {
        TaskEntry e;
        e.family = TaskFamily::pointmass;
        e.seed = env_seed;
        e.pointmass.start = std::vector<double>{start};
        e.pointmass.goal = std::vector<double>{goal};
        e.pointmass.horizon = 20;
        return e;
    };
    const auto a = task(1, -0.5, -1.5);
    const auto b = task(2, -0.125, 1.5);
    RunConfig cfg;
    cfg.method = method;
    cfg.seed = seed;
    cfg.sequence.steps_per_task = steps;
    cfg.sequence.tasks = {a, b, a};
    cfg.learner.epsilon = {0.5, 0.0, steps / 2};
    cfg.learner.policy_learning_rate = 0.2;
    cfg.learner.mean_limit = 1.0;
    cfg.learner.gamma = 0.95;
    cfg.learner.bc_steps = steps / 10;
    cfg.meta_records = steps / 20;
    cfg.warmup_episodes = 3;
    cfg.curve_points = 6;
    cfg.curve_episodes = 2;
    return cfg;
}

}  // namespace fame::test
