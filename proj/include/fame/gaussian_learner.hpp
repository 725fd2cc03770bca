#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "fame/continuous_task.hpp"
#include "fame/fast_learner.hpp"
#include "fame/rng.hpp"
#include "fame/tables.hpp"

namespace fame {

/// Log-density of a diagonal Gaussian.
inline double gaussian_log_likelihood(std::span<const double> action, std::span<const double> mean,
                                      std::span<const double> stddev) {
    double total = 0.0;
    for (std::size_t d = 0; d < action.size(); ++d) {
        const double z = (action[d] - mean[d]) / stddev[d];
        total += -0.5 * z * z - std::log(stddev[d]) - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return total;
}

struct GaussianLogLikelihoodGradient {
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// d log N(a; mean, std^2) / d(mean, std), per dimension.
inline GaussianLogLikelihoodGradient gaussian_log_likelihood_gradient(std::span<const double> action,
                                                                      std::span<const double> mean,
                                                                      std::span<const double> stddev) {
    GaussianLogLikelihoodGradient g{std::vector<double>(action.size()), std::vector<double>(action.size())};
    for (std::size_t d = 0; d < action.size(); ++d) {
        const double diff = action[d] - mean[d];
        const double var = stddev[d] * stddev[d];
        g.mean[d] = diff / var;
        g.stddev[d] = diff * diff / (var * stddev[d]) - 1.0 / stddev[d];
    }
    return g;
}

struct TrajectoryStep {
    std::size_t cell = 0;
    std::vector<double> state;
    std::vector<double> action;
    double reward = 0.0;
};

struct Trajectory {
    std::vector<TrajectoryStep> steps;
    bool success = false;
};

/// Fast Gaussian learner: a policy table plus the per-cell return baseline.
struct GaussianLearner {
    GaussianPolicyTable policy;
    std::vector<double> baseline;

    GaussianLearner() = default;
    GaussianLearner(std::size_t cells, std::size_t action_dim)
        : policy(cells, action_dim, 0.0, 1.0), baseline(cells, 0.0) {}

    bool operator==(const GaussianLearner&) const = default;
};

/// Samples an action: uniform in the action box with probability epsilon, else from the cell's Gaussian.
inline std::vector<double> act_gaussian(const GaussianPolicyTable& pi, const ContinuousTask& task, std::size_t cell,
                                        double epsilon, Rng& rng) {
    std::vector<double> a(pi.action_dim);
    if (epsilon > 0.0 && rng.bernoulli(epsilon)) {
        for (std::size_t d = 0; d < a.size(); ++d) a[d] = rng.uniform(task.action_bounds[d].first, task.action_bounds[d].second);
        return a;
    }
    const auto mean = pi.mean_of(cell);
    const auto sd = pi.std_of(cell);
    for (std::size_t d = 0; d < a.size(); ++d) a[d] = rng.normal(mean[d], sd[d]);
    return a;
}

/// Deterministic action: the cell mean.
inline std::vector<double> act_mean(const GaussianPolicyTable& pi, std::size_t cell) {
    const auto mean = pi.mean_of(cell);
    return {mean.begin(), mean.end()};
}

/**
One REINFORCE step per visited cell. Every visit contributes the
baseline-subtracted discounted return times the log-likelihood gradient,
preconditioned by the Gaussian Fisher information (std^2 for the mean,
std^2 / 2 for the standard deviation). Contributions are averaged per cell,
then means are clamped to [-mean_limit, mean_limit] and std to
[sigma_min, sigma_max]. Baselines move toward the
observed returns after the advantages are computed.
*/
inline void gaussian_policy_update(GaussianLearner& learner, std::span<const Trajectory> episodes, const LearnerConfig& cfg) {
    GaussianPolicyTable& pi = learner.policy;
    const std::size_t dim = pi.action_dim;
    std::vector<double> mean_step(pi.mean.size(), 0.0);
    std::vector<double> std_step(pi.std.size(), 0.0);
    std::vector<double> visits(pi.n_cells, 0.0);
    std::vector<double> return_sum(pi.n_cells, 0.0);

    for (const Trajectory& episode : episodes) {
        std::vector<double> returns(episode.steps.size(), 0.0);
        double running = 0.0;
        for (std::size_t t = episode.steps.size(); t-- > 0;) {
            running = episode.steps[t].reward + cfg.gamma * running;
            returns[t] = running;
        }
        for (std::size_t t = 0; t < episode.steps.size(); ++t) {
            const TrajectoryStep& st = episode.steps[t];
            const double advantage = returns[t] - learner.baseline[st.cell];
            visits[st.cell] += 1.0;
            return_sum[st.cell] += returns[t];
            if (advantage == 0.0) continue;
            const auto grad = gaussian_log_likelihood_gradient(st.action, pi.mean_of(st.cell), pi.std_of(st.cell));
            for (std::size_t d = 0; d < dim; ++d) {
                const double sd = pi.std_of(st.cell)[d];
                mean_step[st.cell * dim + d] += advantage * sd * sd * grad.mean[d];
                std_step[st.cell * dim + d] += advantage * 0.5 * sd * sd * grad.stddev[d];
            }
        }
    }
    for (std::size_t c = 0; c < pi.n_cells; ++c) {
        if (visits[c] == 0.0) continue;
        for (std::size_t d = 0; d < dim; ++d) {
            const std::size_t i = c * dim + d;
            pi.mean[i] = std::clamp(pi.mean[i] + cfg.policy_learning_rate * mean_step[i] / visits[c], -cfg.mean_limit, cfg.mean_limit);
            pi.std[i] = std::clamp(pi.std[i] + cfg.policy_learning_rate * std_step[i] / visits[c], kSigmaMin, cfg.sigma_max);
        }
        const double mean_return = return_sum[c] / visits[c];
        learner.baseline[c] += cfg.baseline_rate * (mean_return - learner.baseline[c]);
    }
}

}  // namespace fame
