#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "fame/rng.hpp"
#include "fame/tables.hpp"

namespace fame {

/// One environment interaction of a discrete task.
struct Transition {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t next_state = 0;
    bool done = false;
    std::size_t task_id = 0;
};

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    std::size_t decay_steps = 1;

    double operator()(std::size_t step) const {
        if (decay_steps == 0 || step >= decay_steps) return end;
        const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
        return start + (end - start) * frac;
    }
};

struct LearnerConfig {
    double learning_rate = 0.5;
    EpsilonSchedule epsilon{};
    /// Weight of the behavior-cloning KL term.
    double bc_lambda = 1.0;
    /// Number of steps the behavior-cloning term stays active.
    std::size_t bc_steps = 0;
    double gamma = 0.9;
    /// Step size of the Gaussian policy-gradient learner.
    double policy_learning_rate = 0.05;
    /// Rate of the per-cell running-mean return baseline.
    double baseline_rate = 0.1;
    /// Upper clamp on Gaussian standard deviations.
    double sigma_max = 1.0;
    /// Symmetric bound on Gaussian means; infinite leaves them free.
    double mean_limit = std::numeric_limits<double>::infinity();

    void validate(std::size_t steps_per_task) const {
        if (!(learning_rate >= 0.0)) throw std::invalid_argument("LearnerConfig: negative learning rate");
        if (!(bc_lambda >= 0.0)) throw std::invalid_argument("LearnerConfig: bc_lambda must be non-negative");
        if (bc_steps > steps_per_task) throw std::invalid_argument("LearnerConfig: bc_steps exceeds steps per task");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("LearnerConfig: gamma must lie in (0,1)");
        if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0))
            throw std::invalid_argument("LearnerConfig: epsilon outside [0,1]");
        if (!(mean_limit > 0.0)) throw std::invalid_argument("LearnerConfig: mean_limit must be positive");
        if (!(sigma_max > kSigmaMin)) throw std::invalid_argument("LearnerConfig: sigma_max must exceed sigma_min");
    }
};

/// Tabular TD(0): Q(s,a) += alpha (r + gamma max_a' Q(s',a') (1 - done) - Q(s,a)).
inline void q_update(QTable& q, const Transition& tr, const LearnerConfig& cfg) {
    const auto next = q.row(tr.next_state);
    const double bootstrap = tr.done ? 0.0 : cfg.gamma * *std::max_element(next.begin(), next.end());
    double& value = q(tr.state, tr.action);
    value += cfg.learning_rate * (tr.reward + bootstrap - value);
}

/**
Gradient of lambda * KL(meta(.|s) || softmax(Q(s,.)/tau)) with respect to
Q(s, .): lambda / tau * (softmax(Q/tau) - meta).
*/
inline std::vector<double> bc_kl_gradient(std::span<const double> q_row, std::span<const double> meta_row, double tau,
                                          double lambda) {
    if (q_row.size() != meta_row.size()) throw std::invalid_argument("bc_kl_gradient: size mismatch");
    auto grad = softmax(q_row, tau);
    for (std::size_t a = 0; a < grad.size(); ++a) grad[a] = lambda / tau * (grad[a] - meta_row[a]);
    return grad;
}

/**
TD update on every transition of the batch followed by one gradient step
on lambda * E_s[KL(meta(.|s) || softmax(Q(s,.)/tau))], the expectation taken
over the batch states. lambda = 0 reduces to q_update applied in order.
*/
inline void bc_regularized_q_update(QTable& q, std::span<const Transition> batch, const CategoricalPolicyTable& meta_pi,
                                    const LearnerConfig& cfg) {
    if (cfg.bc_lambda < 0.0) throw std::invalid_argument("bc_regularized_q_update: negative lambda");
    if (meta_pi.n_states != q.n_states || meta_pi.n_actions != q.n_actions)
        throw std::invalid_argument("bc_regularized_q_update: meta policy shape mismatch");
    for (const Transition& tr : batch) q_update(q, tr, cfg);
    if (cfg.bc_lambda == 0.0 || batch.empty()) return;
    std::vector<double> step(q.values.size(), 0.0);
    const double scale = cfg.learning_rate / static_cast<double>(batch.size());
    for (const Transition& tr : batch) {
        const auto grad = bc_kl_gradient(q.row(tr.state), meta_pi.row(tr.state), q.temperature, cfg.bc_lambda);
        for (std::size_t a = 0; a < q.n_actions; ++a) step[tr.state * q.n_actions + a] += scale * grad[a];
    }
    for (std::size_t i = 0; i < step.size(); ++i) q.values[i] -= step[i];
}

/// Uniform action with probability epsilon(step), otherwise the greedy action.
inline std::size_t act_epsilon_greedy(const QTable& q, std::size_t state, std::size_t step, const LearnerConfig& cfg,
                                      Rng& rng) {
    if (rng.bernoulli(cfg.epsilon(step))) return rng.uniform_index(q.n_actions);
    return argmax(q.row(state));
}

}  // namespace fame
