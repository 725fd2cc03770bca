#pragma once

#include <cmath>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <vector>

#include "fame/buffers.hpp"
#include "fame/divergences.hpp"
#include "fame/tables.hpp"

namespace fame {

/// Uniform mass mixed into every softmax-KL meta row.
inline constexpr double kMetaSmoothing = 1e-3;

/// Meta learner holding a Q table, integrated with the weighted-l2 rule.
struct QMetaState {
    QTable q;
    /// Accumulated weight sum_{i<=k} w_i(s, a).
    std::vector<double> cumulative_weight;
    std::size_t tasks_integrated = 0;

    QMetaState() = default;
    QMetaState(std::size_t states, std::size_t actions, double tau = 1.0)
        : q(states, actions, 0.0, tau), cumulative_weight(states * actions, 0.0) {}

    bool operator==(const QMetaState&) const = default;
};

/// Meta learner holding a categorical policy, integrated by softmax-KL MLE.
struct CategoricalMetaState {
    CategoricalPolicyTable policy;
    /// Accumulated weight sum_{i<=k} w_i(s, a).
    std::vector<double> cumulative_weight;
    std::size_t tasks_integrated = 0;

    CategoricalMetaState() = default;
    CategoricalMetaState(std::size_t states, std::size_t actions)
        : policy(states, actions), cumulative_weight(states * actions, 0.0) {}

    /// Internal Q^M: tau * log pi^M, defined up to a per-state constant.
    QTable q(double tau = 1.0) const {
        QTable out(policy.n_states, policy.n_actions, 0.0, tau);
        for (std::size_t i = 0; i < policy.probs.size(); ++i) out.values[i] = tau * std::log(policy.probs[i]);
        return out;
    }

    bool operator==(const CategoricalMetaState&) const = default;
};

/// Meta learner holding a Gaussian policy table.
struct GaussianMetaState {
    GaussianPolicyTable policy;
    /// Accumulated per-cell weight sum_{i<=k} mu_i(s).
    std::vector<double> cumulative_weight;
    std::size_t tasks_integrated = 0;

    GaussianMetaState() = default;
    GaussianMetaState(std::size_t cells, std::size_t action_dim)
        : policy(cells, action_dim, 0.0, 1.0), cumulative_weight(cells, 0.0) {}

    bool operator==(const GaussianMetaState&) const = default;
};

/**
Incremental weighted-l2 integration. Per (s, a):

    Q^M_k = (W_prev Q^M_{k-1} + w_k Q_k) / (W_prev + w_k)

with W_prev the accumulated weight of earlier tasks. Entries with zero total
weight keep their previous value. This equals the weighted average of all
Q_i, the minimizer of sum_i E_{w_i}[(Q_i - Q)^2].
*/
inline void integrate_q_l2(QMetaState& meta, const QTable& fast_q, const VisitationWeights& weights_k) {
    if (!meta.q.same_shape(fast_q)) throw std::invalid_argument("integrate_q_l2: shape mismatch");
    if (weights_k.state_action.size() != fast_q.values.size())
        throw std::invalid_argument("integrate_q_l2: weights must be state-action weights of matching shape");
    for (double w : weights_k.state_action)
        if (!(w >= 0.0)) throw std::invalid_argument("integrate_q_l2: negative weight");
    for (std::size_t i = 0; i < fast_q.values.size(); ++i) {
        const double w = weights_k.state_action[i];
        if (w == 0.0) continue;
        const double total = meta.cumulative_weight[i] + w;
        meta.q.values[i] = (meta.cumulative_weight[i] * meta.q.values[i] + w * fast_q.values[i]) / total;
        meta.cumulative_weight[i] = total;
    }
    ++meta.tasks_integrated;
}

/// Incremental objective minimized by integrate_q_l2, evaluated at `candidate`:
/// sum W_prev (Q^M_{k-1} - candidate)^2 + w_k (Q_k - candidate)^2.
inline double q_l2_objective(const QMetaState& previous, const QTable& fast_q, const VisitationWeights& weights_k,
                             const QTable& candidate) {
    double total = 0.0;
    for (std::size_t i = 0; i < candidate.values.size(); ++i) {
        const double d_prev = previous.q.values[i] - candidate.values[i];
        const double d_fast = fast_q.values[i] - candidate.values[i];
        total += previous.cumulative_weight[i] * d_prev * d_prev + weights_k.state_action[i] * d_fast * d_fast;
    }
    return total;
}

/// Sum over buffered tasks of each task's empirical (s, a) weights.
inline std::vector<double> pooled_state_action_weights(const MetaBuffer<StateActionRecord>& buffer, std::size_t n_states,
                                                       std::size_t n_actions) {
    std::vector<double> pooled(n_states * n_actions, 0.0);
    for (std::size_t id : buffer.task_ids()) {
        const auto w = estimate_weights(buffer, id, n_states, n_actions);
        for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] += w.state_action[i];
    }
    return pooled;
}

/**
Softmax-KL integration: the maximizer of sum_i E_{w_i}[log pi(a|s)] over
softmax policies is, per state, the normalized pooled weight
sum_i w_i(s, .). Rows are mixed with `smoothing` uniform mass; states absent
from the buffer become uniform. An empty buffer leaves the meta unchanged.
*/
inline void integrate_softmax_kl(CategoricalMetaState& meta, const MetaBuffer<StateActionRecord>& buffer,
                                 double smoothing = kMetaSmoothing) {
    if (!(smoothing >= 0.0 && smoothing <= 1.0)) throw std::invalid_argument("integrate_softmax_kl: smoothing outside [0,1]");
    if (buffer.empty()) {
        std::cerr << "warning: integrate_softmax_kl called with an empty meta buffer; meta learner unchanged\n";
        return;
    }
    const std::size_t n_states = meta.policy.n_states;
    const std::size_t n_actions = meta.policy.n_actions;
    meta.cumulative_weight = pooled_state_action_weights(buffer, n_states, n_actions);
    const double uniform = 1.0 / static_cast<double>(n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        double row_total = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) row_total += meta.cumulative_weight[s * n_actions + a];
        for (std::size_t a = 0; a < n_actions; ++a) {
            if (row_total == 0.0) {
                meta.policy(s, a) = uniform;
            } else {
                const double freq = meta.cumulative_weight[s * n_actions + a] / row_total;
                meta.policy(s, a) = (1.0 - smoothing) * freq + smoothing * uniform;
            }
        }
    }
    meta.tasks_integrated = buffer.task_ids().size();
}

/// Negative log-likelihood -sum_i E_{w_i}[log pi] of a categorical policy on the buffer.
inline double softmax_kl_objective(const CategoricalPolicyTable& pi, const MetaBuffer<StateActionRecord>& buffer) {
    const auto pooled = pooled_state_action_weights(buffer, pi.n_states, pi.n_actions);
    double total = 0.0;
    for (std::size_t i = 0; i < pooled.size(); ++i)
        if (pooled[i] > 0.0) total -= pooled[i] * std::log(pi.probs[i]);
    return total;
}

/**
Gaussian KL integration (policy distillation): per cell, the weighted
Gaussian MLE of the buffered actions, each task's records weighted by
1 / (records of that task). Mean is the weighted mean, std the weighted
root-mean-square deviation clamped to sigma_min. Cells holding fewer than
two records keep their previous values.
*/
inline void integrate_policy_kl(GaussianMetaState& meta, const MetaBuffer<ContinuousActionRecord>& buffer) {
    GaussianPolicyTable& pi = meta.policy;
    const std::size_t dim = pi.action_dim;
    std::vector<double> weight(pi.n_cells, 0.0);
    std::vector<std::size_t> count(pi.n_cells, 0);
    std::vector<double> sum(pi.n_cells * dim, 0.0);
    for (std::size_t id : buffer.task_ids()) {
        const auto& records = buffer.records(id);
        const double unit = 1.0 / static_cast<double>(records.size());
        for (const auto& r : records) {
            if (r.state >= pi.n_cells || r.action.size() != dim)
                throw std::invalid_argument("integrate_policy_kl: record does not match the policy table");
            weight[r.state] += unit;
            ++count[r.state];
            for (std::size_t d = 0; d < dim; ++d) sum[r.state * dim + d] += unit * r.action[d];
        }
    }
    std::vector<double> mean(pi.n_cells * dim, 0.0);
    std::vector<double> sq(pi.n_cells * dim, 0.0);
    for (std::size_t c = 0; c < pi.n_cells; ++c)
        if (weight[c] > 0.0)
            for (std::size_t d = 0; d < dim; ++d) mean[c * dim + d] = sum[c * dim + d] / weight[c];
    for (std::size_t id : buffer.task_ids()) {
        const auto& records = buffer.records(id);
        const double unit = 1.0 / static_cast<double>(records.size());
        for (const auto& r : records)
            for (std::size_t d = 0; d < dim; ++d) {
                const double diff = r.action[d] - mean[r.state * dim + d];
                sq[r.state * dim + d] += unit * diff * diff;
            }
    }
    for (std::size_t c = 0; c < pi.n_cells; ++c) {
        meta.cumulative_weight[c] = weight[c];
        if (count[c] < 2) continue;
        for (std::size_t d = 0; d < dim; ++d) {
            pi.mean[c * dim + d] = mean[c * dim + d];
            pi.std[c * dim + d] = std::max(kSigmaMin, std::sqrt(sq[c * dim + d] / weight[c]));
        }
    }
    meta.tasks_integrated = buffer.task_ids().size();
}

/**
Wasserstein integration for diagonal Gaussians. Per cell, with W_prev the
accumulated visitation of earlier tasks:

    mean^M_k = (W_prev mean^M_{k-1} + mu_k mean_k) / (W_prev + mu_k)
    std^M_k  = (W_prev std^M_{k-1}  + mu_k std_k)  / (W_prev + mu_k)

Cells with zero total weight are left unchanged.
*/
inline void integrate_policy_wd(GaussianMetaState& meta, const GaussianPolicyTable& fast, const VisitationWeights& mu_k) {
    GaussianPolicyTable& pi = meta.policy;
    if (!pi.same_shape(fast)) throw std::invalid_argument("integrate_policy_wd: shape mismatch");
    if (mu_k.state.size() != pi.n_cells) throw std::invalid_argument("integrate_policy_wd: weight shape mismatch");
    for (double w : mu_k.state)
        if (!(w >= 0.0)) throw std::invalid_argument("integrate_policy_wd: negative weight");
    const std::size_t dim = pi.action_dim;
    for (std::size_t c = 0; c < pi.n_cells; ++c) {
        const double w = mu_k.state[c];
        if (w == 0.0) continue;
        const double previous = meta.cumulative_weight[c];
        const double total = previous + w;
        for (std::size_t d = 0; d < dim; ++d) {
            const std::size_t i = c * dim + d;
            pi.mean[i] = (previous * pi.mean[i] + w * fast.mean[i]) / total;
            pi.std[i] = (previous * pi.std[i] + w * fast.std[i]) / total;
        }
        meta.cumulative_weight[c] = total;
    }
    ++meta.tasks_integrated;
}

/// Incremental Wasserstein objective minimized by integrate_policy_wd, evaluated at `candidate`.
inline double policy_wd_objective(const GaussianMetaState& previous, const GaussianPolicyTable& fast,
                                  const VisitationWeights& mu_k, const GaussianPolicyTable& candidate) {
    double total = 0.0;
    for (std::size_t c = 0; c < candidate.n_cells; ++c) {
        total += previous.cumulative_weight[c] *
                 w2_squared_diag_gaussian(candidate.mean_of(c), candidate.std_of(c), previous.policy.mean_of(c),
                                          previous.policy.std_of(c));
        total += mu_k.state[c] *
                 w2_squared_diag_gaussian(candidate.mean_of(c), candidate.std_of(c), fast.mean_of(c), fast.std_of(c));
    }
    return total;
}

/// Negative pooled Gaussian log-likelihood of the buffered actions (up to a constant).
inline double policy_kl_objective(const GaussianPolicyTable& pi, const MetaBuffer<ContinuousActionRecord>& buffer) {
    double total = 0.0;
    for (std::size_t id : buffer.task_ids()) {
        const auto& records = buffer.records(id);
        const double unit = 1.0 / static_cast<double>(records.size());
        for (const auto& r : records)
            for (std::size_t d = 0; d < pi.action_dim; ++d) {
                const double sd = pi.std_of(r.state)[d];
                const double z = (r.action[d] - pi.mean_of(r.state)[d]) / sd;
                total += unit * (0.5 * z * z + std::log(sd));
            }
    }
    return total;
}

}  // namespace fame
