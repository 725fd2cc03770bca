#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "fame/divergences.hpp"
#include "fame/tables.hpp"

namespace fame {

enum class QMetric { squared_l2, sup_norm };
enum class PiMetric { kl, squared_w2 };

/// Choice of d_Q and d_pi.
struct DivergenceSpec {
    QMetric q_metric = QMetric::squared_l2;
    PiMetric pi_metric = PiMetric::kl;
    /// Categorical KL floor; 0 disables flooring.
    double kl_floor = kKlFloor;
};

/**
Distance between two MDPs through their optimal action values.

squared-l2 aggregates (Q1 - Q2)^2 with `weights` over (s, a), uniform when
none are given. sup-norm returns max |Q1 - Q2|.
*/
inline double mdp_distance(const QTable& q_star_1, const QTable& q_star_2, QMetric metric,
                           std::optional<std::span<const double>> weights = std::nullopt) {
    if (!q_star_1.same_shape(q_star_2)) throw std::invalid_argument("mdp_distance: shape mismatch");
    const std::size_t n = q_star_1.values.size();
    if (weights && weights->size() != n) throw std::invalid_argument("mdp_distance: weight shape mismatch");
    if (weights) detail::require_distribution(*weights, "mdp_distance");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = q_star_1.values[i] - q_star_2.values[i];
        if (metric == QMetric::sup_norm) {
            total = std::max(total, std::abs(diff));
        } else {
            const double w = weights ? (*weights)[i] : 1.0 / static_cast<double>(n);
            total += w * diff * diff;
        }
    }
    return total;
}

inline double mdp_distance(const QTable& q_star_1, const QTable& q_star_2, const DivergenceSpec& d = {}) {
    return mdp_distance(q_star_1, q_star_2, d.q_metric);
}

/**
Policy-based MDP distance between the softmax policies of two optimal Q
tables (shared temperature taken from the first), averaged uniformly over
states. KL is symmetrized as (KL(p||q) + KL(q||p)) / 2; squared-w2 treats
actions as the points 0..|A|-1.
*/
inline double mdp_policy_distance(const QTable& q_star_1, const QTable& q_star_2, const DivergenceSpec& d) {
    if (!q_star_1.same_shape(q_star_2)) throw std::invalid_argument("mdp_policy_distance: shape mismatch");
    double total = 0.0;
    for (std::size_t s = 0; s < q_star_1.n_states; ++s) {
        const auto p = softmax(q_star_1.row(s), q_star_1.temperature);
        const auto q = softmax(q_star_2.row(s), q_star_1.temperature);
        if (d.pi_metric == PiMetric::kl)
            total += 0.5 * (kl_categorical(p, q, d.kl_floor) + kl_categorical(q, p, d.kl_floor));
        else
            total += w2_squared_categorical(p, q);
    }
    return total / static_cast<double>(q_star_1.n_states);
}

/**
Catastrophic forgetting between consecutive Q learners,
    sum_{s,a} w_prev(s,a) d_Q(Q_prev(s,a), Q_cur(s,a)),
where w_prev(s,a) = mu_prev(s) pi^{Q_prev}(a|s) must come from the previous
learner in the previous task. For sup-norm the weighted sum is replaced by the
maximum absolute gap over the support of w_prev.
*/
inline double cf_q(const QTable& q_prev, const QTable& q_cur, const VisitationWeights& weights_prev,
                   const DivergenceSpec& d = {}) {
    if (!q_prev.same_shape(q_cur)) throw std::invalid_argument("cf_q: shape mismatch");
    if (!weights_prev.has_state_action() || weights_prev.state_action.size() != q_prev.values.size())
        throw std::invalid_argument("cf_q: weights must be state-action weights of matching shape");
    detail::require_distribution(weights_prev.state_action, "cf_q");
    double total = 0.0;
    for (std::size_t i = 0; i < q_prev.values.size(); ++i) {
        const double w = weights_prev.state_action[i];
        if (w == 0.0) continue;
        const double diff = q_prev.values[i] - q_cur.values[i];
        if (d.q_metric == QMetric::sup_norm)
            total = std::max(total, std::abs(diff));
        else
            total += w * diff * diff;
    }
    return total;
}

/**
Catastrophic forgetting between consecutive categorical policies,
    sum_s mu_prev(s) d_pi(pi_cur(.|s), pi_prev(.|s)).
With kl_floor == 0 a support mismatch returns +infinity.
*/
inline double cf_pi(const CategoricalPolicyTable& pi_prev, const CategoricalPolicyTable& pi_cur,
                    const VisitationWeights& mu_prev, const DivergenceSpec& d = {}) {
    if (pi_prev.n_states != pi_cur.n_states || pi_prev.n_actions != pi_cur.n_actions)
        throw std::invalid_argument("cf_pi: shape mismatch");
    if (mu_prev.state.size() != pi_prev.n_states) throw std::invalid_argument("cf_pi: weight shape mismatch");
    detail::require_distribution(mu_prev.state, "cf_pi");
    double total = 0.0;
    for (std::size_t s = 0; s < pi_prev.n_states; ++s) {
        const double mu = mu_prev.state[s];
        if (mu == 0.0) continue;
        const double term = d.pi_metric == PiMetric::kl ? kl_categorical(pi_cur.row(s), pi_prev.row(s), d.kl_floor)
                                                        : w2_squared_categorical(pi_cur.row(s), pi_prev.row(s));
        if (std::isinf(term)) return std::numeric_limits<double>::infinity();
        total += mu * term;
    }
    return total;
}

/// cf_pi for Gaussian policy tables; mu_prev is indexed by state-grid cell.
inline double cf_pi(const GaussianPolicyTable& pi_prev, const GaussianPolicyTable& pi_cur,
                    const VisitationWeights& mu_prev,
                    const DivergenceSpec& d = {QMetric::squared_l2, PiMetric::squared_w2}) {
    if (!pi_prev.same_shape(pi_cur)) throw std::invalid_argument("cf_pi: shape mismatch");
    if (mu_prev.state.size() != pi_prev.n_cells) throw std::invalid_argument("cf_pi: weight shape mismatch");
    detail::require_distribution(mu_prev.state, "cf_pi");
    double total = 0.0;
    for (std::size_t c = 0; c < pi_prev.n_cells; ++c) {
        const double mu = mu_prev.state[c];
        if (mu == 0.0) continue;
        const double term = d.pi_metric == PiMetric::kl
                                ? kl_diag_gaussian(pi_cur.mean_of(c), pi_cur.std_of(c), pi_prev.mean_of(c), pi_prev.std_of(c))
                                : w2_squared_diag_gaussian(pi_cur.mean_of(c), pi_cur.std_of(c), pi_prev.mean_of(c),
                                                           pi_prev.std_of(c));
        total += mu * term;
    }
    return total;
}

}  // namespace fame
