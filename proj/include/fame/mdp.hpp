#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fame/rng.hpp"
#include "fame/tables.hpp"

namespace fame {

/**
Finite discounted MDP.

Transitions are stored as a dense tensor indexed [state][action][next].
Rewards are expected immediate rewards R(s, a). Terminal states are
zero-reward self-loops so every operator stays total.
*/
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> transition;
    std::vector<double> reward;
    double gamma = 0.9;
    std::vector<double> start_dist;
    std::vector<bool> terminal;

    TabularMdp() = default;
    TabularMdp(std::size_t states, std::size_t actions, double discount)
        : n_states(states), n_actions(actions), transition(states * actions * states, 0.0),
          reward(states * actions, 0.0), gamma(discount), start_dist(states, 0.0),
          terminal(states, false) {}

    double& p(std::size_t s, std::size_t a, std::size_t next) {
        return transition[(s * n_actions + a) * n_states + next];
    }
    double p(std::size_t s, std::size_t a, std::size_t next) const {
        return transition[(s * n_actions + a) * n_states + next];
    }
    std::span<const double> row(std::size_t s, std::size_t a) const {
        return {transition.data() + (s * n_actions + a) * n_states, n_states};
    }

    double& r(std::size_t s, std::size_t a) { return reward[s * n_actions + a]; }
    double r(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }

    /// Turns s into a zero-reward absorbing state.
    void make_terminal(std::size_t s) {
        terminal[s] = true;
        for (std::size_t a = 0; a < n_actions; ++a) {
            for (std::size_t next = 0; next < n_states; ++next) p(s, a, next) = 0.0;
            p(s, a, s) = 1.0;
            r(s, a) = 0.0;
        }
    }

    /// Throws std::invalid_argument if any structural invariant is broken.
    void validate() const {
        if (n_states == 0 || n_actions == 0) throw std::invalid_argument("TabularMdp: empty state or action set");
        if (transition.size() != n_states * n_actions * n_states || reward.size() != n_states * n_actions ||
            start_dist.size() != n_states || terminal.size() != n_states)
            throw std::invalid_argument("TabularMdp: inconsistent sizes");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMdp: gamma must lie in (0,1)");
        for (std::size_t s = 0; s < n_states; ++s) {
            for (std::size_t a = 0; a < n_actions; ++a) {
                double total = 0.0;
                for (double x : row(s, a)) {
                    if (!(x >= 0.0)) throw std::invalid_argument("TabularMdp: negative transition probability");
                    total += x;
                }
                if (std::abs(total - 1.0) > 1e-12)
                    throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
                if (!std::isfinite(r(s, a))) throw std::invalid_argument("TabularMdp: non-finite reward");
                if (terminal[s] && (p(s, a, s) != 1.0 || r(s, a) != 0.0))
                    throw std::invalid_argument("TabularMdp: terminal state must be a zero-reward self-loop");
            }
        }
        double start_total = 0.0;
        for (double x : start_dist) {
            if (!(x >= 0.0)) throw std::invalid_argument("TabularMdp: negative start probability");
            start_total += x;
        }
        if (std::abs(start_total - 1.0) > 1e-12) throw std::invalid_argument("TabularMdp: start_dist does not sum to 1");
    }

    bool operator==(const TabularMdp&) const = default;
};

struct StepResult {
    std::size_t next_state = 0;
    double reward = 0.0;
    bool done = false;
};

/// Samples one transition. Calling it on a terminal state is a contract violation.
inline StepResult step(const TabularMdp& mdp, std::size_t state, std::size_t action, Rng& rng) {
    if (state >= mdp.n_states || action >= mdp.n_actions) throw std::out_of_range("step: state or action out of range");
    if (mdp.terminal[state]) throw std::logic_error("step: called on a terminal state");
    const std::size_t next = rng.categorical(mdp.row(state, action));
    return {next, mdp.r(state, action), static_cast<bool>(mdp.terminal[next])};
}

inline std::size_t sample_start(const TabularMdp& mdp, Rng& rng) { return rng.categorical(mdp.start_dist); }

namespace detail {

inline double bellman_backup(const TabularMdp& mdp, const std::vector<double>& v, std::size_t s, std::size_t a) {
    double expected = 0.0;
    const auto probs = mdp.row(s, a);
    for (std::size_t next = 0; next < mdp.n_states; ++next)
        if (probs[next] != 0.0) expected += probs[next] * v[next];
    return mdp.r(s, a) + mdp.gamma * expected;
}

}  // namespace detail

struct ValueIterationResult {
    QTable q;
    std::size_t sweeps = 0;
    /// Sup-norm Bellman residual of each sweep.
    std::vector<double> residuals;
};

/**
Value iteration until the sup-norm Bellman residual of the returned Q is at
most `tol`. Terminal rows stay at zero.
*/
inline ValueIterationResult value_iteration_trace(const TabularMdp& mdp, double tol, std::size_t max_sweeps = 1000000) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    ValueIterationResult result{QTable(mdp.n_states, mdp.n_actions), 0, {}};
    QTable& q = result.q;
    std::vector<double> v(mdp.n_states, 0.0);
    while (result.sweeps < max_sweeps) {
        QTable next(mdp.n_states, mdp.n_actions);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            if (mdp.terminal[s]) continue;
            for (std::size_t a = 0; a < mdp.n_actions; ++a) next(s, a) = detail::bellman_backup(mdp, v, s, a);
        }
        double residual = 0.0;
        for (std::size_t i = 0; i < q.values.size(); ++i)
            residual = std::max(residual, std::abs(next.values[i] - q.values[i]));
        q = std::move(next);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            const auto row = q.row(s);
            v[s] = *std::max_element(row.begin(), row.end());
        }
        ++result.sweeps;
        result.residuals.push_back(residual);
        // ||TQ - Q|| <= gamma * ||Q - Q_prev|| bounds the residual of the returned table.
        if (mdp.gamma * residual <= tol) break;
    }
    return result;
}

inline QTable value_iteration(const TabularMdp& mdp, double tol) { return value_iteration_trace(mdp, tol).q; }

/// Sup-norm Bellman optimality residual ||T Q - Q||.
inline double bellman_residual(const TabularMdp& mdp, const QTable& q) {
    std::vector<double> v(mdp.n_states);
    for (std::size_t s = 0; s < mdp.n_states; ++s) v[s] = q(s, argmax(q.row(s)));
    double residual = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (mdp.terminal[s]) continue;
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            residual = std::max(residual, std::abs(detail::bellman_backup(mdp, v, s, a) - q(s, a)));
    }
    return residual;
}

/// Transition matrix and reward vector under a stochastic policy. Terminal rows are zeroed.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> policy_markov_chain(const TabularMdp& mdp,
                                                                       const CategoricalPolicyTable& pi) {
    if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions)
        throw std::invalid_argument("policy_markov_chain: policy shape mismatch");
    Eigen::MatrixXd chain = Eigen::MatrixXd::Zero(mdp.n_states, mdp.n_states);
    Eigen::VectorXd rewards = Eigen::VectorXd::Zero(mdp.n_states);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (mdp.terminal[s]) continue;
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            const double pa = pi(s, a);
            if (pa == 0.0) continue;
            rewards(s) += pa * mdp.r(s, a);
            for (std::size_t next = 0; next < mdp.n_states; ++next) chain(s, next) += pa * mdp.p(s, a, next);
        }
    }
    return {chain, rewards};
}

/// Exact state values V^pi from the linear Bellman system (I - gamma P_pi) V = R_pi.
inline std::vector<double> policy_evaluation(const TabularMdp& mdp, const CategoricalPolicyTable& pi) {
    const auto [chain, rewards] = policy_markov_chain(mdp, pi);
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * chain;
    const Eigen::VectorXd values = system.partialPivLu().solve(rewards);
    return {values.data(), values.data() + values.size()};
}

enum class VisitationMode { exact, empirical };

struct EmpiricalVisitationOptions {
    std::size_t total_steps = 100000;
};

/**
Normalized discounted state occupancy of a policy started from start_dist.

Exact mode solves mu^T (I - gamma P_pi) = (1 - gamma) d0^T with terminal
states absorbing (no further visits), then normalizes to sum one.
Empirical mode runs episodes that continue each step with probability gamma
and counts visited states. The state-action weights w(s,a) = mu(s) pi(a|s)
are filled in both modes.
*/
inline VisitationWeights discounted_visitation(const TabularMdp& mdp, const CategoricalPolicyTable& pi,
                                               VisitationMode mode, Rng* rng = nullptr,
                                               EmpiricalVisitationOptions options = {}) {
    VisitationWeights weights;
    weights.state.assign(mdp.n_states, 0.0);
    if (mode == VisitationMode::exact) {
        const auto [chain, rewards] = policy_markov_chain(mdp, pi);
        (void)rewards;
        Eigen::VectorXd start(mdp.n_states);
        for (std::size_t s = 0; s < mdp.n_states; ++s) start(s) = mdp.start_dist[s];
        const Eigen::MatrixXd system =
            (Eigen::MatrixXd::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * chain).transpose();
        const Eigen::VectorXd occupancy = system.partialPivLu().solve((1.0 - mdp.gamma) * start);
        double total = 0.0;
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            weights.state[s] = std::max(0.0, occupancy(s));
            total += weights.state[s];
        }
        for (double& x : weights.state) x /= total;
    } else {
        if (rng == nullptr) throw std::invalid_argument("discounted_visitation: empirical mode needs an rng");
        std::vector<double> counts(mdp.n_states, 0.0);
        std::size_t steps = 0;
        while (steps < options.total_steps) {
            std::size_t s = sample_start(mdp, *rng);
            while (steps < options.total_steps) {
                counts[s] += 1.0;
                ++steps;
                if (mdp.terminal[s] || !rng->bernoulli(mdp.gamma)) break;
                const std::size_t a = rng->categorical(pi.row(s));
                s = step(mdp, s, a, *rng).next_state;
            }
        }
        for (std::size_t s = 0; s < mdp.n_states; ++s) weights.state[s] = counts[s] / static_cast<double>(steps);
    }
    weights.n_actions = mdp.n_actions;
    weights.state_action.assign(mdp.n_states * mdp.n_actions, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) weights.state_action[s * mdp.n_actions + a] = weights.state[s] * pi(s, a);
    return weights;
}

/**
Flat numeric layout of an MDP, used by golden files:

    n_states n_actions gamma
    transition[s][a][next]   (row-major, n_states*n_actions*n_states values)
    reward[s][a]             (n_states*n_actions values)
    start_dist[s]            (n_states values)
    terminal[s]              (n_states values, 0 or 1)
*/
inline std::vector<double> to_flat(const TabularMdp& mdp) {
    std::vector<double> flat;
    flat.reserve(3 + mdp.transition.size() + mdp.reward.size() + 2 * mdp.n_states);
    flat.push_back(static_cast<double>(mdp.n_states));
    flat.push_back(static_cast<double>(mdp.n_actions));
    flat.push_back(mdp.gamma);
    flat.insert(flat.end(), mdp.transition.begin(), mdp.transition.end());
    flat.insert(flat.end(), mdp.reward.begin(), mdp.reward.end());
    flat.insert(flat.end(), mdp.start_dist.begin(), mdp.start_dist.end());
    for (bool t : mdp.terminal) flat.push_back(t ? 1.0 : 0.0);
    return flat;
}

inline TabularMdp from_flat(std::span<const double> flat) {
    if (flat.size() < 3) throw std::invalid_argument("from_flat: truncated header");
    const auto states = static_cast<std::size_t>(flat[0]);
    const auto actions = static_cast<std::size_t>(flat[1]);
    TabularMdp mdp(states, actions, flat[2]);
    const std::size_t expected = 3 + states * actions * states + states * actions + 2 * states;
    if (flat.size() != expected) throw std::invalid_argument("from_flat: size does not match header");
    auto it = flat.begin() + 3;
    std::copy_n(it, mdp.transition.size(), mdp.transition.begin());
    it += static_cast<std::ptrdiff_t>(mdp.transition.size());
    std::copy_n(it, mdp.reward.size(), mdp.reward.begin());
    it += static_cast<std::ptrdiff_t>(mdp.reward.size());
    std::copy_n(it, states, mdp.start_dist.begin());
    it += static_cast<std::ptrdiff_t>(states);
    for (std::size_t s = 0; s < states; ++s) mdp.terminal[s] = it[static_cast<std::ptrdiff_t>(s)] != 0.0;
    mdp.validate();
    return mdp;
}

/// Whitespace-separated text of a flat vector with round-trip precision.
inline std::string flat_to_text(std::span<const double> flat) {
    std::ostringstream out;
    out.precision(17);
    for (std::size_t i = 0; i < flat.size(); ++i) out << (i ? " " : "") << flat[i];
    return out.str();
}

inline std::vector<double> flat_from_text(const std::string& text) {
    std::istringstream in(text);
    std::vector<double> flat;
    double x = 0.0;
    while (in >> x) flat.push_back(x);
    return flat;
}

}  // namespace fame
