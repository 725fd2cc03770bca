#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fame {

/// Minimum standard deviation of every Gaussian policy entry.
inline constexpr double kSigmaMin = 1e-3;

/// Tolerance used when checking that weights or probability rows sum to one.
inline constexpr double kSimplexTolerance = 1e-10;

/// Per-state action choice.
using DeterministicPolicy = std::vector<std::size_t>;

/// Action values Q(s, a), stored row-major by state.
struct QTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> values;
    /// Softmax temperature used when reading the table as a policy.
    double temperature = 1.0;

    QTable() = default;
    QTable(std::size_t states, std::size_t actions, double fill = 0.0, double tau = 1.0)
        : n_states(states), n_actions(actions), values(states * actions, fill), temperature(tau) {
        if (!(tau > 0.0)) throw std::invalid_argument("QTable: temperature must be positive");
    }

    double& operator()(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
    double operator()(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }

    std::span<double> row(std::size_t s) { return {values.data() + s * n_actions, n_actions}; }
    std::span<const double> row(std::size_t s) const { return {values.data() + s * n_actions, n_actions}; }

    bool same_shape(const QTable& other) const {
        return n_states == other.n_states && n_actions == other.n_actions;
    }

    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool operator==(const QTable&) const = default;
};

/// Categorical policy pi(a|s), row-major by state.
struct CategoricalPolicyTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> probs;

    CategoricalPolicyTable() = default;
    /// Uniform policy.
    CategoricalPolicyTable(std::size_t states, std::size_t actions)
        : n_states(states), n_actions(actions),
          probs(states * actions, actions ? 1.0 / static_cast<double>(actions) : 0.0) {}

    double& operator()(std::size_t s, std::size_t a) { return probs[s * n_actions + a]; }
    double operator()(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }

    std::span<double> row(std::size_t s) { return {probs.data() + s * n_actions, n_actions}; }
    std::span<const double> row(std::size_t s) const { return {probs.data() + s * n_actions, n_actions}; }

    /// Throws unless every row is a probability vector.
    void validate() const {
        if (probs.size() != n_states * n_actions)
            throw std::invalid_argument("CategoricalPolicyTable: size mismatch");
        for (std::size_t s = 0; s < n_states; ++s) {
            double total = 0.0;
            for (double p : row(s)) {
                if (!(p >= 0.0)) throw std::invalid_argument("CategoricalPolicyTable: negative probability");
                total += p;
            }
            if (std::abs(total - 1.0) > kSimplexTolerance)
                throw std::invalid_argument("CategoricalPolicyTable: row " + std::to_string(s) +
                                            " does not sum to 1");
        }
    }

    bool operator==(const CategoricalPolicyTable&) const = default;
};

/// Independent Gaussian policy per state-grid cell: N(mean(s), diag(std(s)^2)).
struct GaussianPolicyTable {
    std::size_t n_cells = 0;
    std::size_t action_dim = 0;
    std::vector<double> mean;
    std::vector<double> std;

    GaussianPolicyTable() = default;
    GaussianPolicyTable(std::size_t cells, std::size_t dim, double mean0 = 0.0, double std0 = 1.0)
        : n_cells(cells), action_dim(dim), mean(cells * dim, mean0), std(cells * dim, std0) {
        if (!(std0 > kSigmaMin)) throw std::invalid_argument("GaussianPolicyTable: std below sigma_min");
    }

    std::span<double> mean_of(std::size_t cell) { return {mean.data() + cell * action_dim, action_dim}; }
    std::span<const double> mean_of(std::size_t cell) const {
        return {mean.data() + cell * action_dim, action_dim};
    }
    std::span<double> std_of(std::size_t cell) { return {std.data() + cell * action_dim, action_dim}; }
    std::span<const double> std_of(std::size_t cell) const {
        return {std.data() + cell * action_dim, action_dim};
    }

    bool same_shape(const GaussianPolicyTable& other) const {
        return n_cells == other.n_cells && action_dim == other.action_dim;
    }

    bool operator==(const GaussianPolicyTable&) const = default;
};

/**
Visitation distribution of one task.

`state` holds mu(s). When composed with a policy, `state_action` holds
w(s, a) = mu(s) pi(a|s) row-major with `n_actions` columns; otherwise it is
empty and n_actions is 0.
*/
struct VisitationWeights {
    std::vector<double> state;
    std::vector<double> state_action;
    std::size_t n_actions = 0;
    std::size_t task_id = 0;

    std::size_t n_states() const { return state.size(); }
    bool has_state_action() const { return !state_action.empty(); }

    double operator()(std::size_t s, std::size_t a) const { return state_action[s * n_actions + a]; }
};

namespace detail {

inline void require_distribution(std::span<const double> w, const char* what) {
    double total = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x))
            throw std::invalid_argument(std::string(what) + ": negative or non-finite weight");
        total += x;
    }
    if (std::abs(total - 1.0) > kSimplexTolerance)
        throw std::invalid_argument(std::string(what) + ": weights do not sum to 1");
}

}  // namespace detail

/// Softmax of one row of action values at temperature tau.
inline std::vector<double> softmax(std::span<const double> values, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("softmax: temperature must be positive");
    std::vector<double> out(values.size());
    if (values.empty()) return out;
    double top = -std::numeric_limits<double>::infinity();
    for (double v : values) top = std::max(top, v);
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp((values[i] - top) / tau);
        total += out[i];
    }
    for (double& p : out) p /= total;
    return out;
}

/// Softmax policy pi^Q(a|s) = exp(Q(s,a)/tau) / sum_a' exp(Q(s,a')/tau).
inline CategoricalPolicyTable softmax_policy(const QTable& q) {
    CategoricalPolicyTable pi(q.n_states, q.n_actions);
    for (std::size_t s = 0; s < q.n_states; ++s) {
        const auto row = softmax(q.row(s), q.temperature);
        std::copy(row.begin(), row.end(), pi.row(s).begin());
    }
    return pi;
}

/// Lowest-index maximizer of a row.
inline std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

/// Greedy policy; ties go to the lowest action index.
inline DeterministicPolicy greedy_policy(const QTable& q) {
    DeterministicPolicy policy(q.n_states);
    for (std::size_t s = 0; s < q.n_states; ++s) policy[s] = argmax(q.row(s));
    return policy;
}

inline DeterministicPolicy greedy_policy(const CategoricalPolicyTable& pi) {
    DeterministicPolicy policy(pi.n_states);
    for (std::size_t s = 0; s < pi.n_states; ++s) policy[s] = argmax(pi.row(s));
    return policy;
}

/// One-hot table of a deterministic policy.
inline CategoricalPolicyTable one_hot(const DeterministicPolicy& policy, std::size_t n_actions) {
    CategoricalPolicyTable pi(policy.size(), n_actions);
    for (std::size_t s = 0; s < policy.size(); ++s) {
        for (auto& p : pi.row(s)) p = 0.0;
        pi(s, policy[s]) = 1.0;
    }
    return pi;
}

}  // namespace fame
