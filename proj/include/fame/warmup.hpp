#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "fame/gaussian_learner.hpp"
#include "fame/meta_learner.hpp"
#include "fame/rng.hpp"
#include "fame/tables.hpp"

namespace fame {

enum class Candidate : std::size_t { meta = 0, fast = 1, random = 2 };
inline constexpr std::array<Candidate, 3> kCandidates{Candidate::meta, Candidate::fast, Candidate::random};

inline const char* to_string(Candidate c) {
    switch (c) {
        case Candidate::meta: return "Meta";
        case Candidate::fast: return "Fast";
        case Candidate::random: return "Random";
    }
    return "?";
}

enum class WarmupMode { strict_test, empirical_ranking };

inline const char* to_string(WarmupMode m) { return m == WarmupMode::strict_test ? "strict" : "empirical"; }

/// Episode returns of one warm-up candidate.
struct EvalSummary {
    Candidate candidate = Candidate::random;
    std::vector<double> returns;

    std::size_t n() const { return returns.size(); }

    double mean() const {
        if (returns.empty()) throw std::logic_error("EvalSummary: no returns");
        double total = 0.0;
        for (double r : returns) total += r;
        return total / static_cast<double>(returns.size());
    }

    /// Unbiased sample variance; zero for a single return.
    double variance() const {
        if (returns.size() < 2) return 0.0;
        const double m = mean();
        double total = 0.0;
        for (double r : returns) total += (r - m) * (r - m);
        return total / static_cast<double>(returns.size() - 1);
    }
};

/// Per-candidate summaries; absent entries are unavailable candidates.
using CandidateSummaries = std::array<std::optional<EvalSummary>, 3>;

struct WarmupDecision {
    Candidate chosen = Candidate::random;
    WarmupMode mode = WarmupMode::empirical_ranking;
    /// One-sided Welch p-values of Meta > Fast and Meta > Random (strict mode).
    std::optional<std::array<double, 2>> p_values;
    bool bc_enabled = false;
};

/**
One-sided Welch test of H1: mean(a) > mean(b). Returns the p-value
P(T >= t) under Student's t with Welch-Satterthwaite degrees of freedom.
When both samples have zero variance the p-value is 0 if mean(a) > mean(b)
and 1 otherwise.
*/
inline double welch_one_sided_p(const EvalSummary& a, const EvalSummary& b) {
    if (a.n() < 2 || b.n() < 2) throw std::invalid_argument("welch_one_sided_p: need at least two returns per sample");
    const double va = a.variance() / static_cast<double>(a.n());
    const double vb = b.variance() / static_cast<double>(b.n());
    const double diff = a.mean() - b.mean();
    const double se2 = va + vb;
    if (se2 == 0.0) return diff > 0.0 ? 0.0 : 1.0;
    const double t = diff / std::sqrt(se2);
    const double df = se2 * se2 /
                      (va * va / static_cast<double>(a.n() - 1) + vb * vb / static_cast<double>(b.n() - 1));
    const boost::math::students_t_distribution<double> dist(df);
    return boost::math::cdf(boost::math::complement(dist, t));
}

namespace detail {

/// Fast versus Random: a significant Welch difference decides, then the larger mean, then Fast.
inline Candidate fast_or_random(const CandidateSummaries& s, WarmupMode mode, double alpha) {
    const auto& fast = s[static_cast<std::size_t>(Candidate::fast)];
    const auto& random = s[static_cast<std::size_t>(Candidate::random)];
    if (!fast && !random) throw std::invalid_argument("one_vs_all_test: no candidate available");
    if (!fast) return Candidate::random;
    if (!random) return Candidate::fast;
    if (mode == WarmupMode::strict_test) {
        if (welch_one_sided_p(*fast, *random) < alpha) return Candidate::fast;
        if (welch_one_sided_p(*random, *fast) < alpha) return Candidate::random;
    }
    return random->mean() > fast->mean() ? Candidate::random : Candidate::fast;
}

}  // namespace detail

/**
Adaptive warm-up decision among Meta, Fast and Random.

Strict mode rejects H0: V^M <= max(V^f, V^r) only when the one-sided Welch
tests of Meta against every other available candidate all give p < alpha.
Empirical mode picks Meta only when its sample mean strictly exceeds the
others. Otherwise Fast and Random are compared as in detail::fast_or_random.
bc_enabled is set when Meta is chosen; value-based callers use it and
policy-based callers ignore it.
*/
inline WarmupDecision one_vs_all_test(const CandidateSummaries& summaries, double alpha, WarmupMode mode) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("one_vs_all_test: alpha must lie in (0,1)");
    WarmupDecision decision;
    decision.mode = mode;
    const auto& meta = summaries[static_cast<std::size_t>(Candidate::meta)];
    bool meta_wins = false;
    if (meta) {
        if (mode == WarmupMode::strict_test) {
            std::array<double, 2> p{1.0, 1.0};
            meta_wins = true;
            bool compared = false;
            for (Candidate other : {Candidate::fast, Candidate::random}) {
                const auto& s = summaries[static_cast<std::size_t>(other)];
                if (!s) continue;
                compared = true;
                const double pv = welch_one_sided_p(*meta, *s);
                p[other == Candidate::fast ? 0 : 1] = pv;
                if (!(pv < alpha)) meta_wins = false;
            }
            meta_wins = meta_wins && compared;
            decision.p_values = p;
        } else {
            meta_wins = true;
            bool compared = false;
            for (Candidate other : {Candidate::fast, Candidate::random}) {
                const auto& s = summaries[static_cast<std::size_t>(other)];
                if (!s) continue;
                compared = true;
                if (!(meta->mean() > s->mean())) meta_wins = false;
            }
            meta_wins = meta_wins && compared;
        }
    }
    decision.chosen = meta_wins ? Candidate::meta : detail::fast_or_random(summaries, mode, alpha);
    decision.bc_enabled = decision.chosen == Candidate::meta;
    return decision;
}

struct EpisodeOutcome {
    double episode_return = 0.0;
    std::size_t steps = 0;
};

struct CandidateEvaluation {
    CandidateSummaries summaries;
    /// Environment steps consumed, charged against the task budget.
    std::size_t steps = 0;
};

/**
Runs `n_episodes` evaluation episodes for every available candidate.
`run_episode(candidate)` plays one episode on the new task and returns its
undiscounted return and length.
*/
template <typename EpisodeRunner>
CandidateEvaluation evaluate_candidates(EpisodeRunner&& run_episode, const std::array<bool, 3>& available,
                                        std::size_t n_episodes) {
    if (n_episodes < 2) throw std::invalid_argument("evaluate_candidates: need at least two episodes per candidate");
    CandidateEvaluation out;
    for (Candidate c : kCandidates) {
        if (!available[static_cast<std::size_t>(c)]) continue;
        EvalSummary summary;
        summary.candidate = c;
        for (std::size_t e = 0; e < n_episodes; ++e) {
            const EpisodeOutcome outcome = run_episode(c);
            summary.returns.push_back(outcome.episode_return);
            out.steps += outcome.steps;
        }
        out.summaries[static_cast<std::size_t>(c)] = std::move(summary);
    }
    return out;
}

/// Candidates present at task k (0-based): only Random for the first task.
inline std::array<bool, 3> available_candidates(std::size_t task_index) {
    return {task_index > 0, task_index > 0, true};
}

struct ValueWarmStart {
    QTable q;
    bool bc_enabled = false;
};

/**
Value-based warm start. Meta: fresh Q with behavior cloning toward the meta
policy. Fast: copy of the previous fast Q. Random: fresh Q.
*/
inline ValueWarmStart apply_warmup(const WarmupDecision& decision, const QTable& previous_fast, std::size_t n_states,
                                   std::size_t n_actions, double tau) {
    switch (decision.chosen) {
        case Candidate::fast: return {previous_fast, false};
        case Candidate::meta: return {QTable(n_states, n_actions, 0.0, tau), true};
        case Candidate::random: break;
    }
    return {QTable(n_states, n_actions, 0.0, tau), false};
}

/**
Policy-based warm start by direct parameter copy. Meta copies the meta
policy (with a fresh baseline), Fast copies the previous learner, Random
gives a fresh (0, 1) table.
*/
inline GaussianLearner apply_warmup(const WarmupDecision& decision, const GaussianLearner& previous_fast,
                                    const GaussianMetaState& meta) {
    switch (decision.chosen) {
        case Candidate::fast: return previous_fast;
        case Candidate::meta: {
            GaussianLearner learner(meta.policy.n_cells, meta.policy.action_dim);
            learner.policy = meta.policy;
            return learner;
        }
        case Candidate::random: break;
    }
    return GaussianLearner(previous_fast.policy.n_cells, previous_fast.policy.action_dim);
}

}  // namespace fame
