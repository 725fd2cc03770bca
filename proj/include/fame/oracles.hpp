#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fame/buffers.hpp"
#include "fame/distance.hpp"
#include "fame/divergences.hpp"
#include "fame/meta_learner.hpp"
#include "fame/rng.hpp"
#include "fame/tables.hpp"

// Independent reference computations for the integration rules and
// divergences. None of them call the code they check: batch averages are
// formed in one pass over all tasks, maximum-likelihood problems are solved
// by iterative optimization, and W2 is integrated from quantile functions.

namespace fame::oracle {

/// Batch weighted average sum_i w_i Q_i / sum_i w_i per entry; `fallback` where the total weight is zero.
inline std::vector<double> batch_weighted_average(const std::vector<std::vector<double>>& values,
                                                  const std::vector<std::vector<double>>& weights,
                                                  const std::vector<double>& fallback) {
    std::vector<double> out = fallback;
    for (std::size_t e = 0; e < fallback.size(); ++e) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            num += weights[i][e] * values[i][e];
            den += weights[i][e];
        }
        if (den > 0.0) out[e] = num / den;
    }
    return out;
}

/**
Maximizes sum_k c_k log softmax(theta)_k by gradient ascent on the logits,
for one state. Counts need not be normalized. Returns the probabilities.
*/
inline std::vector<double> softmax_mle_by_gradient(const std::vector<double>& counts, std::size_t iterations = 200000) {
    const std::size_t n = counts.size();
    double total = 0.0;
    for (double c : counts) total += c;
    std::vector<double> theta(n, 0.0);
    std::vector<double> p(n, 1.0 / static_cast<double>(n));
    if (total == 0.0) return p;
    for (std::size_t it = 0; it < iterations; ++it) {
        const double top = *std::max_element(theta.begin(), theta.end());
        double z = 0.0;
        for (std::size_t k = 0; k < n; ++k) z += (p[k] = std::exp(theta[k] - top));
        for (double& x : p) x /= z;
        // The softmax cross-entropy Hessian has spectral norm at most 1/2,
        // so a unit step on the normalized problem is stable.
        for (std::size_t k = 0; k < n; ++k) theta[k] += counts[k] / total - p[k];
    }
    return p;
}

struct GaussianFit {
    double mean = 0.0;
    double stddev = 1.0;
};

/**
Weighted 1-D Gaussian maximum likelihood by Newton iterations on
(mean, log std) started from the first sample. Weights are arbitrary
positive numbers.
*/
inline GaussianFit gaussian_mle_numeric(const std::vector<double>& xs, const std::vector<double>& ws) {
    double w_total = 0.0;
    for (double w : ws) w_total += w;
    GaussianFit fit{xs.front(), 1.0};
    double log_sd = 0.0;
    for (int it = 0; it < 500; ++it) {
        // l(m, r) = sum w (-(x - m)^2 e^{-2r} / 2 - r)
        double s1 = 0.0;
        double s2 = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            s1 += ws[i] * (xs[i] - fit.mean);
            s2 += ws[i] * (xs[i] - fit.mean) * (xs[i] - fit.mean);
        }
        const double inv_var = std::exp(-2.0 * log_sd);
        const double g_m = s1 * inv_var;
        const double g_r = s2 * inv_var - w_total;
        const double h_mm = -w_total * inv_var;
        const double h_rr = -2.0 * s2 * inv_var;
        const double h_mr = -2.0 * s1 * inv_var;
        const double det = h_mm * h_rr - h_mr * h_mr;
        double d_m = 0.0;
        double d_r = 0.0;
        if (det > 0.0) {
            d_m = -(h_rr * g_m - h_mr * g_r) / det;
            d_r = -(-h_mr * g_m + h_mm * g_r) / det;
        } else {
            d_m = g_m / w_total * std::exp(2.0 * log_sd);
            d_r = 0.5 * g_r / w_total;
        }
        d_r = std::clamp(d_r, -1.0, 1.0);
        fit.mean += d_m;
        log_sd += d_r;
        if (std::abs(d_m) < 1e-15 && std::abs(d_r) < 1e-15) break;
    }
    fit.stddev = std::exp(log_sd);
    return fit;
}

/// W2^2 between 1-D Gaussians as the integral over u in (0,1) of the squared quantile gap.
inline double w2_squared_by_quadrature(double mean_p, double sd_p, double mean_q, double sd_q) {
    const boost::math::normal_distribution<double> unit(0.0, 1.0);
    auto integrand = [&](double u, double uc) {
        // uc = 1 - u on the upper half, which keeps precision near u = 1.
        const double z = u < 0.5 ? boost::math::quantile(unit, u) : -boost::math::quantile(unit, uc);
        const double gap = (mean_p + sd_p * z) - (mean_q + sd_q * z);
        return gap * gap;
    };
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(integrand, 0.0, 1.0);
}

/// sum_s sum_a w(s, a) (Q_prev - Q_cur)^2 by explicit enumeration.
inline double cf_q_brute_force(const QTable& prev, const QTable& cur, const std::vector<double>& mu,
                               const CategoricalPolicyTable& pi_prev) {
    double total = 0.0;
    for (std::size_t s = 0; s < prev.n_states; ++s)
        for (std::size_t a = 0; a < prev.n_actions; ++a) {
            const double gap = prev(s, a) - cur(s, a);
            total += mu[s] * pi_prev(s, a) * gap * gap;
        }
    return total;
}

/// sum_s mu(s) KL(cur(.|s) || prev(.|s)) with both rows floored at `floor` and renormalized.
inline double cf_pi_kl_brute_force(const CategoricalPolicyTable& prev, const CategoricalPolicyTable& cur,
                                   const std::vector<double>& mu, double floor) {
    double total = 0.0;
    for (std::size_t s = 0; s < prev.n_states; ++s) {
        if (mu[s] == 0.0) continue;
        double zp = 0.0;
        double zq = 0.0;
        for (std::size_t a = 0; a < prev.n_actions; ++a) {
            zp += std::max(cur(s, a), floor);
            zq += std::max(prev(s, a), floor);
        }
        double kl = 0.0;
        for (std::size_t a = 0; a < prev.n_actions; ++a) {
            const double p = std::max(cur(s, a), floor) / zp;
            const double q = std::max(prev(s, a), floor) / zq;
            if (p > 0.0) kl += p * std::log(p / q);
        }
        total += mu[s] * kl;
    }
    return total;
}

struct SuiteReport {
    std::string suite;
    std::size_t instances = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    double seconds = 0.0;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline std::vector<double> random_simplex(Rng& rng, std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (double& x : p) total += (x = rng.uniform(0.01, 1.0));
    for (double& x : p) x /= total;
    return p;
}

template <typename Body>
SuiteReport timed(const std::string& name, double tolerance, Body&& body) {
    const auto start = std::chrono::steady_clock::now();
    SuiteReport r;
    r.suite = name;
    r.tolerance = tolerance;
    body(r);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.detail.empty()) r.passed = r.max_error <= tolerance;
    return r;
}

}  // namespace detail

/// Incremental weighted-l2 meta Q versus the batch weighted average.
inline SuiteReport check_l2(std::uint64_t seed, std::size_t instances = 100) {
    return detail::timed("l2", 1e-9, [&](SuiteReport& r) {
        Rng rng(derive_seed(seed, 1));
        for (std::size_t n = 0; n < instances; ++n) {
            const std::size_t S = 1 + rng.uniform_index(12);
            const std::size_t A = 1 + rng.uniform_index(5);
            const std::size_t K = 1 + rng.uniform_index(6);
            QMetaState meta(S, A);
            std::vector<std::vector<double>> qs;
            std::vector<std::vector<double>> ws;
            for (std::size_t k = 0; k < K; ++k) {
                QTable q(S, A);
                for (double& v : q.values) v = rng.uniform(-10.0, 10.0);
                VisitationWeights w;
                w.n_actions = A;
                w.state_action.resize(S * A);
                for (double& x : w.state_action) x = rng.uniform(0.01, 1.0);
                integrate_q_l2(meta, q, w);
                qs.push_back(q.values);
                ws.push_back(w.state_action);
            }
            const auto batch = batch_weighted_average(qs, ws, std::vector<double>(S * A, 0.0));
            for (std::size_t e = 0; e < batch.size(); ++e)
                r.max_error = std::max(r.max_error, std::abs(batch[e] - meta.q.values[e]));
            ++r.instances;
        }
    });
}

/// Incremental Wasserstein meta Gaussian versus the batch weighted averages of mean and std.
inline SuiteReport check_wd(std::uint64_t seed, std::size_t instances = 100) {
    return detail::timed("wd", 1e-9, [&](SuiteReport& r) {
        Rng rng(derive_seed(seed, 2));
        for (std::size_t n = 0; n < instances; ++n) {
            const std::size_t cells = 1 + rng.uniform_index(12);
            const std::size_t dim = 1 + rng.uniform_index(2);
            const std::size_t K = 1 + rng.uniform_index(6);
            GaussianMetaState meta(cells, dim);
            std::vector<std::vector<double>> means{meta.policy.mean};
            std::vector<std::vector<double>> stds{meta.policy.std};
            std::vector<std::vector<double>> ws;
            for (std::size_t k = 0; k < K; ++k) {
                GaussianPolicyTable pi(cells, dim);
                for (double& v : pi.mean) v = rng.uniform(-3.0, 3.0);
                for (double& v : pi.std) v = rng.uniform(0.05, 2.0);
                VisitationWeights mu;
                mu.state.resize(cells);
                for (double& x : mu.state) x = rng.uniform(0.01, 1.0);
                integrate_policy_wd(meta, pi, mu);
                means.push_back(pi.mean);
                stds.push_back(pi.std);
                std::vector<double> per_entry;
                for (std::size_t c = 0; c < cells; ++c)
                    for (std::size_t d = 0; d < dim; ++d) per_entry.push_back(mu.state[c]);
                ws.push_back(per_entry);
            }
            // The initial table carries no weight.
            means.erase(means.begin());
            stds.erase(stds.begin());
            const auto mean_batch = batch_weighted_average(means, ws, std::vector<double>(cells * dim, 0.0));
            const auto std_batch = batch_weighted_average(stds, ws, std::vector<double>(cells * dim, 1.0));
            for (std::size_t e = 0; e < mean_batch.size(); ++e) {
                r.max_error = std::max(r.max_error, std::abs(mean_batch[e] - meta.policy.mean[e]));
                r.max_error = std::max(r.max_error, std::abs(std_batch[e] - meta.policy.std[e]));
            }
            ++r.instances;
        }
    });
}

/// Unsmoothed softmax-KL closed form versus gradient-based maximum likelihood; error is the worst per-state TV.
inline SuiteReport check_softmax_kl(std::uint64_t seed, std::size_t instances = 50) {
    return detail::timed("kl", 1e-3, [&](SuiteReport& r) {
        Rng rng(derive_seed(seed, 3));
        for (std::size_t n = 0; n < instances; ++n) {
            const std::size_t S = 1 + rng.uniform_index(12);
            const std::size_t A = 2 + rng.uniform_index(4);
            const std::size_t K = 1 + rng.uniform_index(4);
            const std::size_t cap = 5 + rng.uniform_index(60);
            MetaBuffer<StateActionRecord> buffer(cap);
            std::vector<double> counts(S * A, 0.0);
            for (std::size_t k = 0; k < K; ++k) {
                const std::size_t records = 1 + rng.uniform_index(cap);
                // Skewed per-task action preferences so some actions never appear.
                const auto prefs = detail::random_simplex(rng, A);
                std::vector<std::pair<std::size_t, std::size_t>> drawn;
                for (std::size_t i = 0; i < records; ++i) {
                    const std::size_t s = rng.uniform_index(S);
                    const std::size_t a = rng.uniform() < 0.7 ? argmax(prefs) : rng.categorical(prefs);
                    buffer.add(k, {s, a});
                    drawn.emplace_back(s, a);
                }
                for (const auto& [s, a] : drawn) counts[s * A + a] += 1.0 / static_cast<double>(records);
            }
            CategoricalMetaState meta(S, A);
            integrate_softmax_kl(meta, buffer, 0.0);
            for (std::size_t s = 0; s < S; ++s) {
                const std::vector<double> row(counts.begin() + static_cast<std::ptrdiff_t>(s * A),
                                              counts.begin() + static_cast<std::ptrdiff_t>((s + 1) * A));
                const auto p = softmax_mle_by_gradient(row);
                double tv = 0.0;
                for (std::size_t a = 0; a < A; ++a) tv += 0.5 * std::abs(p[a] - meta.policy(s, a));
                r.max_error = std::max(r.max_error, tv);
            }
            ++r.instances;
        }
    });
}

/// Gaussian KL integration versus a numeric weighted maximum-likelihood fit per cell.
inline SuiteReport check_gaussian_kl(std::uint64_t seed, std::size_t instances = 50) {
    return detail::timed("gaussian-kl", 1e-8, [&](SuiteReport& r) {
        Rng rng(derive_seed(seed, 4));
        for (std::size_t n = 0; n < instances; ++n) {
            const std::size_t cells = 1 + rng.uniform_index(6);
            const std::size_t K = 1 + rng.uniform_index(4);
            MetaBuffer<ContinuousActionRecord> buffer(200);
            std::vector<std::vector<double>> xs(cells);
            std::vector<std::vector<double>> ws(cells);
            for (std::size_t k = 0; k < K; ++k) {
                const std::size_t records = 2 + rng.uniform_index(150);
                const double shift = rng.uniform(-2.0, 2.0);
                for (std::size_t i = 0; i < records; ++i) {
                    const std::size_t c = rng.uniform_index(cells);
                    const double a = rng.normal(shift, rng.uniform(0.1, 1.0));
                    buffer.add(k, {c, {a}});
                    xs[c].push_back(a);
                    ws[c].push_back(1.0 / static_cast<double>(records));
                }
            }
            GaussianMetaState meta(cells, 1);
            integrate_policy_kl(meta, buffer);
            for (std::size_t c = 0; c < cells; ++c) {
                if (xs[c].size() < 2) continue;
                const GaussianFit fit = gaussian_mle_numeric(xs[c], ws[c]);
                r.max_error = std::max(r.max_error, std::abs(fit.mean - meta.policy.mean[c]));
                r.max_error = std::max(r.max_error, std::abs(std::max(fit.stddev, kSigmaMin) - meta.policy.std[c]));
            }
            ++r.instances;
        }
    });
}

/// Closed-form W2^2 versus quantile quadrature for 1-D Gaussians with std in [0.1, 5].
inline SuiteReport check_w2_closed_form(std::uint64_t seed, std::size_t instances = 100) {
    return detail::timed("w2-closed-form", 1e-4, [&](SuiteReport& r) {
        Rng rng(derive_seed(seed, 5));
        for (std::size_t n = 0; n < instances; ++n) {
            const double mp = rng.uniform(-5.0, 5.0);
            const double mq = rng.uniform(-5.0, 5.0);
            const double sp = rng.uniform(0.1, 5.0);
            const double sq = rng.uniform(0.1, 5.0);
            const double closed = w2_squared_diag_gaussian(mp, sp, mq, sq);
            r.max_error = std::max(r.max_error, std::abs(closed - w2_squared_by_quadrature(mp, sp, mq, sq)));
            ++r.instances;
        }
    });
}

/// CF(x, x) = 0, CF >= 0, and weighted sums equal to brute-force enumeration.
inline SuiteReport check_cf(std::uint64_t seed, std::size_t instances = 1000) {
    return detail::timed("cf", 1e-10, [&](SuiteReport& r) {
        Rng rng(derive_seed(seed, 6));
        for (std::size_t n = 0; n < instances; ++n) {
            const std::size_t S = 1 + rng.uniform_index(12);
            const std::size_t A = 1 + rng.uniform_index(5);
            QTable q1(S, A);
            QTable q2(S, A);
            for (double& v : q1.values) v = rng.uniform(-5.0, 5.0);
            for (double& v : q2.values) v = rng.uniform(-5.0, 5.0);
            CategoricalPolicyTable p1(S, A);
            CategoricalPolicyTable p2(S, A);
            for (std::size_t s = 0; s < S; ++s) {
                const auto a = detail::random_simplex(rng, A);
                const auto b = detail::random_simplex(rng, A);
                std::copy(a.begin(), a.end(), p1.row(s).begin());
                std::copy(b.begin(), b.end(), p2.row(s).begin());
            }
            VisitationWeights w;
            w.state = detail::random_simplex(rng, S);
            w.n_actions = A;
            for (std::size_t s = 0; s < S; ++s)
                for (std::size_t a = 0; a < A; ++a) w.state_action.push_back(w.state[s] * p1(s, a));

            const double self_q = cf_q(q1, q1, w);
            const double self_pi = cf_pi(p1, p1, w);
            const double cq = cf_q(q1, q2, w);
            const double cp = cf_pi(p1, p2, w);
            if (self_q != 0.0 || self_pi != 0.0) r.detail = "CF(x, x) != 0 at instance " + std::to_string(n);
            if (cq < 0.0 || cp < 0.0) r.detail = "negative CF at instance " + std::to_string(n);
            r.max_error = std::max(r.max_error, std::abs(cq - cf_q_brute_force(q1, q2, w.state, p1)));
            r.max_error = std::max(r.max_error, std::abs(cp - cf_pi_kl_brute_force(p1, p2, w.state, kKlFloor)));
            ++r.instances;
        }
    });
}

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"l2", "wd", "kl", "gaussian-kl", "w2-closed-form", "cf"};
    return names;
}

inline SuiteReport run_suite(const std::string& name, std::uint64_t seed) {
    if (name == "l2") return check_l2(seed);
    if (name == "wd") return check_wd(seed);
    if (name == "kl") return check_softmax_kl(seed);
    if (name == "gaussian-kl") return check_gaussian_kl(seed);
    if (name == "w2-closed-form") return check_w2_closed_form(seed);
    if (name == "cf") return check_cf(seed);
    throw std::invalid_argument("unknown oracle suite '" + name + "'");
}

}  // namespace fame::oracle
