#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace fame {

/// Probability floor applied to categorical KL terms by default.
inline constexpr double kKlFloor = 1e-8;

/**
KL(p || q) between categorical distributions.

With floor > 0 both arguments are floored at `floor` and renormalized, so
one-hot policies give a finite value. With floor == 0 a positive p(a) over a
zero q(a) yields +infinity.
*/
inline double kl_categorical(std::span<const double> p, std::span<const double> q, double floor = kKlFloor) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_categorical: size mismatch");
    if (floor < 0.0) throw std::invalid_argument("kl_categorical: negative floor");
    double p_total = 0.0;
    double q_total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p_total += std::max(p[i], floor);
        q_total += std::max(q[i], floor);
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::max(p[i], floor) / p_total;
        const double qi = std::max(q[i], floor) / q_total;
        if (pi == 0.0) continue;
        if (qi == 0.0) return std::numeric_limits<double>::infinity();
        kl += pi * std::log(pi / qi);
    }
    return std::max(kl, 0.0);
}

/**
Squared 2-Wasserstein distance between two categorical distributions whose
outcomes are the points 0, 1, ..., n-1 on the real line. Integrates the
squared difference of the two quantile functions exactly over the merged
CDF breakpoints.
*/
inline double w2_squared_categorical(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("w2_squared_categorical: size mismatch");
    // Monotone coupling: move mass from the lowest remaining outcome of p to
    // the lowest remaining outcome of q.
    std::size_t i = 0;
    std::size_t j = 0;
    double left_p = p.empty() ? 0.0 : p[0];
    double left_q = q.empty() ? 0.0 : q[0];
    double total = 0.0;
    while (i < p.size() && j < q.size()) {
        if (left_p <= 0.0) {
            if (++i < p.size()) left_p = p[i];
            continue;
        }
        if (left_q <= 0.0) {
            if (++j < q.size()) left_q = q[j];
            continue;
        }
        const double moved = std::min(left_p, left_q);
        const double diff = static_cast<double>(i) - static_cast<double>(j);
        total += moved * diff * diff;
        left_p -= moved;
        left_q -= moved;
    }
    return total;
}

/// Closed-form W2^2 between diagonal Gaussians: ||mean_p - mean_q||^2 + ||std_p - std_q||^2.
inline double w2_squared_diag_gaussian(std::span<const double> mean_p, std::span<const double> std_p,
                                       std::span<const double> mean_q, std::span<const double> std_q) {
    if (mean_p.size() != std_p.size() || mean_q.size() != std_q.size() || mean_p.size() != mean_q.size())
        throw std::invalid_argument("w2_squared_diag_gaussian: dimension mismatch");
    double total = 0.0;
    for (std::size_t d = 0; d < mean_p.size(); ++d) {
        if (!(std_p[d] > 0.0) || !(std_q[d] > 0.0))
            throw std::invalid_argument("w2_squared_diag_gaussian: standard deviations must be positive");
        total += (mean_p[d] - mean_q[d]) * (mean_p[d] - mean_q[d]) + (std_p[d] - std_q[d]) * (std_p[d] - std_q[d]);
    }
    return total;
}

inline double w2_squared_diag_gaussian(double mean_p, double std_p, double mean_q, double std_q) {
    return w2_squared_diag_gaussian(std::span<const double>(&mean_p, 1), std::span<const double>(&std_p, 1),
                                    std::span<const double>(&mean_q, 1), std::span<const double>(&std_q, 1));
}

/// KL between diagonal Gaussians, KL(N(mean_p, std_p^2) || N(mean_q, std_q^2)).
inline double kl_diag_gaussian(std::span<const double> mean_p, std::span<const double> std_p,
                               std::span<const double> mean_q, std::span<const double> std_q) {
    if (mean_p.size() != mean_q.size() || std_p.size() != std_q.size() || mean_p.size() != std_p.size())
        throw std::invalid_argument("kl_diag_gaussian: dimension mismatch");
    double total = 0.0;
    for (std::size_t d = 0; d < mean_p.size(); ++d) {
        if (!(std_p[d] > 0.0) || !(std_q[d] > 0.0))
            throw std::invalid_argument("kl_diag_gaussian: standard deviations must be positive");
        const double ratio = std_p[d] / std_q[d];
        const double shift = (mean_p[d] - mean_q[d]) / std_q[d];
        total += 0.5 * (ratio * ratio + shift * shift - 1.0) - std::log(ratio);
    }
    return std::max(total, 0.0);
}

}  // namespace fame
