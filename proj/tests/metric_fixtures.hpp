#pragma once

#include <optional>
#include <vector>

#include "fame/metrics.hpp"

namespace fame::test {

/// Curve and baseline on a shared grid, with hand-computed metric values.
struct MetricFixture {
    LearningCurve curve;
    LearningCurve baseline;
    std::vector<std::optional<double>> ft_per_task;
    double ft_mean;
    std::vector<double> forgetting_per_task;
    double forgetting_mean;
    double final_avg_perf;
};

inline std::vector<MetricFixture> metric_fixtures() {
    std::vector<MetricFixture> out;

    // Two tasks, T = 10, uniform grid.
    // AUC0 = (1.25 + 3.75) / 10 = 0.5 vs 0.25; AUC1 = (2 + 3.5) / 10 = 0.55 vs 0.4.
    out.push_back({{{0, 5, 10, 15, 20}, {{0, 0.5, 1, 1, 0.6}, {0, 0, 0.2, 0.6, 0.8}}, 10},
                   {{0, 5, 10, 15, 20}, {{0, 0.25, 0.5, 0.5, 0.5}, {0, 0, 0, 0.4, 0.8}}, 10},
                   {1.0 / 3.0, 0.25},
                   (1.0 / 3.0 + 0.25) / 2.0,
                   {0.4, 0.0},
                   0.2,
                   0.7});

    // Three tasks, T = 4, uneven grid.
    // AUC0 = 2.0 / 4 vs 0.6 / 4; AUC1 = 1.6 / 4 vs 1.0 / 4; AUC2 = 2.7 / 4 vs 1.6 / 4.
    out.push_back({{{0, 1, 4, 6, 8, 9, 12},
                    {{0, 0.4, 0.8, 0.8, 0.7, 0.7, 0.5}, {0.1, 0.1, 0.1, 0.3, 0.9, 0.9, 0.9}, {0, 0, 0, 0, 0, 0.6, 1.0}},
                    4},
                   {{0, 1, 4, 6, 8, 9, 12},
                    {{0, 0, 0.4, 0.4, 0.4, 0.4, 0.4}, {0, 0, 0, 0.2, 0.6, 0.6, 0.6}, {0, 0, 0, 0, 0, 0.2, 0.8}},
                    4},
                   {7.0 / 17.0, 0.2, 11.0 / 24.0},
                   (7.0 / 17.0 + 0.2 + 11.0 / 24.0) / 3.0,
                   {0.3, 0.0, 0.0},
                   0.1,
                   0.8});

    // Baseline saturated on task 0 (FT undefined there); task 0 improves later (negative forgetting).
    // AUC1 = 1.05 / 2 vs 1.0 / 2.
    out.push_back({{{0, 1, 2, 3, 4}, {{0, 0.5, 0.5, 0.7, 0.9}, {0, 0, 0.3, 0.6, 0.6}}, 2},
                   {{0, 1, 2, 3, 4}, {{1, 1, 1, 1, 1}, {0, 0, 0, 0.5, 1.0}}, 2},
                   {std::nullopt, 0.05},
                   0.05,
                   {-0.4, 0.0},
                   -0.2,
                   0.75});
    return out;
}

}  // namespace fame::test
