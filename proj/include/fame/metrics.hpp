#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fame {

/**
Evaluation curves p_i(t) of K tasks on a shared time grid over [0, K T].
`values[i][j]` is task i evaluated at `times[j]`.
*/
struct LearningCurve {
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    double steps_per_task = 1.0;

    std::size_t n_tasks() const { return values.size(); }

    void validate() const {
        if (times.empty()) throw std::invalid_argument("LearningCurve: empty grid");
        for (std::size_t j = 1; j < times.size(); ++j)
            if (!(times[j] > times[j - 1])) throw std::invalid_argument("LearningCurve: grid not strictly increasing");
        for (const auto& series : values) {
            if (series.size() != times.size()) throw std::invalid_argument("LearningCurve: series length mismatch");
            for (double p : series)
                if (!std::isfinite(p)) throw std::invalid_argument("LearningCurve: non-finite value");
        }
        if (!(steps_per_task > 0.0)) throw std::invalid_argument("LearningCurve: steps_per_task must be positive");
    }

    /// Index of the grid point equal to t, if any.
    std::optional<std::size_t> find(double t) const {
        const auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it != times.end() && *it == t) return static_cast<std::size_t>(it - times.begin());
        return std::nullopt;
    }

    std::size_t require(double t) const {
        const auto j = find(t);
        if (!j) throw std::invalid_argument("LearningCurve: time " + std::to_string(t) + " is not on the grid");
        return *j;
    }
};

struct Bounds {
    double low = 0.0;
    double high = 1.0;
};

/// Per-task min-max bounds over a set of curves sharing the task layout.
inline std::vector<Bounds> min_max_bounds(const std::vector<const LearningCurve*>& curves) {
    if (curves.empty()) throw std::invalid_argument("min_max_bounds: no curves");
    std::vector<Bounds> bounds(curves.front()->n_tasks(), Bounds{INFINITY, -INFINITY});
    for (const LearningCurve* c : curves) {
        if (c->n_tasks() != bounds.size()) throw std::invalid_argument("min_max_bounds: task count mismatch");
        for (std::size_t i = 0; i < bounds.size(); ++i)
            for (double p : c->values[i]) {
                bounds[i].low = std::min(bounds[i].low, p);
                bounds[i].high = std::max(bounds[i].high, p);
            }
    }
    return bounds;
}

/// (p - low) / (high - low) per task; a degenerate range maps to 0.
inline LearningCurve normalize(const LearningCurve& curve, const std::vector<Bounds>& bounds) {
    if (bounds.size() != curve.n_tasks()) throw std::invalid_argument("normalize: bounds size mismatch");
    LearningCurve out = curve;
    for (std::size_t i = 0; i < out.n_tasks(); ++i) {
        const double range = bounds[i].high - bounds[i].low;
        for (double& p : out.values[i]) p = range > 0.0 ? (p - bounds[i].low) / range : 0.0;
    }
    return out;
}

struct AveragePerformance {
    double value = 0.0;
    /// True when t was off the grid and the nearest earlier sample was used.
    bool off_grid = false;
};

/// P_K(t) = (1/K) sum_i p_i(t).
inline AveragePerformance average_performance(const LearningCurve& curve, double t) {
    curve.validate();
    AveragePerformance out;
    std::size_t j = 0;
    if (const auto exact = curve.find(t)) {
        j = *exact;
    } else {
        const auto it = std::upper_bound(curve.times.begin(), curve.times.end(), t);
        if (it == curve.times.begin()) throw std::invalid_argument("average_performance: t precedes the grid");
        j = static_cast<std::size_t>(it - curve.times.begin()) - 1;
        out.off_grid = true;
    }
    double total = 0.0;
    for (const auto& series : curve.values) total += series[j];
    out.value = total / static_cast<double>(curve.n_tasks());
    return out;
}

/// (1/T) * trapezoid integral of p_i over the task's own window [(i-1)T, iT].
inline double task_auc(const LearningCurve& curve, std::size_t task) {
    const double begin = static_cast<double>(task) * curve.steps_per_task;
    const double end = begin + curve.steps_per_task;
    const std::size_t first = curve.require(begin);
    const std::size_t last = curve.require(end);
    double area = 0.0;
    for (std::size_t j = first; j < last; ++j)
        area += 0.5 * (curve.values[task][j] + curve.values[task][j + 1]) * (curve.times[j + 1] - curve.times[j]);
    return area / curve.steps_per_task;
}

struct ForwardTransfer {
    /// Mean over tasks with a defined FTr_i.
    double mean = 0.0;
    /// FTr_i, missing where the baseline AUC equals 1.
    std::vector<std::optional<double>> per_task;
};

/// FTr_i = (AUC_i - AUC_i^b) / (1 - AUC_i^b) on normalized curves.
inline ForwardTransfer forward_transfer(const LearningCurve& curve, const LearningCurve& baseline) {
    curve.validate();
    baseline.validate();
    if (curve.n_tasks() != baseline.n_tasks() || curve.steps_per_task != baseline.steps_per_task)
        throw std::invalid_argument("forward_transfer: curve layouts differ");
    ForwardTransfer ft;
    double total = 0.0;
    std::size_t defined = 0;
    for (std::size_t i = 0; i < curve.n_tasks(); ++i) {
        const double auc = task_auc(curve, i);
        const double auc_b = task_auc(baseline, i);
        if (auc_b == 1.0) {
            ft.per_task.emplace_back(std::nullopt);
            continue;
        }
        const double value = (auc - auc_b) / (1.0 - auc_b);
        ft.per_task.emplace_back(value);
        total += value;
        ++defined;
    }
    ft.mean = defined ? total / static_cast<double>(defined) : 0.0;
    return ft;
}

struct Forgetting {
    double mean = 0.0;
    std::vector<double> per_task;
};

/// F_i = p_i(i T) - p_i(K T).
inline Forgetting forgetting(const LearningCurve& curve) {
    curve.validate();
    Forgetting f;
    const std::size_t k = curve.n_tasks();
    const std::size_t final_index = curve.require(static_cast<double>(k) * curve.steps_per_task);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t end_index = curve.require(static_cast<double>(i + 1) * curve.steps_per_task);
        f.per_task.push_back(curve.values[i][end_index] - curve.values[i][final_index]);
    }
    double total = 0.0;
    for (double x : f.per_task) total += x;
    f.mean = total / static_cast<double>(k);
    return f;
}

/**
Cross-method forgetting report: each task's F_i divided by the standard
deviation of that task's F_i across methods (unchanged when it is zero).
*/
inline std::map<std::string, Forgetting> normalize_forgetting_by_std(const std::map<std::string, Forgetting>& by_method) {
    if (by_method.empty()) return {};
    const std::size_t k = by_method.begin()->second.per_task.size();
    std::vector<double> sd(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        double mean = 0.0;
        for (const auto& [name, f] : by_method) mean += f.per_task.at(i);
        mean /= static_cast<double>(by_method.size());
        double var = 0.0;
        for (const auto& [name, f] : by_method) var += (f.per_task[i] - mean) * (f.per_task[i] - mean);
        sd[i] = by_method.size() > 1 ? std::sqrt(var / static_cast<double>(by_method.size() - 1)) : 0.0;
    }
    std::map<std::string, Forgetting> out;
    for (const auto& [name, f] : by_method) {
        Forgetting g;
        for (std::size_t i = 0; i < k; ++i) g.per_task.push_back(sd[i] > 0.0 ? f.per_task[i] / sd[i] : f.per_task[i]);
        double total = 0.0;
        for (double x : g.per_task) total += x;
        g.mean = total / static_cast<double>(k);
        out.emplace(name, std::move(g));
    }
    return out;
}

struct MetricReport {
    double avg_perf = 0.0;
    ForwardTransfer ft;
    Forgetting forgetting;
    bool normalized = false;
};

}  // namespace fame
