#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fame/continuous_task.hpp"
#include "fame/fast_learner.hpp"
#include "fame/gridworld.hpp"
#include "fame/warmup.hpp"

namespace fame {

enum class Method { fame_q, fame_kl, fame_wd, reset, finetune };
enum class ValueIntegration { softmax_kl, l2 };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::fame_q: return "FAME-Q";
        case Method::fame_kl: return "FAME-KL";
        case Method::fame_wd: return "FAME-WD";
        case Method::reset: return "Reset";
        case Method::finetune: return "Finetune";
    }
    return "?";
}

inline Method parse_method(const std::string& name) {
    for (Method m : {Method::fame_q, Method::fame_kl, Method::fame_wd, Method::reset, Method::finetune})
        if (name == to_string(m)) return m;
    throw std::invalid_argument("unknown method '" + name + "'");
}

inline bool is_fame(Method m) { return m == Method::fame_q || m == Method::fame_kl || m == Method::fame_wd; }

enum class TaskFamily { gridworld, pointmass };

/// One task of a sequence: generator, generator seed, and its parameters.
struct TaskEntry {
    TaskFamily family = TaskFamily::gridworld;
    std::uint64_t seed = 0;
    GridworldSpec grid;
    PointmassSpec pointmass;

    bool operator==(const TaskEntry& other) const {
        return family == other.family && seed == other.seed;
    }
};

/// Ordered tasks; every task runs for the same number of steps T.
struct TaskSequence {
    std::vector<TaskEntry> tasks;
    std::size_t steps_per_task = 0;

    std::size_t size() const { return tasks.size(); }
};

struct RunConfig {
    std::string run_id;
    Method method = Method::fame_q;
    ValueIntegration value_integration = ValueIntegration::softmax_kl;
    TaskSequence sequence;
    LearnerConfig learner;
    /// Records kept per task in the meta buffer (N).
    std::size_t meta_records = 0;
    /// Evaluation episodes per warm-up candidate.
    std::size_t warmup_episodes = 10;
    double tau = 1.0;
    double alpha_test = 0.05;
    WarmupMode warmup_mode = WarmupMode::empirical_ranking;
    /// Skips candidate evaluation and uses this decision (k > 1).
    std::optional<Candidate> forced_warmup;
    /// Disables knowledge integration when false.
    bool integrate = true;
    std::uint64_t seed = 0;
    std::string output_dir;
    std::size_t curve_points = 50;
    std::size_t curve_episodes = 10;
    /// Transitions per behavior-cloning step (the current one plus replayed ones).
    std::size_t bc_batch = 8;
    std::size_t fast_buffer_capacity = 10000;
    std::size_t episodes_per_update = 1;
    /// Write a checkpoint after every task.
    bool checkpoint = false;
    /// Stop after this many tasks (used to exercise resumption).
    std::optional<std::size_t> stop_after_tasks;

    TaskFamily family() const {
        if (sequence.tasks.empty()) throw std::invalid_argument("RunConfig: empty task sequence");
        return sequence.tasks.front().family;
    }

    std::string id() const {
        return run_id.empty() ? std::string(to_string(method)) + "-s" + std::to_string(seed) : run_id;
    }

    /// Upper bound on environment steps spent evaluating warm-up candidates in one task.
    std::size_t max_candidate_eval_steps() const {
        std::size_t horizon = 0;
        for (const auto& t : sequence.tasks)
            horizon = std::max(horizon, t.family == TaskFamily::gridworld ? t.grid.max_episode_steps : t.pointmass.horizon);
        return 3 * warmup_episodes * horizon;
    }

    /// Rejects budgets and combinations that cannot run.
    void validate() const {
        const std::size_t T = sequence.steps_per_task;
        if (sequence.tasks.empty()) throw std::invalid_argument("RunConfig: empty task sequence");
        if (T == 0) throw std::invalid_argument("RunConfig: steps_per_task must be positive");
        const TaskFamily fam = family();
        for (const auto& t : sequence.tasks) {
            if (t.family != fam) throw std::invalid_argument("RunConfig: tasks mix gridworld and pointmass generators");
            if (fam == TaskFamily::gridworld) {
                t.grid.validate();
                const auto& g0 = sequence.tasks.front().grid;
                if (t.grid.width != g0.width || t.grid.height != g0.height)
                    throw std::invalid_argument("RunConfig: gridworld tasks must share width and height");
            } else {
                t.pointmass.validate();
                const auto& p0 = sequence.tasks.front().pointmass;
                if (t.pointmass.state_dim != p0.state_dim || t.pointmass.cells_per_dim != p0.cells_per_dim ||
                    t.pointmass.state_low != p0.state_low || t.pointmass.state_high != p0.state_high)
                    throw std::invalid_argument("RunConfig: pointmass tasks must share the state space");
            }
        }
        if (fam == TaskFamily::gridworld && (method == Method::fame_kl || method == Method::fame_wd))
            throw std::invalid_argument("RunConfig: FAME-KL and FAME-WD need pointmass tasks");
        if (fam == TaskFamily::pointmass && method == Method::fame_q)
            throw std::invalid_argument("RunConfig: FAME-Q needs gridworld tasks");
        learner.validate(T);
        if (meta_records > T) throw std::invalid_argument("RunConfig: meta_records (N) exceeds steps_per_task (T)");
        if (is_fame(method) && meta_records == 0) throw std::invalid_argument("RunConfig: meta_records must be positive");
        if (warmup_episodes < 2) throw std::invalid_argument("RunConfig: warmup_episodes must be at least 2");
        if (learner.bc_steps + max_candidate_eval_steps() > T)
            throw std::invalid_argument("RunConfig: bc_steps plus candidate evaluation exceeds steps_per_task");
        if (max_candidate_eval_steps() + meta_records > T)
            throw std::invalid_argument("RunConfig: candidate evaluation overlaps the meta-record window");
        if (curve_points == 0 || curve_points > T) throw std::invalid_argument("RunConfig: curve_points must lie in [1, T]");
        if (curve_episodes == 0) throw std::invalid_argument("RunConfig: curve_episodes must be positive");
        if (!(tau > 0.0)) throw std::invalid_argument("RunConfig: tau must be positive");
        if (!(alpha_test > 0.0 && alpha_test < 1.0)) throw std::invalid_argument("RunConfig: alpha_test must lie in (0,1)");
        if (bc_batch == 0) throw std::invalid_argument("RunConfig: bc_batch must be positive");
        if (episodes_per_update == 0) throw std::invalid_argument("RunConfig: episodes_per_update must be positive");
    }
};

namespace detail {

inline Cell parse_cell(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("config: a cell is [row, col]");
    return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

inline GridworldSpec parse_gridworld(const nlohmann::json& p) {
    GridworldSpec s;
    s.width = p.value("width", s.width);
    s.height = p.value("height", s.height);
    s.wall_density = p.value("wall_density", s.wall_density);
    s.slip = p.value("slip", s.slip);
    s.gamma = p.value("gamma", s.gamma);
    if (p.contains("start")) s.start = parse_cell(p["start"]);
    if (p.contains("goal") && !p["goal"].is_null()) s.goal = parse_cell(p["goal"]);
    if (p.contains("penalties"))
        for (const auto& c : p["penalties"]) s.penalties.push_back(parse_cell(c));
    s.n_penalties = p.value("n_penalties", s.n_penalties);
    s.goal_reward = p.value("goal_reward", s.goal_reward);
    s.penalty_reward = p.value("penalty_reward", s.penalty_reward);
    s.step_reward = p.value("step_reward", s.step_reward);
    s.max_episode_steps = p.value("max_episode_steps", s.max_episode_steps);
    s.retry_budget = p.value("retry_budget", s.retry_budget);
    return s;
}

inline PointmassSpec parse_pointmass(const nlohmann::json& p) {
    PointmassSpec s;
    s.state_dim = p.value("state_dim", s.state_dim);
    s.state_low = p.value("state_low", s.state_low);
    s.state_high = p.value("state_high", s.state_high);
    if (p.contains("start") && !p["start"].is_null()) s.start = p["start"].get<std::vector<double>>();
    if (p.contains("goal") && !p["goal"].is_null()) s.goal = p["goal"].get<std::vector<double>>();
    s.max_action = p.value("max_action", s.max_action);
    s.step_size = p.value("step_size", s.step_size);
    s.dynamics_noise_std = p.value("dynamics_noise_std", s.dynamics_noise_std);
    s.horizon = p.value("horizon", s.horizon);
    s.success_radius = p.value("success_radius", s.success_radius);
    s.cells_per_dim = p.value("cells_per_dim", s.cells_per_dim);
    s.success_reward = p.value("success_reward", s.success_reward);
    s.progress_weight = p.value("progress_weight", s.progress_weight);
    return s;
}

inline Candidate parse_candidate(const std::string& name) {
    for (Candidate c : kCandidates)
        if (name == to_string(c)) return c;
    throw std::invalid_argument("unknown warm-up candidate '" + name + "'");
}

}  // namespace detail

/**
Builds a RunConfig from JSON. Omitted fields take their defaults:
bc_steps = 10% of T, meta_records = 2% of T, bc_lambda = 1, tau = 1,
10 warm-up episodes per candidate, alpha = 0.05, empirical-ranking warm-up.
An optional "order" array lists task indices, so [0, 1, 0] describes an
A-B-A sequence over two task definitions.
*/
inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg;
    cfg.run_id = j.value("run_id", std::string());
    cfg.method = parse_method(j.value("method", std::string("FAME-Q")));
    const std::string integration = j.value("value_integration", std::string("softmax-kl"));
    if (integration == "softmax-kl") cfg.value_integration = ValueIntegration::softmax_kl;
    else if (integration == "l2") cfg.value_integration = ValueIntegration::l2;
    else throw std::invalid_argument("config: value_integration must be softmax-kl or l2");
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.sequence.steps_per_task = j.at("steps_per_task").get<std::size_t>();
    const std::size_t T = cfg.sequence.steps_per_task;

    std::vector<TaskEntry> defs;
    for (const auto& t : j.at("tasks")) {
        TaskEntry e;
        const std::string gen = t.at("generator").get<std::string>();
        e.seed = t.value("seed", std::uint64_t{0});
        const nlohmann::json params = t.value("params", nlohmann::json::object());
        if (gen == "gridworld") {
            e.family = TaskFamily::gridworld;
            e.grid = detail::parse_gridworld(params);
        } else if (gen == "pointmass") {
            e.family = TaskFamily::pointmass;
            e.pointmass = detail::parse_pointmass(params);
        } else {
            throw std::invalid_argument("config: unknown generator '" + gen + "'");
        }
        defs.push_back(std::move(e));
    }
    if (j.contains("order")) {
        for (const auto& idx : j["order"]) cfg.sequence.tasks.push_back(defs.at(idx.get<std::size_t>()));
    } else {
        cfg.sequence.tasks = std::move(defs);
    }

    const nlohmann::json l = j.value("learner", nlohmann::json::object());
    cfg.learner.learning_rate = l.value("learning_rate", cfg.learner.learning_rate);
    cfg.learner.gamma = l.value("gamma", cfg.learner.gamma);
    cfg.learner.epsilon.start = l.value("epsilon_start", cfg.learner.epsilon.start);
    cfg.learner.epsilon.end = l.value("epsilon_end", cfg.learner.epsilon.end);
    if (l.contains("epsilon_decay_steps"))
        cfg.learner.epsilon.decay_steps = l["epsilon_decay_steps"].get<std::size_t>();
    else
        cfg.learner.epsilon.decay_steps =
            static_cast<std::size_t>(std::llround(l.value("epsilon_decay_fraction", 0.5) * static_cast<double>(T)));
    cfg.learner.policy_learning_rate = l.value("policy_learning_rate", cfg.learner.policy_learning_rate);
    cfg.learner.baseline_rate = l.value("baseline_rate", cfg.learner.baseline_rate);
    cfg.learner.sigma_max = l.value("sigma_max", cfg.learner.sigma_max);
    cfg.learner.mean_limit = l.value("mean_limit", cfg.learner.mean_limit);

    cfg.learner.bc_lambda = j.value("bc_lambda", 1.0);
    cfg.learner.bc_steps = j.contains("bc_steps") && !j["bc_steps"].is_null() ? j["bc_steps"].get<std::size_t>() : T / 10;
    cfg.meta_records =
        j.contains("meta_records") && !j["meta_records"].is_null() ? j["meta_records"].get<std::size_t>() : T / 50;
    cfg.warmup_episodes = j.value("warmup_episodes", cfg.warmup_episodes);
    cfg.tau = j.value("tau", cfg.tau);
    cfg.alpha_test = j.value("alpha_test", cfg.alpha_test);
    const std::string mode = j.value("warmup_mode", std::string("empirical"));
    if (mode == "empirical") cfg.warmup_mode = WarmupMode::empirical_ranking;
    else if (mode == "strict") cfg.warmup_mode = WarmupMode::strict_test;
    else throw std::invalid_argument("config: warmup_mode must be empirical or strict");
    if (j.contains("forced_warmup") && !j["forced_warmup"].is_null())
        cfg.forced_warmup = detail::parse_candidate(j["forced_warmup"].get<std::string>());
    cfg.integrate = j.value("integrate", cfg.integrate);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    cfg.curve_points = j.value("curve_points", cfg.curve_points);
    cfg.curve_episodes = j.value("curve_episodes", cfg.curve_episodes);
    cfg.bc_batch = j.value("bc_batch", cfg.bc_batch);
    cfg.fast_buffer_capacity = j.value("fast_buffer_capacity", cfg.fast_buffer_capacity);
    cfg.episodes_per_update = j.value("episodes_per_update", cfg.episodes_per_update);
    cfg.checkpoint = j.value("checkpoint", cfg.checkpoint);
    if (j.contains("stop_after_tasks") && !j["stop_after_tasks"].is_null())
        cfg.stop_after_tasks = j["stop_after_tasks"].get<std::size_t>();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    return parse_config(nlohmann::json::parse(in));
}

}  // namespace fame
