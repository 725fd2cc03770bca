#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "fame/buffers.hpp"
#include "fame/config.hpp"
#include "fame/continuous_task.hpp"
#include "fame/distance.hpp"
#include "fame/fast_learner.hpp"
#include "fame/gaussian_learner.hpp"
#include "fame/gridworld.hpp"
#include "fame/mdp.hpp"
#include "fame/meta_learner.hpp"
#include "fame/metrics.hpp"
#include "fame/rng.hpp"
#include "fame/serialize.hpp"
#include "fame/warmup.hpp"

namespace fame {

/// What happened at one task of a run.
struct TaskRecord {
    std::size_t task_index = 0;
    std::uint64_t env_seed = 0;
    Candidate chosen = Candidate::random;
    /// True when candidates were evaluated on the new task.
    bool evaluated = false;
    std::array<std::optional<double>, 3> candidate_means;
    std::optional<std::array<double, 2>> p_values;
    std::size_t eval_steps = 0;
    std::size_t train_steps = 0;
    std::optional<double> objective_before;
    std::optional<double> objective_after;
    /// Forgetting of the fast learner between consecutive tasks.
    std::optional<double> cf_fast;
    /// Forgetting of the meta learner between consecutive tasks.
    std::optional<double> cf_meta;
};

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(); }

inline std::optional<double> optional_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const TaskRecord& r) {
    j = {{"task_index", r.task_index},
         {"env_seed", r.env_seed},
         {"chosen", static_cast<std::size_t>(r.chosen)},
         {"evaluated", r.evaluated},
         {"candidate_means",
          {detail::optional_json(r.candidate_means[0]), detail::optional_json(r.candidate_means[1]),
           detail::optional_json(r.candidate_means[2])}},
         {"p_values", r.p_values ? nlohmann::json(*r.p_values) : nlohmann::json()},
         {"eval_steps", r.eval_steps},
         {"train_steps", r.train_steps},
         {"objective_before", detail::optional_json(r.objective_before)},
         {"objective_after", detail::optional_json(r.objective_after)},
         {"cf_fast", detail::optional_json(r.cf_fast)},
         {"cf_meta", detail::optional_json(r.cf_meta)}};
}

inline void from_json(const nlohmann::json& j, TaskRecord& r) {
    r.task_index = j.at("task_index").get<std::size_t>();
    r.env_seed = j.at("env_seed").get<std::uint64_t>();
    r.chosen = static_cast<Candidate>(j.at("chosen").get<std::size_t>());
    r.evaluated = j.at("evaluated").get<bool>();
    for (std::size_t i = 0; i < 3; ++i) r.candidate_means[i] = detail::optional_from(j.at("candidate_means").at(i));
    if (!j.at("p_values").is_null()) r.p_values = j.at("p_values").get<std::array<double, 2>>();
    r.eval_steps = j.at("eval_steps").get<std::size_t>();
    r.train_steps = j.at("train_steps").get<std::size_t>();
    r.objective_before = detail::optional_from(j.at("objective_before"));
    r.objective_after = detail::optional_from(j.at("objective_after"));
    r.cf_fast = detail::optional_from(j.at("cf_fast"));
    r.cf_meta = detail::optional_from(j.at("cf_meta"));
}

struct RunResult {
    RunConfig config;
    std::vector<TaskRecord> tasks;
    /// Meta learner for FAME methods, the (only) fast learner otherwise.
    LearningCurve curve;
    /// Fast learner of FAME methods.
    std::optional<LearningCurve> fast_curve;
    /// Task-intrinsic performance range used for single-run normalization.
    std::vector<Bounds> intrinsic_bounds;
    bool complete = false;

    std::string curve_label() const { return to_string(config.method); }
    std::string fast_curve_label() const { return curve_label() + ":fast"; }
};

/// Grid of evaluation times: 0 and `points` evenly spaced steps inside each task, ending at every boundary.
inline std::vector<std::size_t> curve_grid(const RunConfig& cfg) {
    const std::size_t T = cfg.sequence.steps_per_task;
    std::vector<std::size_t> grid{0};
    for (std::size_t k = 0; k < cfg.sequence.size(); ++k)
        for (std::size_t j = 1; j <= cfg.curve_points; ++j) grid.push_back(k * T + j * T / cfg.curve_points);
    return grid;
}

namespace detail {

inline constexpr std::uint64_t kTrainStream = 0x747261696eULL;
inline constexpr std::uint64_t kEvalStream = 0x6576616cULL;
inline constexpr std::uint64_t kForgettingStream = 0x6366ULL;

inline std::string format_double(double x) {
    std::ostringstream out;
    out.precision(17);
    out << x;
    return out.str();
}

inline std::string format_optional(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }

/// Writes via a temporary file and rename so readers never see a partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << contents;
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

/**
Shared bookkeeping of a sequence run: the global step counter, the curve
grid, task records and checkpoints. Subclasses supply the learners.
*/
class SequenceRunBase {
public:
    explicit SequenceRunBase(RunConfig cfg) : cfg_(std::move(cfg)), grid_(curve_grid(cfg_)) {
        cfg_.validate();
        train_ = Rng(derive_seed(cfg_.seed, detail::kTrainStream));
        const std::size_t K = cfg_.sequence.size();
        curve_.steps_per_task = static_cast<double>(cfg_.sequence.steps_per_task);
        curve_.values.assign(K, {});
        if (is_fame(cfg_.method)) {
            fast_curve_ = LearningCurve{};
            fast_curve_->steps_per_task = curve_.steps_per_task;
            fast_curve_->values.assign(K, {});
        }
    }
    virtual ~SequenceRunBase() = default;

    const RunConfig& config() const { return cfg_; }

    /// Runs the remaining tasks (all of them unless restored from a checkpoint).
    RunResult run() {
        if (global_step_ == 0 && next_grid_ == 0) sample_curves();
        const std::size_t K = cfg_.sequence.size();
        while (next_task_ < K) {
            run_task(next_task_);
            ++next_task_;
            if (cfg_.checkpoint && !cfg_.output_dir.empty())
                detail::write_atomically(std::filesystem::path(cfg_.output_dir) / "checkpoint.json", checkpoint().dump());
            if (cfg_.stop_after_tasks && next_task_ >= *cfg_.stop_after_tasks && next_task_ < K) break;
        }
        RunResult result;
        result.config = cfg_;
        result.tasks = tasks_;
        result.curve = curve_;
        result.fast_curve = fast_curve_;
        result.intrinsic_bounds = intrinsic_bounds();
        result.complete = next_task_ == K;
        return result;
    }

    nlohmann::json checkpoint() const {
        nlohmann::json j;
        j["run_id"] = cfg_.id();
        j["method"] = to_string(cfg_.method);
        j["seed"] = cfg_.seed;
        j["next_task"] = next_task_;
        j["global_step"] = global_step_;
        j["next_grid"] = next_grid_;
        j["train_rng"] = train_.serialize();
        j["tasks"] = tasks_;
        j["curve"] = curve_;
        j["fast_curve"] = fast_curve_ ? nlohmann::json(*fast_curve_) : nlohmann::json();
        j["learners"] = save_learners();
        return j;
    }

    void restore(const nlohmann::json& j) {
        if (j.at("run_id").get<std::string>() != cfg_.id() || j.at("seed").get<std::uint64_t>() != cfg_.seed ||
            j.at("method").get<std::string>() != to_string(cfg_.method))
            throw std::invalid_argument("checkpoint does not belong to this run configuration");
        next_task_ = j.at("next_task").get<std::size_t>();
        global_step_ = j.at("global_step").get<std::size_t>();
        next_grid_ = j.at("next_grid").get<std::size_t>();
        train_ = Rng::deserialize(j.at("train_rng").get<std::string>());
        tasks_ = j.at("tasks").get<std::vector<TaskRecord>>();
        curve_ = j.at("curve").get<LearningCurve>();
        if (!j.at("fast_curve").is_null()) fast_curve_ = j.at("fast_curve").get<LearningCurve>();
        load_learners(j.at("learners"));
    }

protected:
    virtual void run_task(std::size_t k) = 0;
    /// Performance of the primary learner on task i.
    virtual double evaluate_primary(std::size_t task, Rng& rng) const = 0;
    /// Performance of the fast learner on task i (FAME methods only).
    virtual double evaluate_fast(std::size_t task, Rng& rng) const = 0;
    virtual std::vector<Bounds> intrinsic_bounds() const = 0;
    virtual nlohmann::json save_learners() const = 0;
    virtual void load_learners(const nlohmann::json& j) = 0;

    std::size_t steps_per_task() const { return cfg_.sequence.steps_per_task; }

    /// Counts one environment step of task k; samples curves at grid points inside the task.
    void advance(std::size_t k) {
        ++global_step_;
        const std::size_t boundary = (k + 1) * steps_per_task();
        if (next_grid_ < grid_.size() && grid_[next_grid_] == global_step_ && global_step_ < boundary) sample_curves();
    }

    /// Samples the boundary point of task k, after knowledge integration.
    void close_task(std::size_t k) {
        if (global_step_ != (k + 1) * steps_per_task())
            throw std::logic_error("task " + std::to_string(k) + " did not consume exactly T steps");
        if (next_grid_ >= grid_.size() || grid_[next_grid_] != global_step_)
            throw std::logic_error("curve grid out of step with the task boundary");
        sample_curves();
    }

    void sample_curves() {
        const std::size_t K = cfg_.sequence.size();
        const std::uint64_t eval_seed = derive_seed(cfg_.seed, detail::kEvalStream);
        curve_.times.push_back(static_cast<double>(global_step_));
        if (fast_curve_) fast_curve_->times.push_back(static_cast<double>(global_step_));
        for (std::size_t i = 0; i < K; ++i) {
            // One stream per (time, task), shared by both learners, so a FAME
            // fast learner and an identical baseline learner score identically.
            const std::uint64_t stream = derive_seed(eval_seed, static_cast<std::uint64_t>(global_step_ * K + i));
            Rng primary_rng(stream);
            curve_.values[i].push_back(evaluate_primary(i, primary_rng));
            if (fast_curve_) {
                Rng fast_rng(stream);
                fast_curve_->values[i].push_back(evaluate_fast(i, fast_rng));
            }
        }
        ++next_grid_;
    }

    /// Decision used when no candidate evaluation happens (first task, baselines, forced warm-up).
    std::optional<WarmupDecision> fixed_decision(std::size_t k) const {
        WarmupDecision d;
        d.mode = cfg_.warmup_mode;
        if (cfg_.method == Method::reset || k == 0) {
            d.chosen = Candidate::random;
        } else if (cfg_.method == Method::finetune) {
            d.chosen = Candidate::fast;
        } else if (cfg_.forced_warmup) {
            d.chosen = *cfg_.forced_warmup;
        } else {
            return std::nullopt;
        }
        d.bc_enabled = d.chosen == Candidate::meta;
        return d;
    }

    static void record_decision(TaskRecord& rec, const WarmupDecision& d, const CandidateEvaluation* eval) {
        rec.chosen = d.chosen;
        rec.p_values = d.p_values;
        if (eval) {
            rec.evaluated = true;
            rec.eval_steps = eval->steps;
            for (std::size_t c = 0; c < 3; ++c)
                if (eval->summaries[c]) rec.candidate_means[c] = eval->summaries[c]->mean();
        }
    }

    Rng forgetting_rng(std::size_t k) const {
        return Rng(derive_seed(derive_seed(cfg_.seed, detail::kForgettingStream), static_cast<std::uint64_t>(k)));
    }

    RunConfig cfg_;
    std::vector<std::size_t> grid_;
    std::size_t next_task_ = 0;
    std::size_t global_step_ = 0;
    std::size_t next_grid_ = 0;
    Rng train_;
    std::vector<TaskRecord> tasks_;
    LearningCurve curve_;
    std::optional<LearningCurve> fast_curve_;
};

/**
Value-based sequence on gridworld tasks: FAME-Q (softmax-KL or weighted-l2
meta learner), Reset and Finetune.
*/
class ValueSequenceRun : public SequenceRunBase {
public:
    explicit ValueSequenceRun(RunConfig cfg) : SequenceRunBase(std::move(cfg)) {
        for (const auto& t : cfg_.sequence.tasks) worlds_.push_back(generate_gridworld(t.grid, t.seed));
        n_states_ = worlds_.front().mdp.n_states;
        n_actions_ = worlds_.front().mdp.n_actions;
        fast_ = QTable(n_states_, n_actions_, 0.0, cfg_.tau);
        qmeta_ = QMetaState(n_states_, n_actions_, cfg_.tau);
        cmeta_ = CategoricalMetaState(n_states_, n_actions_);
        buffer_ = MetaBuffer<StateActionRecord>(cfg_.meta_records);
    }

    const QTable& fast() const { return fast_; }
    const MetaBuffer<StateActionRecord>& meta_buffer() const { return buffer_; }
    const std::vector<Gridworld>& worlds() const { return worlds_; }

    /// Policy of the meta learner (softmax of Q^M for the l2 variant).
    CategoricalPolicyTable meta_policy() const {
        return cfg_.value_integration == ValueIntegration::softmax_kl ? cmeta_.policy : softmax_policy(qmeta_.q);
    }

    DeterministicPolicy meta_greedy() const {
        return cfg_.value_integration == ValueIntegration::softmax_kl ? greedy_policy(cmeta_.policy)
                                                                      : greedy_policy(qmeta_.q);
    }

protected:
    double rollout_return(std::size_t task, const DeterministicPolicy& pi, Rng& rng) const {
        const Gridworld& w = worlds_[task];
        double total = 0.0;
        for (std::size_t e = 0; e < cfg_.curve_episodes; ++e) {
            std::size_t s = sample_start(w.mdp, rng);
            for (std::size_t t = 0; t < w.spec.max_episode_steps && !w.mdp.terminal[s]; ++t) {
                const StepResult r = step(w.mdp, s, pi[s], rng);
                total += r.reward;
                s = r.next_state;
                if (r.done) break;
            }
        }
        return total / static_cast<double>(cfg_.curve_episodes);
    }

    double evaluate_primary(std::size_t task, Rng& rng) const override {
        return rollout_return(task, is_fame(cfg_.method) ? meta_greedy() : greedy_policy(fast_), rng);
    }

    double evaluate_fast(std::size_t task, Rng& rng) const override {
        return rollout_return(task, greedy_policy(fast_), rng);
    }

    std::vector<Bounds> intrinsic_bounds() const override {
        std::vector<Bounds> b;
        for (const auto& w : worlds_) b.push_back({0.0, w.spec.goal_reward});
        return b;
    }

    nlohmann::json save_learners() const override {
        return {{"fast", fast_}, {"q_meta", qmeta_}, {"categorical_meta", cmeta_}, {"meta_buffer_kind", "state_action"},
                {"meta_buffer", buffer_to_json(buffer_)}};
    }

    void load_learners(const nlohmann::json& j) override {
        fast_ = j.at("fast").get<QTable>();
        qmeta_ = j.at("q_meta").get<QMetaState>();
        cmeta_ = j.at("categorical_meta").get<CategoricalMetaState>();
        buffer_ = buffer_from_json<StateActionRecord>(j.at("meta_buffer"));
    }

    void run_task(std::size_t k) override {
        const Gridworld& env = worlds_[k];
        const std::size_t T = steps_per_task();
        const bool fame = is_fame(cfg_.method);
        FastBuffer<Transition> recent(cfg_.fast_buffer_capacity);
        TaskRecord rec;
        rec.task_index = k;
        rec.env_seed = cfg_.sequence.tasks[k].seed;
        std::size_t used = 0;
        auto count_step = [&] {
            ++used;
            advance(k);
        };

        WarmupDecision decision;
        if (const auto fixed = fixed_decision(k)) {
            decision = *fixed;
            record_decision(rec, decision, nullptr);
        } else {
            const DeterministicPolicy meta_pi = meta_greedy();
            const DeterministicPolicy fast_pi = greedy_policy(fast_);
            auto episode = [&](Candidate c) {
                EpisodeOutcome out;
                std::size_t s = sample_start(env.mdp, train_);
                while (out.steps < env.spec.max_episode_steps && !env.mdp.terminal[s]) {
                    const std::size_t a = c == Candidate::random ? train_.uniform_index(n_actions_)
                                          : c == Candidate::meta ? meta_pi[s]
                                                                 : fast_pi[s];
                    const StepResult r = step(env.mdp, s, a, train_);
                    recent.push({s, a, r.reward, r.next_state, r.done, k});
                    out.episode_return += r.reward;
                    ++out.steps;
                    count_step();
                    s = r.next_state;
                    if (r.done) break;
                }
                return out;
            };
            const CandidateEvaluation eval = evaluate_candidates(episode, available_candidates(k), cfg_.warmup_episodes);
            decision = one_vs_all_test(eval.summaries, cfg_.alpha_test, cfg_.warmup_mode);
            record_decision(rec, decision, &eval);
        }

        const QTable previous_fast = fast_;
        const CategoricalPolicyTable previous_meta_policy = meta_policy();
        ValueWarmStart warm = apply_warmup(decision, fast_, n_states_, n_actions_, cfg_.tau);
        fast_ = std::move(warm.q);
        const CategoricalPolicyTable bc_target = warm.bc_enabled ? meta_policy() : CategoricalPolicyTable{};

        std::size_t train_step = 0;
        std::size_t bc_done = 0;
        std::size_t s = sample_start(env.mdp, train_);
        std::size_t episode_steps = 0;
        std::vector<Transition> batch;
        while (used < T) {
            const std::size_t t_local = used + 1;
            const std::size_t a = act_epsilon_greedy(fast_, s, train_step, cfg_.learner, train_);
            const StepResult r = step(env.mdp, s, a, train_);
            const Transition tr{s, a, r.reward, r.next_state, r.done, k};
            recent.push(tr);
            if (warm.bc_enabled && bc_done < cfg_.learner.bc_steps) {
                batch.assign(1, tr);
                for (std::size_t b = 1; b < cfg_.bc_batch; ++b) batch.push_back(recent.sample(train_));
                bc_regularized_q_update(fast_, batch, bc_target, cfg_.learner);
                ++bc_done;
            } else {
                q_update(fast_, tr, cfg_.learner);
            }
            if (fame) record_meta(buffer_, StateActionRecord{s, a}, t_local, T, cfg_.meta_records, k);
            ++train_step;
            count_step();
            s = r.next_state;
            ++episode_steps;
            if (r.done || episode_steps >= env.spec.max_episode_steps) {
                s = sample_start(env.mdp, train_);
                episode_steps = 0;
            }
        }
        rec.train_steps = train_step;
        recent.clear();

        if (fame && cfg_.integrate) integrate(k, rec);

        if (k > 0) {
            const TabularMdp& previous_mdp = worlds_[k - 1].mdp;
            const VisitationWeights w_prev =
                discounted_visitation(previous_mdp, softmax_policy(previous_fast), VisitationMode::exact);
            rec.cf_fast = cf_q(previous_fast, fast_, w_prev);
            if (fame) {
                const VisitationWeights mu_prev =
                    discounted_visitation(previous_mdp, previous_meta_policy, VisitationMode::exact);
                rec.cf_meta = cf_pi(previous_meta_policy, meta_policy(), mu_prev, {QMetric::squared_l2, PiMetric::kl});
            }
        }
        tasks_.push_back(rec);
        close_task(k);
    }

private:
    void integrate(std::size_t k, TaskRecord& rec) {
        if (cfg_.value_integration == ValueIntegration::softmax_kl) {
            rec.objective_before = softmax_kl_objective(cmeta_.policy, buffer_);
            integrate_softmax_kl(cmeta_, buffer_);
            rec.objective_after = softmax_kl_objective(cmeta_.policy, buffer_);
            return;
        }
        if (buffer_.records(k).empty()) return;
        const VisitationWeights w = estimate_weights(buffer_, k, n_states_, n_actions_);
        const QMetaState previous = qmeta_;
        rec.objective_before = q_l2_objective(previous, fast_, w, previous.q);
        integrate_q_l2(qmeta_, fast_, w);
        rec.objective_after = q_l2_objective(previous, fast_, w, qmeta_.q);
    }

    std::vector<Gridworld> worlds_;
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    QTable fast_;
    QMetaState qmeta_;
    CategoricalMetaState cmeta_;
    MetaBuffer<StateActionRecord> buffer_;
};

/**
Policy-based sequence on point-mass tasks: FAME-KL, FAME-WD, Reset and
Finetune, all with a tabular Gaussian REINFORCE fast learner.
*/
class PolicySequenceRun : public SequenceRunBase {
public:
    explicit PolicySequenceRun(RunConfig cfg) : SequenceRunBase(std::move(cfg)) {
        for (const auto& t : cfg_.sequence.tasks) envs_.push_back(generate_pointmass(t.pointmass, t.seed));
        n_cells_ = envs_.front().n_cells();
        action_dim_ = envs_.front().action_dim();
        fast_ = GaussianLearner(n_cells_, action_dim_);
        meta_ = GaussianMetaState(n_cells_, action_dim_);
        kl_buffer_ = MetaBuffer<ContinuousActionRecord>(cfg_.meta_records);
        wd_buffer_ = MetaBuffer<StateRecord>(cfg_.meta_records);
    }

    const GaussianLearner& fast() const { return fast_; }
    const GaussianMetaState& meta() const { return meta_; }

protected:
    /// Success rate of mean-action rollouts.
    double success_rate(std::size_t task, const GaussianPolicyTable& pi, Rng& rng) const {
        const ContinuousTask& env = envs_[task];
        std::size_t successes = 0;
        for (std::size_t e = 0; e < cfg_.curve_episodes; ++e) {
            std::vector<double> x = env.start;
            for (std::size_t t = 0; t < env.horizon; ++t) {
                const ContinuousStep st = step(env, x, act_mean(pi, env.cell_of(x)), rng);
                x = st.next_state;
                if (st.done) {
                    ++successes;
                    break;
                }
            }
        }
        return static_cast<double>(successes) / static_cast<double>(cfg_.curve_episodes);
    }

    /// Normalized cell occupancy of mean-action rollouts.
    VisitationWeights cell_visitation(std::size_t task, const GaussianPolicyTable& pi, Rng& rng) const {
        const ContinuousTask& env = envs_[task];
        VisitationWeights w;
        w.task_id = task;
        w.state.assign(n_cells_, 0.0);
        double total = 0.0;
        for (std::size_t e = 0; e < cfg_.curve_episodes; ++e) {
            std::vector<double> x = env.start;
            for (std::size_t t = 0; t < env.horizon; ++t) {
                const std::size_t cell = env.cell_of(x);
                w.state[cell] += 1.0;
                total += 1.0;
                const ContinuousStep st = step(env, x, act_mean(pi, cell), rng);
                x = st.next_state;
                if (st.done) break;
            }
        }
        for (double& m : w.state) m /= total;
        return w;
    }

    double evaluate_primary(std::size_t task, Rng& rng) const override {
        return success_rate(task, is_fame(cfg_.method) ? meta_.policy : fast_.policy, rng);
    }

    double evaluate_fast(std::size_t task, Rng& rng) const override { return success_rate(task, fast_.policy, rng); }

    std::vector<Bounds> intrinsic_bounds() const override { return std::vector<Bounds>(envs_.size(), Bounds{0.0, 1.0}); }

    nlohmann::json save_learners() const override {
        if (cfg_.method == Method::fame_wd)
            return {{"fast", fast_}, {"meta", meta_}, {"meta_buffer_kind", "state"}, {"meta_buffer", buffer_to_json(wd_buffer_)}};
        return {{"fast", fast_}, {"meta", meta_}, {"meta_buffer_kind", "continuous_action"},
                {"meta_buffer", buffer_to_json(kl_buffer_)}};
    }

    void load_learners(const nlohmann::json& j) override {
        fast_ = j.at("fast").get<GaussianLearner>();
        meta_ = j.at("meta").get<GaussianMetaState>();
        if (cfg_.method == Method::fame_wd)
            wd_buffer_ = buffer_from_json<StateRecord>(j.at("meta_buffer"));
        else
            kl_buffer_ = buffer_from_json<ContinuousActionRecord>(j.at("meta_buffer"));
    }

    void run_task(std::size_t k) override {
        const ContinuousTask& env = envs_[k];
        const std::size_t T = steps_per_task();
        TaskRecord rec;
        rec.task_index = k;
        rec.env_seed = cfg_.sequence.tasks[k].seed;
        std::size_t used = 0;
        auto count_step = [&] {
            ++used;
            advance(k);
        };

        WarmupDecision decision;
        if (const auto fixed = fixed_decision(k)) {
            decision = *fixed;
            record_decision(rec, decision, nullptr);
        } else {
            const GaussianPolicyTable fresh(n_cells_, action_dim_, 0.0, 1.0);
            auto episode = [&](Candidate c) {
                EpisodeOutcome out;
                std::vector<double> x = env.start;
                while (out.steps < env.horizon) {
                    const std::size_t cell = env.cell_of(x);
                    const std::vector<double> a = c == Candidate::random ? act_gaussian(fresh, env, cell, 0.0, train_)
                                                  : c == Candidate::meta ? act_mean(meta_.policy, cell)
                                                                         : act_mean(fast_.policy, cell);
                    const ContinuousStep st = step(env, x, a, train_);
                    out.episode_return += st.reward;
                    ++out.steps;
                    count_step();
                    x = st.next_state;
                    if (st.done) break;
                }
                return out;
            };
            const CandidateEvaluation eval = evaluate_candidates(episode, available_candidates(k), cfg_.warmup_episodes);
            decision = one_vs_all_test(eval.summaries, cfg_.alpha_test, cfg_.warmup_mode);
            record_decision(rec, decision, &eval);
        }

        const GaussianLearner previous_fast = fast_;
        const GaussianMetaState previous_meta = meta_;
        fast_ = apply_warmup(decision, fast_, meta_);

        std::size_t train_step = 0;
        std::vector<Trajectory> pending;
        Trajectory current;
        std::vector<double> x = env.start;
        while (used < T) {
            const std::size_t t_local = used + 1;
            const std::size_t cell = env.cell_of(x);
            std::vector<double> a = act_gaussian(fast_.policy, env, cell, cfg_.learner.epsilon(train_step), train_);
            const ContinuousStep st = step(env, x, a, train_);
            if (cfg_.method == Method::fame_kl)
                record_meta(kl_buffer_, ContinuousActionRecord{cell, a}, t_local, T, cfg_.meta_records, k);
            else if (cfg_.method == Method::fame_wd)
                record_meta(wd_buffer_, StateRecord{cell}, t_local, T, cfg_.meta_records, k);
            current.steps.push_back({cell, x, std::move(a), st.reward});
            ++train_step;
            count_step();
            x = st.next_state;
            if (st.done || current.steps.size() >= env.horizon) {
                current.success = st.success;
                pending.push_back(std::move(current));
                current = Trajectory{};
                x = env.start;
                if (pending.size() >= cfg_.episodes_per_update) {
                    gaussian_policy_update(fast_, pending, cfg_.learner);
                    pending.clear();
                }
            }
        }
        if (!current.steps.empty()) pending.push_back(std::move(current));
        if (!pending.empty()) gaussian_policy_update(fast_, pending, cfg_.learner);
        rec.train_steps = train_step;

        if (is_fame(cfg_.method) && cfg_.integrate) integrate(k, rec);

        if (k > 0) {
            Rng rng = forgetting_rng(k);
            const VisitationWeights mu_fast = cell_visitation(k - 1, previous_fast.policy, rng);
            rec.cf_fast = cf_pi(previous_fast.policy, fast_.policy, mu_fast);
            if (is_fame(cfg_.method)) {
                const VisitationWeights mu_meta = cell_visitation(k - 1, previous_meta.policy, rng);
                rec.cf_meta = cf_pi(previous_meta.policy, meta_.policy, mu_meta);
            }
        }
        tasks_.push_back(rec);
        close_task(k);
    }

private:
    void integrate(std::size_t k, TaskRecord& rec) {
        if (cfg_.method == Method::fame_kl) {
            rec.objective_before = policy_kl_objective(meta_.policy, kl_buffer_);
            integrate_policy_kl(meta_, kl_buffer_);
            rec.objective_after = policy_kl_objective(meta_.policy, kl_buffer_);
            return;
        }
        if (wd_buffer_.records(k).empty()) return;
        const VisitationWeights mu = estimate_state_weights(wd_buffer_, k, n_cells_);
        const GaussianMetaState previous = meta_;
        rec.objective_before = policy_wd_objective(previous, fast_.policy, mu, previous.policy);
        integrate_policy_wd(meta_, fast_.policy, mu);
        rec.objective_after = policy_wd_objective(previous, fast_.policy, mu, meta_.policy);
    }

    std::vector<ContinuousTask> envs_;
    std::size_t n_cells_ = 0;
    std::size_t action_dim_ = 0;
    GaussianLearner fast_;
    GaussianMetaState meta_;
    MetaBuffer<ContinuousActionRecord> kl_buffer_;
    MetaBuffer<StateRecord> wd_buffer_;
};

inline std::unique_ptr<SequenceRunBase> make_run(const RunConfig& cfg) {
    if (cfg.family() == TaskFamily::gridworld) return std::make_unique<ValueSequenceRun>(cfg);
    return std::make_unique<PolicySequenceRun>(cfg);
}

// ---------------------------------------------------------------- outputs

inline const char* kCurvesHeader = "run_id,seed,method,task_index,env_seed,t,p_raw,p_norm\n";

inline std::string curves_csv(const RunResult& r) {
    std::ostringstream out;
    out << kCurvesHeader;
    auto emit = [&](const LearningCurve& c, const std::string& label) {
        for (std::size_t i = 0; i < c.n_tasks(); ++i) {
            const Bounds b = r.intrinsic_bounds.at(i);
            const double range = b.high - b.low;
            for (std::size_t j = 0; j < c.times.size(); ++j) {
                const double p = c.values[i][j];
                out << r.config.id() << ',' << r.config.seed << ',' << label << ',' << i << ','
                    << r.config.sequence.tasks[i].seed << ',' << static_cast<std::uint64_t>(c.times[j]) << ','
                    << detail::format_double(p) << ',' << detail::format_double(range > 0.0 ? (p - b.low) / range : 0.0)
                    << '\n';
            }
        }
    };
    emit(r.curve, r.curve_label());
    if (r.fast_curve) emit(*r.fast_curve, r.fast_curve_label());
    return out.str();
}

inline std::string tasks_csv(const RunResult& r) {
    std::ostringstream out;
    out << "run_id,seed,method,task_index,env_seed,decision,evaluated,mean_meta,mean_fast,mean_random,"
           "p_meta_vs_fast,p_meta_vs_random,eval_steps,train_steps,objective_before,objective_after,cf_fast,cf_meta\n";
    for (const TaskRecord& t : r.tasks) {
        out << r.config.id() << ',' << r.config.seed << ',' << to_string(r.config.method) << ',' << t.task_index << ','
            << t.env_seed << ',' << to_string(t.chosen) << ',' << (t.evaluated ? 1 : 0);
        for (const auto& m : t.candidate_means) out << ',' << detail::format_optional(m);
        for (std::size_t i = 0; i < 2; ++i)
            out << ',' << (t.p_values ? detail::format_double((*t.p_values)[i]) : std::string());
        out << ',' << t.eval_steps << ',' << t.train_steps << ',' << detail::format_optional(t.objective_before) << ','
            << detail::format_optional(t.objective_after) << ',' << detail::format_optional(t.cf_fast) << ','
            << detail::format_optional(t.cf_meta) << '\n';
    }
    return out.str();
}

/// Single-run metrics on task-intrinsic normalization.
inline std::string summary_csv(const RunResult& r) {
    std::ostringstream out;
    out << "run_id,seed,method,metric,value\n";
    auto emit = [&](const LearningCurve& raw, const std::string& label) {
        const LearningCurve c = normalize(raw, r.intrinsic_bounds);
        const double end = static_cast<double>(c.n_tasks()) * c.steps_per_task;
        const std::string prefix = r.config.id() + "," + std::to_string(r.config.seed) + "," + label + ",";
        out << prefix << "avg_perf," << detail::format_double(average_performance(c, end).value) << '\n';
        const Forgetting f = forgetting(c);
        out << prefix << "forgetting," << detail::format_double(f.mean) << '\n';
        for (std::size_t i = 0; i < f.per_task.size(); ++i)
            out << prefix << "forgetting_task_" << i << ',' << detail::format_double(f.per_task[i]) << '\n';
    };
    if (!r.complete) return out.str();
    emit(r.curve, r.curve_label());
    if (r.fast_curve) emit(*r.fast_curve, r.fast_curve_label());
    return out.str();
}

inline void write_outputs(const RunResult& r, const std::filesystem::path& dir) {
    detail::write_atomically(dir / "curves.csv", curves_csv(r));
    detail::write_atomically(dir / "tasks.csv", tasks_csv(r));
    detail::write_atomically(dir / "summary.csv", summary_csv(r));
}

/// Runs (or resumes) an experiment and writes its CSVs when output_dir is set.
inline RunResult run_experiment(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume_from = {}) {
    auto run = make_run(cfg);
    if (resume_from) {
        std::ifstream in(*resume_from);
        if (!in) throw std::runtime_error("cannot open checkpoint '" + resume_from->string() + "'");
        run->restore(nlohmann::json::parse(in));
    }
    RunResult result = run->run();
    if (!cfg.output_dir.empty()) write_outputs(result, cfg.output_dir);
    return result;
}

// ---------------------------------------------------- cross-run metrics

/// One labelled curve read back from curves.csv.
struct LoadedCurve {
    std::string run_id;
    std::uint64_t seed = 0;
    std::string label;
    LearningCurve curve;

    bool is_fast() const { return label.find(':') != std::string::npos; }
    std::string method() const { return label.substr(0, label.find(':')); }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline std::vector<LoadedCurve> load_curves_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (line + "\n" != kCurvesHeader) throw std::runtime_error("unexpected curves header in '" + path.string() + "'");
    std::map<std::pair<std::string, std::string>, std::map<std::size_t, std::map<std::uint64_t, double>>> rows;
    std::map<std::pair<std::string, std::string>, std::uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> order;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != 8) throw std::runtime_error("malformed curves row: " + line);
        const auto key = std::make_pair(c[0], c[2]);
        if (!seeds.count(key)) order.push_back(key);
        seeds[key] = std::stoull(c[1]);
        rows[key][std::stoul(c[3])][std::stoull(c[5])] = std::stod(c[6]);
    }
    std::vector<LoadedCurve> out;
    for (const auto& key : order) {
        LoadedCurve lc;
        lc.run_id = key.first;
        lc.label = key.second;
        lc.seed = seeds[key];
        const auto& by_task = rows[key];
        for (const auto& [t, p] : by_task.begin()->second) lc.curve.times.push_back(static_cast<double>(t));
        for (const auto& [task, series] : by_task) {
            std::vector<double> v;
            for (const auto& [t, p] : series) v.push_back(p);
            lc.curve.values.push_back(std::move(v));
        }
        lc.curve.steps_per_task = lc.curve.times.back() / static_cast<double>(lc.curve.n_tasks());
        lc.curve.validate();
        out.push_back(std::move(lc));
    }
    return out;
}

struct ReportRow {
    std::string method;
    std::string metric;
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

/**
Cross-method report. Curves are min-max normalized per task over every
loaded curve, then per method: average performance P_K(KT), its deficit
1 - P_K(KT), forgetting, and forward transfer against the baseline method
run with the same seed (measured on the fast learner where one exists).
*/
inline std::vector<ReportRow> compute_report(const std::vector<LoadedCurve>& curves,
                                             const std::string& baseline = "Reset") {
    if (curves.empty()) throw std::invalid_argument("compute_report: no curves");
    std::vector<const LearningCurve*> all;
    for (const auto& c : curves) all.push_back(&c.curve);
    const auto bounds = min_max_bounds(all);
    std::vector<LearningCurve> norm;
    for (const auto& c : curves) norm.push_back(normalize(c.curve, bounds));

    std::map<std::string, std::map<std::string, std::vector<double>>> samples;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const LoadedCurve& c = curves[i];
        if (!samples.count(c.label)) labels.push_back(c.label);
        const double end = static_cast<double>(norm[i].n_tasks()) * norm[i].steps_per_task;
        const double perf = average_performance(norm[i], end).value;
        samples[c.label]["avg_perf"].push_back(perf);
        samples[c.label]["avg_perf_deficit"].push_back(1.0 - perf);
        samples[c.label]["forgetting"].push_back(forgetting(norm[i]).mean);
        if (c.is_fast()) continue;
        std::optional<std::size_t> ft_index;
        std::optional<std::size_t> base_index;
        for (std::size_t j = 0; j < curves.size(); ++j) {
            if (curves[j].run_id == c.run_id && curves[j].label == c.label + ":fast") ft_index = j;
            if (curves[j].label == baseline && curves[j].seed == c.seed) base_index = j;
        }
        if (base_index)
            samples[c.label]["forward_transfer"].push_back(
                forward_transfer(norm[ft_index.value_or(i)], norm[*base_index]).mean);
    }
    std::vector<ReportRow> rows;
    for (const auto& label : labels)
        for (const char* metric : {"avg_perf", "avg_perf_deficit", "forgetting", "forward_transfer"}) {
            const auto it = samples[label].find(metric);
            if (it == samples[label].end()) continue;
            const auto& xs = it->second;
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double var = 0.0;
            for (double x : xs) var += (x - mean) * (x - mean);
            const double se = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size())) : 0.0;
            rows.push_back({label, metric, mean, se, xs.size()});
        }
    return rows;
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "method,metric,value,stderr,n\n";
    for (const auto& r : rows)
        out << r.method << ',' << r.metric << ',' << detail::format_double(r.value) << ','
            << detail::format_double(r.stderr_) << ',' << r.n << '\n';
    return out.str();
}

}  // namespace fame
