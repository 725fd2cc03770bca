#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "fame/buffers.hpp"
#include "fame/gaussian_learner.hpp"
#include "fame/meta_learner.hpp"
#include "fame/metrics.hpp"
#include "fame/tables.hpp"

// JSON round-trips for learner state, used by checkpoints. Doubles are
// written in shortest round-trip form, so reloads are bit-exact.

namespace fame {

inline void to_json(nlohmann::json& j, const QTable& q) {
    j = {{"n_states", q.n_states}, {"n_actions", q.n_actions}, {"temperature", q.temperature}, {"values", q.values}};
}

inline void from_json(const nlohmann::json& j, QTable& q) {
    q.n_states = j.at("n_states").get<std::size_t>();
    q.n_actions = j.at("n_actions").get<std::size_t>();
    q.temperature = j.at("temperature").get<double>();
    q.values = j.at("values").get<std::vector<double>>();
    if (q.values.size() != q.n_states * q.n_actions) throw std::invalid_argument("QTable json: size mismatch");
}

inline void to_json(nlohmann::json& j, const CategoricalPolicyTable& pi) {
    j = {{"n_states", pi.n_states}, {"n_actions", pi.n_actions}, {"probs", pi.probs}};
}

inline void from_json(const nlohmann::json& j, CategoricalPolicyTable& pi) {
    pi.n_states = j.at("n_states").get<std::size_t>();
    pi.n_actions = j.at("n_actions").get<std::size_t>();
    pi.probs = j.at("probs").get<std::vector<double>>();
    pi.validate();
}

inline void to_json(nlohmann::json& j, const GaussianPolicyTable& pi) {
    j = {{"n_cells", pi.n_cells}, {"action_dim", pi.action_dim}, {"mean", pi.mean}, {"std", pi.std}};
}

inline void from_json(const nlohmann::json& j, GaussianPolicyTable& pi) {
    pi.n_cells = j.at("n_cells").get<std::size_t>();
    pi.action_dim = j.at("action_dim").get<std::size_t>();
    pi.mean = j.at("mean").get<std::vector<double>>();
    pi.std = j.at("std").get<std::vector<double>>();
    if (pi.mean.size() != pi.n_cells * pi.action_dim || pi.std.size() != pi.mean.size())
        throw std::invalid_argument("GaussianPolicyTable json: size mismatch");
}

inline void to_json(nlohmann::json& j, const GaussianLearner& l) { j = {{"policy", l.policy}, {"baseline", l.baseline}}; }

inline void from_json(const nlohmann::json& j, GaussianLearner& l) {
    l.policy = j.at("policy").get<GaussianPolicyTable>();
    l.baseline = j.at("baseline").get<std::vector<double>>();
}

inline void to_json(nlohmann::json& j, const QMetaState& m) {
    j = {{"q", m.q}, {"cumulative_weight", m.cumulative_weight}, {"tasks_integrated", m.tasks_integrated}};
}

inline void from_json(const nlohmann::json& j, QMetaState& m) {
    m.q = j.at("q").get<QTable>();
    m.cumulative_weight = j.at("cumulative_weight").get<std::vector<double>>();
    m.tasks_integrated = j.at("tasks_integrated").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const CategoricalMetaState& m) {
    j = {{"policy", m.policy}, {"cumulative_weight", m.cumulative_weight}, {"tasks_integrated", m.tasks_integrated}};
}

inline void from_json(const nlohmann::json& j, CategoricalMetaState& m) {
    m.policy = j.at("policy").get<CategoricalPolicyTable>();
    m.cumulative_weight = j.at("cumulative_weight").get<std::vector<double>>();
    m.tasks_integrated = j.at("tasks_integrated").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const GaussianMetaState& m) {
    j = {{"policy", m.policy}, {"cumulative_weight", m.cumulative_weight}, {"tasks_integrated", m.tasks_integrated}};
}

inline void from_json(const nlohmann::json& j, GaussianMetaState& m) {
    m.policy = j.at("policy").get<GaussianPolicyTable>();
    m.cumulative_weight = j.at("cumulative_weight").get<std::vector<double>>();
    m.tasks_integrated = j.at("tasks_integrated").get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const StateActionRecord& r) { j = {r.state, r.action}; }
inline void from_json(const nlohmann::json& j, StateActionRecord& r) {
    r.state = j.at(0).get<std::size_t>();
    r.action = j.at(1).get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const StateRecord& r) { j = r.state; }
inline void from_json(const nlohmann::json& j, StateRecord& r) { r.state = j.get<std::size_t>(); }

inline void to_json(nlohmann::json& j, const ContinuousActionRecord& r) { j = {{"state", r.state}, {"action", r.action}}; }
inline void from_json(const nlohmann::json& j, ContinuousActionRecord& r) {
    r.state = j.at("state").get<std::size_t>();
    r.action = j.at("action").get<std::vector<double>>();
}

template <typename Record>
nlohmann::json buffer_to_json(const MetaBuffer<Record>& buffer) {
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& [id, records] : buffer.buckets()) buckets.push_back({{"task_id", id}, {"records", records}});
    return {{"per_task_cap", buffer.per_task_cap()}, {"buckets", buckets}};
}

template <typename Record>
MetaBuffer<Record> buffer_from_json(const nlohmann::json& j) {
    MetaBuffer<Record> buffer(j.at("per_task_cap").get<std::size_t>());
    for (const auto& bucket : j.at("buckets")) {
        const std::size_t id = bucket.at("task_id").get<std::size_t>();
        for (const auto& r : bucket.at("records"))
            if (!buffer.add(id, r.get<Record>())) throw std::invalid_argument("meta buffer json: bucket exceeds its cap");
    }
    return buffer;
}

inline void to_json(nlohmann::json& j, const LearningCurve& c) {
    j = {{"times", c.times}, {"values", c.values}, {"steps_per_task", c.steps_per_task}};
}

inline void from_json(const nlohmann::json& j, LearningCurve& c) {
    c.times = j.at("times").get<std::vector<double>>();
    c.values = j.at("values").get<std::vector<std::vector<double>>>();
    c.steps_per_task = j.at("steps_per_task").get<double>();
}

}  // namespace fame
