#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fame/rng.hpp"
#include "fame/tables.hpp"

namespace fame {

/// Fixed-capacity ring of recent transitions. Cleared at every task boundary.
template <typename T>
class FastBuffer {
public:
    explicit FastBuffer(std::size_t capacity = 10000) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("FastBuffer: capacity must be positive");
        items_.reserve(std::min<std::size_t>(capacity_, 4096));
    }

    void push(const T& item) {
        if (items_.size() < capacity_) {
            items_.push_back(item);
        } else {
            items_[head_] = item;
            head_ = (head_ + 1) % capacity_;
        }
    }

    void clear() {
        items_.clear();
        head_ = 0;
    }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }

    /// i-th item in insertion order (0 = oldest retained).
    const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

    const T& sample(Rng& rng) const {
        if (items_.empty()) throw std::logic_error("FastBuffer::sample: empty buffer");
        return items_[rng.uniform_index(items_.size())];
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<T> items_;
};

/// (state, action) record used for Q-value and softmax-KL integration.
struct StateActionRecord {
    std::size_t state = 0;
    std::size_t action = 0;
    bool operator==(const StateActionRecord&) const = default;
};

/// State-grid cell record used for Wasserstein integration.
struct StateRecord {
    std::size_t state = 0;
    bool operator==(const StateRecord&) const = default;
};

/// (cell, continuous action) record used for Gaussian KL integration.
struct ContinuousActionRecord {
    std::size_t state = 0;
    std::vector<double> action;
    bool operator==(const ContinuousActionRecord&) const = default;
};

/**
Persistent store of tail-of-task records, bucketed by task and capped at
`per_task_cap` records per task, so total size never exceeds K * N.
*/
template <typename Record>
class MetaBuffer {
public:
    explicit MetaBuffer(std::size_t per_task_cap = 0) : cap_(per_task_cap) {}

    std::size_t per_task_cap() const { return cap_; }

    /// Appends a record; returns false when the task bucket is full.
    bool add(std::size_t task_id, const Record& record) {
        auto& bucket = buckets_[task_id];
        if (bucket.size() >= cap_) return false;
        bucket.push_back(record);
        return true;
    }

    const std::vector<Record>& records(std::size_t task_id) const {
        static const std::vector<Record> empty;
        const auto it = buckets_.find(task_id);
        return it == buckets_.end() ? empty : it->second;
    }

    std::vector<std::size_t> task_ids() const {
        std::vector<std::size_t> ids;
        for (const auto& [id, bucket] : buckets_)
            if (!bucket.empty()) ids.push_back(id);
        return ids;
    }

    std::size_t size() const {
        std::size_t total = 0;
        for (const auto& [id, bucket] : buckets_) total += bucket.size();
        return total;
    }

    bool empty() const { return size() == 0; }

    const std::map<std::size_t, std::vector<Record>>& buckets() const { return buckets_; }

    bool operator==(const MetaBuffer&) const = default;

private:
    std::size_t cap_;
    std::map<std::size_t, std::vector<Record>> buckets_;
};

/**
Tail-of-task sampling: stores the record iff step t > T - N (t counts from 1).
Returns whether it was stored.
*/
template <typename Record>
bool record_meta(MetaBuffer<Record>& buffer, const Record& record, std::size_t t, std::size_t steps_per_task,
                 std::size_t n_records, std::size_t task_id) {
    if (t == 0 || t > steps_per_task) throw std::out_of_range("record_meta: step outside the task");
    if (n_records > steps_per_task) throw std::invalid_argument("record_meta: N exceeds T");
    if (t + n_records <= steps_per_task) return false;
    return buffer.add(task_id, record);
}

class EmptyTaskBucket : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Empirical (s, a) frequencies of one task's records.
inline VisitationWeights estimate_weights(const MetaBuffer<StateActionRecord>& buffer, std::size_t task_id,
                                          std::size_t n_states, std::size_t n_actions) {
    const auto& records = buffer.records(task_id);
    if (records.empty()) throw EmptyTaskBucket("estimate_weights: no records for task " + std::to_string(task_id));
    VisitationWeights w;
    w.task_id = task_id;
    w.n_actions = n_actions;
    w.state.assign(n_states, 0.0);
    w.state_action.assign(n_states * n_actions, 0.0);
    const double unit = 1.0 / static_cast<double>(records.size());
    for (const auto& r : records) {
        if (r.state >= n_states || r.action >= n_actions) throw std::out_of_range("estimate_weights: record out of range");
        w.state[r.state] += unit;
        w.state_action[r.state * n_actions + r.action] += unit;
    }
    return w;
}

/// Empirical state frequencies of one task's records (any record with a `state` field).
template <typename Record>
VisitationWeights estimate_state_weights(const MetaBuffer<Record>& buffer, std::size_t task_id, std::size_t n_states) {
    const auto& records = buffer.records(task_id);
    if (records.empty()) throw EmptyTaskBucket("estimate_weights: no records for task " + std::to_string(task_id));
    VisitationWeights w;
    w.task_id = task_id;
    w.state.assign(n_states, 0.0);
    const double unit = 1.0 / static_cast<double>(records.size());
    for (const auto& r : records) {
        if (r.state >= n_states) throw std::out_of_range("estimate_weights: record out of range");
        w.state[r.state] += unit;
    }
    return w;
}

/// CSV dump: task_id,state,action[,action_1,...]
inline void write_csv(std::ostream& out, const MetaBuffer<StateActionRecord>& buffer) {
    out << "task_id,state,action\n";
    for (const auto& [id, bucket] : buffer.buckets())
        for (const auto& r : bucket) out << id << ',' << r.state << ',' << r.action << '\n';
}

inline void write_csv(std::ostream& out, const MetaBuffer<StateRecord>& buffer) {
    out << "task_id,state\n";
    for (const auto& [id, bucket] : buffer.buckets())
        for (const auto& r : bucket) out << id << ',' << r.state << '\n';
}

inline void write_csv(std::ostream& out, const MetaBuffer<ContinuousActionRecord>& buffer) {
    std::size_t dim = 0;
    for (const auto& [id, bucket] : buffer.buckets())
        if (!bucket.empty()) dim = bucket.front().action.size();
    out << "task_id,state";
    for (std::size_t d = 0; d < dim; ++d) out << ",action_" << d;
    out << '\n';
    const auto old_precision = out.precision(17);
    for (const auto& [id, bucket] : buffer.buckets())
        for (const auto& r : bucket) {
            out << id << ',' << r.state;
            for (double a : r.action) out << ',' << a;
            out << '\n';
        }
    out.precision(old_precision);
}

}  // namespace fame
