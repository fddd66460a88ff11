#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "fakeclr/autodiff.hpp"
#include "fakeclr/tensor.hpp"

namespace fakeclr {

// ---------------------------------------------------------------------------
// InfoNCE and its iteration-weighted variant.
//
// The iteration-weighted loss adds a per-negative logit offset m_i before the
// temperature scaling:
//   loss = -log exp(q.k+ / tau) / (exp(q.k+ / tau) + sum_i exp((q.k-_i + m_i) / tau))
// With every m_i = 0 this reduces exactly to plain InfoNCE.
// ---------------------------------------------------------------------------

struct WeightedNegative {
    std::vector<double> embedding;
    double weight = 0.0;  // m_i
};

inline void check_unit(const std::vector<double>& v, const char* what) {
    if (std::abs(norm2(v) - 1.0) > 1e-6)
        throw contract_violation(std::string(what) + ": embedding is not unit-norm");
}

inline double iteration_info_nce(const std::vector<double>& q,
                                 const std::vector<double>& k_pos,
                                 const std::vector<WeightedNegative>& negatives,
                                 double tau) {
    if (tau <= 0.0)
        throw invalid_parameter("iteration_info_nce: temperature must be positive");
    check_unit(q, "iteration_info_nce query");
    check_unit(k_pos, "iteration_info_nce key");
    const double pos = dot(q, k_pos) / tau;
    double mx = pos;
    std::vector<double> logits;
    logits.reserve(negatives.size() + 1);
    logits.push_back(pos);
    for (const auto& n : negatives) {
        if (n.embedding.size() != q.size())
            throw contract_violation("iteration_info_nce: dimension mismatch");
        check_unit(n.embedding, "iteration_info_nce negative");
        if (!std::isfinite(n.weight))
            throw contract_violation("iteration_info_nce: non-finite weight");
        const double a = (dot(q, n.embedding) + n.weight) / tau;
        logits.push_back(a);
        mx = std::max(mx, a);
    }
    double s = 0.0;
    for (double a : logits) s += std::exp(a - mx);
    return mx + std::log(s) - pos;  // log-sum-exp minus the positive logit
}

inline double info_nce(const std::vector<double>& q,
                       const std::vector<double>& k_pos,
                       const std::vector<std::vector<double>>& negatives,
                       double tau) {
    std::vector<WeightedNegative> entries;
    entries.reserve(negatives.size());
    for (const auto& n : negatives) entries.push_back({n, 0.0});
    return iteration_info_nce(q, k_pos, entries, tau);
}

// Closed-form gradients of the iteration-weighted InfoNCE. With
// Y = exp(q.k+/tau) + sum_i exp((q.k-_i + m_i)/tau) and E_i the i-th negative
// term, the gradients are
//   d/dq   = sum_i E_i (k-_i - k+) / (Y tau)
//   d/dk+  = -(sum_i E_i) q / (Y tau)
//   d/dk-_i =  E_i q / (Y tau)
// Evaluated through softmax ratios E_i / Y so large logits cannot overflow.
struct InfoNceGradients {
    std::vector<double> query;
    std::vector<double> key;
    std::vector<std::vector<double>> negatives;
};

inline InfoNceGradients iteration_info_nce_grads(const std::vector<double>& q,
                                                 const std::vector<double>& k_pos,
                                                 const std::vector<WeightedNegative>& negatives,
                                                 double tau) {
    if (tau <= 0.0)
        throw invalid_parameter("iteration_info_nce_grads: temperature must be positive");
    check_unit(q, "iteration_info_nce_grads query");
    check_unit(k_pos, "iteration_info_nce_grads key");
    const std::size_t p = q.size(), n = negatives.size();

    std::vector<double> logits(n + 1);
    logits[0] = dot(q, k_pos) / tau;
    double mx = logits[0];
    for (std::size_t i = 0; i < n; ++i) {
        check_unit(negatives[i].embedding, "iteration_info_nce_grads negative");
        logits[i + 1] = (dot(q, negatives[i].embedding) + negatives[i].weight) / tau;
        mx = std::max(mx, logits[i + 1]);
    }
    double denom = 0.0;
    for (double a : logits) denom += std::exp(a - mx);

    InfoNceGradients g;
    g.query.assign(p, 0.0);
    g.key.assign(p, 0.0);
    g.negatives.assign(n, std::vector<double>(p, 0.0));
    double neg_mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ratio = std::exp(logits[i + 1] - mx) / denom;  // E_i / Y
        neg_mass += ratio;
        for (std::size_t j = 0; j < p; ++j) {
            g.query[j] += ratio * (negatives[i].embedding[j] - k_pos[j]) / tau;
            g.negatives[i][j] = ratio * q[j] / tau;
        }
    }
    for (std::size_t j = 0; j < p; ++j) g.key[j] = -neg_mass * q[j] / tau;
    return g;
}

// Batched tape route used by training. queries/keys are [B,p] with unit rows,
// negatives [N,p]; m has one offset per negative. Returns the batch mean.
inline ad::Var iteration_info_nce_graph(const ad::Var& queries, const ad::Var& keys,
                                        const ad::Var& negatives,
                                        const std::vector<double>& m, double tau) {
    if (tau <= 0.0)
        throw invalid_parameter("iteration_info_nce_graph: temperature must be positive");
    const std::size_t batch = queries->value.rows();
    ad::Var pos = ad::rows_dot(queries, keys);
    ad::Var logits = ad::reshape(pos, {batch, 1});
    if (negatives->value.rows() > 0) {
        if (m.size() != negatives->value.rows())
            throw contract_violation("iteration_info_nce_graph: weight count mismatch");
        ad::Var neg = ad::matmul_nt(queries, negatives);
        neg = ad::add_rowvec(neg, ad::constant(Tensor({m.size()}, m)));
        logits = ad::concat_cols(logits, neg);
    }
    ad::Var per_query = ad::sub(ad::logsumexp_rows(ad::scale(logits, 1.0 / tau)),
                                ad::scale(pos, 1.0 / tau));
    return ad::mean(per_query);
}

// ---------------------------------------------------------------------------
// Forgetting factor: softmax over min-max normalized iteration labels.
// Newest entries get the largest weight; tau_m sharpens or flattens the
// distribution. When all labels coincide the normalized labels are defined
// as all-zero, giving uniform weights.
// ---------------------------------------------------------------------------

struct ForgettingConfig {
    double tau_m = 0.01;
    bool enabled = true;
    // Reproduces the pseudocode variant that L2-normalizes the scaled labels
    // before the softmax; the formal definition omits that step.
    bool use_pseudocode_normalization = false;
};

inline std::vector<double> forgetting_factors(const std::vector<long long>& labels,
                                              double tau_m,
                                              bool use_pseudocode_normalization = false) {
    if (labels.empty())
        throw invalid_parameter("forgetting_factors: empty label list");
    if (tau_m <= 0.0)
        throw invalid_parameter("forgetting_factors: temperature must be positive");
    long long lo = labels[0], hi = labels[0];
    for (long long t : labels) {
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    std::vector<double> scaled(labels.size(), 0.0);
    if (hi > lo) {
        const double span = static_cast<double>(hi - lo);
        for (std::size_t i = 0; i < labels.size(); ++i)
            scaled[i] = static_cast<double>(labels[i] - lo) / span;
    }
    if (use_pseudocode_normalization) {
        const double n = norm2(scaled);
        if (n > 0.0)
            for (double& x : scaled) x /= n;
    }
    return softmax(scaled, tau_m);
}

// ---------------------------------------------------------------------------
// Negative queue with a linearly shrinking capacity.
// ---------------------------------------------------------------------------

struct QueueSchedule {
    std::size_t initial_capacity = 1000;  // N0
    double decay_rate = 0.0;              // r, entries per iteration
    std::size_t min_capacity = 64;        // floor
};

inline std::size_t queue_target_size(long long t, const QueueSchedule& s) {
    if (s.min_capacity < 1 || s.min_capacity > s.initial_capacity)
        throw invalid_parameter("queue_target_size: min capacity outside [1, N0]");
    if (s.decay_rate < 0.0)
        throw invalid_parameter("queue_target_size: negative decay rate");
    if (t < 0)
        throw invalid_parameter("queue_target_size: negative iteration");
    const double raw = static_cast<double>(s.initial_capacity) - s.decay_rate * static_cast<double>(t);
    const long long rounded = std::llround(std::max(raw, 0.0));
    const long long lo = static_cast<long long>(s.min_capacity);
    const long long hi = static_cast<long long>(s.initial_capacity);
    return static_cast<std::size_t>(std::clamp(rounded, lo, hi));
}

struct QueueEntry {
    std::vector<double> embedding;  // unit norm
    long long iteration_label = 0;
};

// FIFO ring of momentum-encoded embeddings, each tagged with the iteration
// that produced it. Stored embeddings never carry gradients.
class NegativeQueue {
public:
    explicit NegativeQueue(QueueSchedule schedule = {}) : schedule_(schedule) {
        queue_target_size(0, schedule_);  // validates the schedule
    }

    // Append one batch of keys (rows of [b,p]) labelled with the current
    // iteration, then evict from the front down to the live target capacity.
    void push(const Tensor& keys, long long iteration) {
        if (iteration < 0 || (!entries_.empty() && iteration < entries_.back().iteration_label))
            throw contract_violation("queue push: iteration label regression");
        const std::size_t b = keys.rows(), p = keys.cols();
        for (std::size_t i = 0; i < b; ++i) {
            std::vector<double> e(p);
            for (std::size_t j = 0; j < p; ++j) e[j] = keys.at(i, j);
            if (std::abs(norm2(e) - 1.0) > 1e-9)
                throw contract_violation("queue push: key is not unit-norm");
            entries_.push_back({std::move(e), iteration});
        }
        const std::size_t cap = queue_target_size(iteration, schedule_);
        while (entries_.size() > cap) entries_.pop_front();
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::deque<QueueEntry>& entries() const { return entries_; }
    const QueueSchedule& schedule() const { return schedule_; }

    std::vector<long long> labels() const {
        std::vector<long long> out;
        out.reserve(entries_.size());
        for (const auto& e : entries_) out.push_back(e.iteration_label);
        return out;
    }

    // Snapshot of all embeddings as an [N,p] matrix, oldest first.
    Tensor embedding_matrix() const {
        if (entries_.empty()) return Tensor({0, 0});
        const std::size_t p = entries_[0].embedding.size();
        Tensor out({entries_.size(), p});
        for (std::size_t i = 0; i < entries_.size(); ++i)
            for (std::size_t j = 0; j < p; ++j) out.at(i, j) = entries_[i].embedding[j];
        return out;
    }

private:
    std::deque<QueueEntry> entries_;
    QueueSchedule schedule_;
};

inline void queue_push(NegativeQueue& queue, const Tensor& keys, long long iteration) {
    queue.push(keys, iteration);
}

} // namespace fakeclr
