#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "fakeclr/contrastive.hpp"
#include "fakeclr/gan.hpp"
#include "fakeclr/metrics.hpp"
#include "fakeclr/rng.hpp"

namespace fakeclr {

namespace selftest_detail {

inline std::vector<double> unit_vector(std::size_t p, Rng& rng) {
    std::vector<double> v(p);
    for (double& x : v) x = rng.normal();
    return l2_normalize(v);
}

struct NceInstance {
    std::vector<double> q, k;
    std::vector<std::vector<double>> negs;
    std::vector<double> m;
    double tau = 0.07;
};

inline NceInstance random_instance(Rng& rng, std::size_t max_n = 64,
                                   std::size_t max_p = 16) {
    NceInstance in;
    const std::size_t p = 2 + rng.index(max_p - 1);
    const std::size_t n = rng.index(max_n + 1);
    in.q = unit_vector(p, rng);
    in.k = unit_vector(p, rng);
    for (std::size_t i = 0; i < n; ++i) in.negs.push_back(unit_vector(p, rng));
    in.m.resize(n);
    for (double& mv : in.m) mv = rng.uniform();
    in.tau = 0.05 + 0.95 * rng.uniform();
    return in;
}

// Taped single-instance loss with every input bound as a leaf; callers read
// gradients straight off the leaves after backward().
struct TapedNce {
    ad::Var q, k, negs, loss;
};

inline TapedNce taped_loss(const NceInstance& in) {
    const std::size_t p = in.q.size(), n = in.negs.size();
    TapedNce t;
    t.q = ad::leaf(Tensor({1, p}, in.q));
    t.k = ad::leaf(Tensor({1, p}, in.k));
    Tensor negs({n, p});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) negs.at(i, j) = in.negs[i][j];
    t.negs = ad::leaf(negs);
    t.loss = iteration_info_nce_graph(t.q, t.k, t.negs, in.m, in.tau);
    return t;
}

inline double graph_loss_value(const NceInstance& in) {
    const std::size_t p = in.q.size(), n = in.negs.size();
    Tensor negs({n, p});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) negs.at(i, j) = in.negs[i][j];
    return iteration_info_nce_graph(ad::constant(Tensor({1, p}, in.q)),
                                    ad::constant(Tensor({1, p}, in.k)),
                                    ad::constant(negs), in.m, in.tau)
        ->value[0];
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::abs(b));
}

// Central finite differences of the unguarded graph loss in every input
// coordinate. h = 1e-5 keeps truncation and cancellation error both below
// the 1e-4 acceptance band.
inline double fd_max_rel_err(NceInstance in, const std::vector<double>& gq,
                             const std::vector<double>& gk,
                             const std::vector<std::vector<double>>& gn,
                             double h = 1e-5) {
    double worst = 0.0;
    auto probe = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + h;
        const double up = graph_loss_value(in);
        slot = keep - h;
        const double dn = graph_loss_value(in);
        slot = keep;
        worst = std::max(worst, rel_err(analytic, (up - dn) / (2.0 * h)));
    };
    for (std::size_t j = 0; j < in.q.size(); ++j) probe(in.q[j], gq[j]);
    for (std::size_t j = 0; j < in.k.size(); ++j) probe(in.k[j], gk[j]);
    for (std::size_t i = 0; i < in.negs.size(); ++i)
        for (std::size_t j = 0; j < in.negs[i].size(); ++j) probe(in.negs[i][j], gn[i][j]);
    return worst;
}

} // namespace selftest_detail

struct SelfTestCheck {
    std::string name;
    bool passed = true;
    std::string detail;
};

// The quick oracle suite behind `fakeclr selftest`: closed-form gradients vs
// the tape vs finite differences, exact loss values, queue-replay against a
// naive model, Fréchet and RNG spot checks.
inline std::vector<SelfTestCheck> run_selftest_checks(std::size_t n_grad_instances = 100) {
    using namespace selftest_detail;
    std::vector<SelfTestCheck> checks;
    auto fail = [&](SelfTestCheck& c, const std::string& msg) {
        c.passed = false;
        c.detail = msg;
    };

    {
        SelfTestCheck c;
        c.name = "infonce-gradients";
        Rng rng(2024);
        double worst_closed = 0.0, worst_fd = 0.0;
        for (std::size_t it = 0; it < n_grad_instances && c.passed; ++it) {
            NceInstance in = random_instance(rng);
            std::vector<WeightedNegative> wn(in.negs.size());
            for (std::size_t i = 0; i < in.negs.size(); ++i) wn[i] = {in.negs[i], in.m[i]};
            InfoNceGradients g = iteration_info_nce_grads(in.q, in.k, wn, in.tau);
            TapedNce t = taped_loss(in);
            ad::backward(t.loss);
            for (std::size_t j = 0; j < in.q.size(); ++j) {
                worst_closed = std::max(worst_closed, rel_err(t.q->grad[j], g.query[j]));
                worst_closed = std::max(worst_closed, rel_err(t.k->grad[j], g.key[j]));
            }
            for (std::size_t i = 0; i < in.negs.size(); ++i)
                for (std::size_t j = 0; j < in.q.size(); ++j)
                    worst_closed = std::max(
                        worst_closed,
                        rel_err(t.negs->grad[i * in.q.size() + j], g.negatives[i][j]));
            worst_fd = std::max(worst_fd, fd_max_rel_err(in, g.query, g.key, g.negatives));
            if (worst_closed > 1e-10)
                fail(c, "tape vs closed form diverged: " + std::to_string(worst_closed));
            else if (worst_fd > 1e-4)
                fail(c, "finite differences diverged: " + std::to_string(worst_fd));
        }
        if (c.passed)
            c.detail = "max closed-form err " + std::to_string(worst_closed) +
                       ", max fd err " + std::to_string(worst_fd);
        checks.push_back(c);
    }

    {
        SelfTestCheck c;
        c.name = "infonce-uniform-similarity";
        for (std::size_t n = 1; n <= 100 && c.passed; ++n) {
            std::vector<double> q{1.0, 0.0}, k{1.0, 0.0};
            std::vector<std::vector<double>> negs(n, k);
            const double loss = info_nce(q, k, negs, 0.07);
            if (std::abs(loss - std::log(static_cast<double>(n) + 1.0)) > 1e-12)
                fail(c, "ln(N+1) identity broke at N=" + std::to_string(n));
        }
        checks.push_back(c);
    }

    {
        SelfTestCheck c;
        c.name = "adversarial-zero-logits";
        Tensor zeros({4, 1});
        auto [ld, lg] = adversarial_losses(zeros, zeros);
        if (std::abs(ld - 2.0 * std::log(2.0)) > 1e-12 ||
            std::abs(lg - std::log(2.0)) > 1e-12)
            fail(c, "zero-logit losses off ln 2 values");
        checks.push_back(c);
    }

    {
        SelfTestCheck c;
        c.name = "queue-replay";
        Rng rng(7);
        for (int rep = 0; rep < 100 && c.passed; ++rep) {
            QueueSchedule s;
            s.initial_capacity = 1 + rng.index(32);
            s.min_capacity = 1 + rng.index(s.initial_capacity);
            s.decay_rate = rng.uniform() * 2.0;
            NegativeQueue queue(s);
            std::vector<std::pair<std::vector<double>, long long>> naive;
            for (long long t = 0; t < 40 && c.passed; ++t) {
                const std::size_t b = 1 + rng.index(4);
                Tensor keys({b, 3});
                for (std::size_t i = 0; i < b; ++i) {
                    const auto v = unit_vector(3, rng);
                    for (std::size_t j = 0; j < 3; ++j) keys.at(i, j) = v[j];
                    naive.emplace_back(v, t);
                }
                queue.push(keys, t);
                const std::size_t cap = queue_target_size(t, s);
                while (naive.size() > cap) naive.erase(naive.begin());
                if (queue.size() != naive.size()) {
                    fail(c, "size mismatch");
                    break;
                }
                const auto& entries = queue.entries();
                for (std::size_t i = 0; i < naive.size(); ++i) {
                    if (entries[i].iteration_label != naive[i].second ||
                        entries[i].embedding != naive[i].first) {
                        fail(c, "content mismatch");
                        break;
                    }
                }
            }
        }
        checks.push_back(c);
    }

    {
        SelfTestCheck c;
        c.name = "frechet-shared-covariance";
        GaussianSummary a, b;
        a.cov = {4.0, 0.0, 0.0, 9.0};
        b.cov = a.cov;
        b.mu = {3.0, 4.0};
        if (frechet_distance(a, b) != 25.0)
            fail(c, "shared-covariance distance is not exactly 25");
        GaussianSummary same = a;
        if (frechet_distance(a, same) != 0.0) fail(c, "identical summaries not at 0");
        checks.push_back(c);
    }

    {
        SelfTestCheck c;
        c.name = "rng-determinism";
        Rng a = Rng::derive(42, 3), b = Rng::derive(42, 3);
        for (int i = 0; i < 1000 && c.passed; ++i)
            if (a.next_u64() != b.next_u64()) fail(c, "derived streams diverged");
        checks.push_back(c);
    }

    return checks;
}

inline bool run_selftest(std::ostream& out) {
    bool all = true;
    for (const SelfTestCheck& c : run_selftest_checks()) {
        out << (c.passed ? "ok   " : "FAIL ") << c.name;
        if (!c.detail.empty()) out << "  (" << c.detail << ")";
        out << "\n";
        all = all && c.passed;
    }
    out << (all ? "selftest passed\n" : "selftest FAILED\n");
    return all;
}

} // namespace fakeclr
