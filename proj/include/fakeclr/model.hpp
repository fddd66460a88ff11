#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "fakeclr/autodiff.hpp"
#include "fakeclr/rng.hpp"
#include "fakeclr/tensor.hpp"

namespace fakeclr {

// Trainable tensor plus its persistent gradient buffer and Adam moments.
// Step builders accumulate into grad; the optimizer consumes and clears it.
struct Param {
    Tensor value;
    std::vector<double> grad;
    std::vector<double> m1, m2;

    explicit Param(Tensor v)
        : value(std::move(v)),
          grad(value.size(), 0.0),
          m1(value.size(), 0.0),
          m2(value.size(), 0.0) {}

    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

struct LinearLayer {
    Param W, b;

    // Weights ~ N(0, 1/sqrt(fan_in)) drawn row-major, biases zero.
    LinearLayer(std::size_t in, std::size_t out, Rng& rng)
        : W(Tensor({in, out})), b(Tensor({out})) {
        const double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (std::size_t i = 0; i < W.value.size(); ++i) W.value[i] = s * rng.normal();
    }

    Tensor forward(const Tensor& x) const { return add_rowvec(matmul(x, W.value), b.value); }
};

// Binds persistent parameters into a step graph. Trainable params become
// tape leaves; frozen ones enter as constants, so gradients can never reach
// an out-of-scope network.
struct BoundParams {
    std::vector<std::pair<Param*, ad::Var>> trainable;

    ad::Var bind(Param& p, bool train) {
        if (!train) return ad::constant(p.value);
        ad::Var v = ad::leaf(p.value, true);
        trainable.push_back({&p, v});
        return v;
    }

    void accumulate() {
        for (auto& [p, v] : trainable)
            for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += v->grad[i];
    }
};

struct LinearGraph {
    ad::Var W, b;
    ad::Var operator()(const ad::Var& x) const { return ad::add_rowvec(ad::matmul(x, W), b); }
};

inline LinearGraph bind_layer(LinearLayer& l, BoundParams& bp, bool train) {
    return {bp.bind(l.W, train), bp.bind(l.b, train)};
}

struct NetworkConfig {
    std::size_t d_z = 8;      // latent dim
    std::size_t d_w = 8;      // mapped latent dim
    std::size_t d_h = 32;     // discriminator feature dim
    std::size_t d_proj = 16;  // projection head output dim p
    std::size_t hidden = 64;

    void validate() const {
        if (d_z < 1 || d_w < 1 || d_h < 1 || d_proj < 2 || hidden < 1)
            throw invalid_parameter("network dims must be positive (projection >= 2)");
    }
};

// ---------------------------------------------------------------------------
// Generator: mapping net z -> w (2 layers), synthesis net w -> x in R^2
// (3 layers, tanh hidden units).
// ---------------------------------------------------------------------------

struct GeneratorNet {
    NetworkConfig dims;
    LinearLayer map1, map2, syn1, syn2, syn3;

    GeneratorNet(const NetworkConfig& cfg, Rng& rng)
        : dims(cfg),
          map1(cfg.d_z, cfg.hidden, rng),
          map2(cfg.hidden, cfg.d_w, rng),
          syn1(cfg.d_w, cfg.hidden, rng),
          syn2(cfg.hidden, cfg.hidden, rng),
          syn3(cfg.hidden, 2, rng) {
        cfg.validate();
    }

    std::vector<Param*> params() {
        return {&map1.W, &map1.b, &map2.W, &map2.b,
                &syn1.W, &syn1.b, &syn2.W, &syn2.b, &syn3.W, &syn3.b};
    }
};

struct GeneratorGraph {
    LinearGraph m1, m2, s1, s2, s3;

    ad::Var mapping(const ad::Var& z) const { return m2(ad::tanh_(m1(z))); }
    ad::Var synthesis(const ad::Var& w) const {
        return s3(ad::tanh_(s2(ad::tanh_(s1(w)))));
    }
    std::pair<ad::Var, ad::Var> forward(const ad::Var& z) const {
        ad::Var w = mapping(z);
        return {w, synthesis(w)};
    }
};

inline GeneratorGraph bind(GeneratorNet& g, BoundParams& bp, bool train) {
    return {bind_layer(g.map1, bp, train), bind_layer(g.map2, bp, train),
            bind_layer(g.syn1, bp, train), bind_layer(g.syn2, bp, train),
            bind_layer(g.syn3, bp, train)};
}

// Untaped forward pass; z is [b, d_z], returns (w [b, d_w], x [b, 2]).
inline std::pair<Tensor, Tensor> generator_forward(GeneratorNet& g, const Tensor& z) {
    BoundParams bp;
    GeneratorGraph graph = bind(g, bp, false);
    auto [w, x] = graph.forward(ad::constant(z));
    return {w->value, x->value};
}

inline Tensor generator_synthesis(GeneratorNet& g, const Tensor& w) {
    BoundParams bp;
    GeneratorGraph graph = bind(g, bp, false);
    return graph.synthesis(ad::constant(w))->value;
}

// ---------------------------------------------------------------------------
// Discriminator: shared backbone to a d_h feature, a scalar logit head, and
// two unit-norm projection heads (fake-side and real-side).
// ---------------------------------------------------------------------------

struct DiscriminatorNet {
    NetworkConfig dims;
    LinearLayer back1, back2, back3;
    LinearLayer head_d1, head_d2;
    LinearLayer head_f1, head_f2;
    LinearLayer head_r1, head_r2;

    DiscriminatorNet(const NetworkConfig& cfg, Rng& rng)
        : dims(cfg),
          back1(2, cfg.hidden, rng),
          back2(cfg.hidden, cfg.hidden, rng),
          back3(cfg.hidden, cfg.d_h, rng),
          head_d1(cfg.d_h, cfg.hidden, rng),
          head_d2(cfg.hidden, 1, rng),
          head_f1(cfg.d_h, cfg.hidden, rng),
          head_f2(cfg.hidden, cfg.d_proj, rng),
          head_r1(cfg.d_h, cfg.hidden, rng),
          head_r2(cfg.hidden, cfg.d_proj, rng) {
        cfg.validate();
    }

    std::vector<Param*> params() {
        return {&back1.W,  &back1.b,  &back2.W,  &back2.b,  &back3.W,  &back3.b,
                &head_d1.W, &head_d1.b, &head_d2.W, &head_d2.b,
                &head_f1.W, &head_f1.b, &head_f2.W, &head_f2.b,
                &head_r1.W, &head_r1.b, &head_r2.W, &head_r2.b};
    }

    // The subset mirrored by the momentum encoder, in its parameter order.
    std::vector<Param*> momentum_params() {
        return {&back1.W,  &back1.b,  &back2.W,  &back2.b,  &back3.W, &back3.b,
                &head_f1.W, &head_f1.b, &head_f2.W, &head_f2.b,
                &head_r1.W, &head_r1.b, &head_r2.W, &head_r2.b};
    }
};

struct DiscriminatorGraph {
    LinearGraph b1, b2, b3, hd1, hd2, hf1, hf2, hr1, hr2;

    ad::Var backbone(const ad::Var& x) const {
        return ad::tanh_(b3(ad::tanh_(b2(ad::tanh_(b1(x))))));
    }
    ad::Var logits(const ad::Var& h) const { return hd2(ad::tanh_(hd1(h))); }
    ad::Var embed_fake(const ad::Var& h) const {
        return ad::row_l2_normalize(hf2(ad::tanh_(hf1(h))));
    }
    ad::Var embed_real(const ad::Var& h) const {
        return ad::row_l2_normalize(hr2(ad::tanh_(hr1(h))));
    }
};

inline DiscriminatorGraph bind(DiscriminatorNet& d, BoundParams& bp, bool train) {
    return {bind_layer(d.back1, bp, train),  bind_layer(d.back2, bp, train),
            bind_layer(d.back3, bp, train),  bind_layer(d.head_d1, bp, train),
            bind_layer(d.head_d2, bp, train), bind_layer(d.head_f1, bp, train),
            bind_layer(d.head_f2, bp, train), bind_layer(d.head_r1, bp, train),
            bind_layer(d.head_r2, bp, train)};
}

inline Tensor discriminator_logits(DiscriminatorNet& d, const Tensor& x) {
    BoundParams bp;
    DiscriminatorGraph graph = bind(d, bp, false);
    return graph.logits(graph.backbone(ad::constant(x)))->value;
}

// ---------------------------------------------------------------------------
// Momentum key encoder: EMA copies of the backbone and both projection heads.
// Receives no gradients; parameters move only through momentum_update.
// ---------------------------------------------------------------------------

struct MomentumEncoder {
    LinearLayer back1, back2, back3, head_f1, head_f2, head_r1, head_r2;

    explicit MomentumEncoder(const DiscriminatorNet& live)
        : back1(live.back1), back2(live.back2), back3(live.back3),
          head_f1(live.head_f1), head_f2(live.head_f2),
          head_r1(live.head_r1), head_r2(live.head_r2) {}

    std::vector<Param*> params() {
        return {&back1.W,  &back1.b,  &back2.W,  &back2.b,  &back3.W, &back3.b,
                &head_f1.W, &head_f1.b, &head_f2.W, &head_f2.b,
                &head_r1.W, &head_r1.b, &head_r2.W, &head_r2.b};
    }

    Tensor features(const Tensor& x) const {
        return tanh_map(back3.forward(tanh_map(back2.forward(tanh_map(back1.forward(x))))));
    }
    Tensor embed_fake(const Tensor& x) const {
        return row_l2_normalize_map(head_f2.forward(tanh_map(head_f1.forward(features(x)))));
    }
    Tensor embed_real(const Tensor& x) const {
        return row_l2_normalize_map(head_r2.forward(tanh_map(head_r1.forward(features(x)))));
    }
};

// theta_k <- m * theta_k + (1 - m) * theta_q over every mirrored parameter.
inline void momentum_update(MomentumEncoder& encoder, DiscriminatorNet& live, double m_ema) {
    if (!(m_ema >= 0.0 && m_ema <= 1.0))
        throw invalid_parameter("momentum_update: coefficient outside [0,1]");
    auto ks = encoder.params();
    auto qs = live.momentum_params();
    if (ks.size() != qs.size())
        throw contract_violation("momentum_update: parameter list mismatch");
    for (std::size_t i = 0; i < ks.size(); ++i) {
        Tensor& k = ks[i]->value;
        const Tensor& q = qs[i]->value;
        if (!k.same_shape(q))
            throw contract_violation("momentum_update: parameter shape mismatch");
        for (std::size_t j = 0; j < k.size(); ++j)
            k[j] = m_ema * k[j] + (1.0 - m_ema) * q[j];
    }
}

} // namespace fakeclr
