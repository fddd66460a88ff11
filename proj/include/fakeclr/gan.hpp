#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fakeclr/augment.hpp"
#include "fakeclr/contrastive.hpp"
#include "fakeclr/model.hpp"
#include "fakeclr/optimizer.hpp"

namespace fakeclr {

// ---------------------------------------------------------------------------
// Non-saturating logistic GAN losses:
//   L_D = mean softplus(-D(x_real)) + mean softplus(D(G(z)))
//   L_G = mean softplus(-D(G(z)))
// ---------------------------------------------------------------------------

inline std::pair<double, double> adversarial_losses(const Tensor& real_logits,
                                                    const Tensor& fake_logits) {
    if (real_logits.size() == 0 || fake_logits.size() == 0)
        throw invalid_parameter("adversarial_losses: empty logit batch");
    const double d_real = sum_all(softplus_map(scale(real_logits, -1.0))) /
                          static_cast<double>(real_logits.size());
    const double d_fake =
        sum_all(softplus_map(fake_logits)) / static_cast<double>(fake_logits.size());
    const double g_fake = sum_all(softplus_map(scale(fake_logits, -1.0))) /
                          static_cast<double>(fake_logits.size());
    return {d_real + d_fake, g_fake};
}

// ---------------------------------------------------------------------------
// Strategy selection. The variant picks which views are paired and which
// queue feeds the negatives; the flags switch FakeCLR's three additions
// (noise-related perturbation scale, forgetting factor, shrinking queue) so
// they can also be ablated individually on top of instance_perturbation.
// ---------------------------------------------------------------------------

enum class Variant { baseline, instance_real, instance_fake, instance_perturbation, fakeclr };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::instance_real: return "instance_real";
        case Variant::instance_fake: return "instance_fake";
        case Variant::instance_perturbation: return "instance_perturbation";
        case Variant::fakeclr: return "fakeclr";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "baseline") return Variant::baseline;
    if (s == "instance_real") return Variant::instance_real;
    if (s == "instance_fake") return Variant::instance_fake;
    if (s == "instance_perturbation") return Variant::instance_perturbation;
    if (s == "fakeclr") return Variant::fakeclr;
    throw invalid_parameter("unknown strategy variant: " + s);
}

struct StrategyConfig {
    Variant variant = Variant::baseline;
    bool noise_related = false;   // reported; the perturbation mode is authoritative
    bool forgetting = false;      // iteration-weighted InfoNCE on the D side
    bool queue_schedule = false;  // linearly shrinking queue capacity
    double real_in_fake_queue = 0.0;

    static StrategyConfig canonical(Variant v) {
        StrategyConfig s;
        s.variant = v;
        if (v == Variant::fakeclr) s.noise_related = s.forgetting = s.queue_schedule = true;
        return s;
    }

    void validate() const {
        if (!(real_in_fake_queue >= 0.0 && real_in_fake_queue <= 1.0))
            throw invalid_parameter("strategy: real_in_fake_queue outside [0,1]");
        if (variant == Variant::fakeclr && (!forgetting || !queue_schedule))
            throw invalid_parameter(
                "strategy: fakeclr requires forgetting and queue_schedule enabled");
        if (real_in_fake_queue > 0.0 &&
            (variant == Variant::baseline || variant == Variant::instance_real))
            throw invalid_parameter(
                "strategy: real_in_fake_queue needs a fake-queue variant");
    }

    bool uses_contrastive() const { return variant != Variant::baseline; }
    bool uses_real_head() const { return variant == Variant::instance_real; }
    bool uses_perturbation() const {
        return variant == Variant::instance_perturbation || variant == Variant::fakeclr;
    }
};

struct LossWeights {
    double lambda_f = 1.0;  // fake-side contrastive weight in L_D
    double lambda_r = 1.0;  // real-side contrastive weight in L_D
    double lambda_g = 1.0;  // fake-side contrastive weight in L_G

    void validate() const {
        if (!(lambda_f >= 0.0 && lambda_r >= 0.0 && lambda_g >= 0.0))
            throw invalid_parameter("loss weights must be non-negative");
    }
};

struct ContrastiveSettings {
    double tau = 0.07;
    ForgettingConfig forgetting;
    PerturbationConfig perturbation;
    AugmentationConfig augmentation;
    QueueSchedule queue;  // already resolved: decay_rate 0 when scheduling is off
    std::size_t enqueue_batch = 64;
};

struct GanModel {
    GeneratorNet G;
    DiscriminatorNet D;
    MomentumEncoder encoder;

    GanModel(const NetworkConfig& cfg, Rng& rng) : G(cfg, rng), D(cfg, rng), encoder(D) {}
};

// ---------------------------------------------------------------------------
// D-side contrastive graph. Consumes randomness in a fixed order: latent
// perturbation first (perturbation family only), then the query view's
// augmentation, then the key view's. Keys come from the momentum encoder and
// are detached; the returned enqueue rows are the first enqueue_batch keys,
// optionally with a leading block replaced by momentum-embedded real samples.
// ---------------------------------------------------------------------------

struct DContrastiveParts {
    ad::Var loss;         // batch-mean scalar
    Tensor enqueue_keys;  // [m, p]
};

inline DContrastiveParts build_d_contrastive(
    GanModel& model, const DiscriminatorGraph& dg, const NegativeQueue& queue_fake,
    const NegativeQueue& queue_real, const Tensor& latents, const Tensor& reals,
    const StrategyConfig& strat, const ContrastiveSettings& cs, Rng& rng_perturb,
    Rng& rng_augment) {
    Tensor base_q, base_k;
    if (strat.uses_real_head()) {
        base_q = reals;
        base_k = reals;
    } else if (strat.variant == Variant::instance_fake) {
        base_q = generator_forward(model.G, latents).second;
        base_k = base_q;
    } else {
        Tensor z_perturbed = perturb_latent(latents, cs.perturbation, rng_perturb);
        base_q = generator_forward(model.G, latents).second;
        base_k = generator_forward(model.G, z_perturbed).second;
    }
    Tensor view_q = augment_data(base_q, cs.augmentation, rng_augment);
    Tensor view_k = augment_data(base_k, cs.augmentation, rng_augment);

    ad::Var h = dg.backbone(ad::constant(view_q));
    ad::Var q = strat.uses_real_head() ? dg.embed_real(h) : dg.embed_fake(h);
    Tensor k = strat.uses_real_head() ? model.encoder.embed_real(view_k)
                                      : model.encoder.embed_fake(view_k);

    const NegativeQueue& nq = strat.uses_real_head() ? queue_real : queue_fake;
    std::vector<double> m(nq.size(), 0.0);
    if (strat.forgetting && !nq.empty())
        m = forgetting_factors(nq.labels(), cs.forgetting.tau_m,
                               cs.forgetting.use_pseudocode_normalization);
    ad::Var loss = iteration_info_nce_graph(q, ad::constant(k),
                                            ad::constant(nq.embedding_matrix()), m, cs.tau);

    const std::size_t b = k.rows(), p = k.cols();
    const std::size_t n_enq = std::min(cs.enqueue_batch, b);
    Tensor keys({n_enq, p});
    for (std::size_t i = 0; i < n_enq; ++i)
        for (std::size_t j = 0; j < p; ++j) keys.at(i, j) = k.at(i, j);
    if (!strat.uses_real_head() && strat.real_in_fake_queue > 0.0 && n_enq > 0) {
        const std::size_t mixed = std::min(
            n_enq, static_cast<std::size_t>(
                       std::ceil(strat.real_in_fake_queue * static_cast<double>(n_enq))));
        if (mixed > 0) {
            if (reals.rows() < mixed)
                throw contract_violation("real_in_fake_queue: real batch too small");
            Tensor head({mixed, 2});
            for (std::size_t i = 0; i < mixed; ++i)
                for (std::size_t j = 0; j < 2; ++j) head.at(i, j) = reals.at(i, j);
            Tensor real_keys = model.encoder.embed_fake(head);
            for (std::size_t i = 0; i < mixed; ++i)
                for (std::size_t j = 0; j < p; ++j) keys.at(i, j) = real_keys.at(i, j);
        }
    }
    return {loss, std::move(keys)};
}

// Standalone evaluation of the D-side contrastive term. Computes the loss on
// the live discriminator, then enqueues the momentum keys with the given
// iteration label, exactly as one d_step would.
inline double contrastive_term_D(GanModel& model, NegativeQueue& queue_fake,
                                 NegativeQueue& queue_real, const Tensor& latents,
                                 const Tensor& reals, const StrategyConfig& strat,
                                 const ContrastiveSettings& cs, long long iteration,
                                 Rng& rng_perturb, Rng& rng_augment) {
    strat.validate();
    if (!strat.uses_contrastive()) return 0.0;
    BoundParams bp;
    DiscriminatorGraph dg = bind(model.D, bp, false);
    DContrastiveParts parts = build_d_contrastive(model, dg, queue_fake, queue_real, latents,
                                                  reals, strat, cs, rng_perturb, rng_augment);
    NegativeQueue& target = strat.uses_real_head() ? queue_real : queue_fake;
    target.push(parts.enqueue_keys, iteration);
    return parts.loss->value[0];
}

// ---------------------------------------------------------------------------
// Training steps.
// ---------------------------------------------------------------------------

struct StepSettings {
    LossWeights weights;
    ContrastiveSettings contrastive;
    double m_ema = 0.999;
};

struct StepResult {
    double total = 0.0;
    double adversarial = 0.0;
    double contrastive = 0.0;
};

// One discriminator update: adversarial loss plus the strategy's contrastive
// term, a single Adam step on D only, momentum update of the key encoder,
// then the enqueue. When the strategy's weight is zero the contrastive branch
// is skipped entirely, so the perturbation/augmentation streams stay
// untouched and the run is bit-identical to baseline.
inline StepResult d_step(GanModel& model, Adam& opt_d, NegativeQueue& queue_fake,
                         NegativeQueue& queue_real, const Tensor& reals,
                         const Tensor& latents, const StrategyConfig& strat,
                         const StepSettings& s, long long iteration, Rng& rng_perturb,
                         Rng& rng_augment) {
    strat.validate();
    s.weights.validate();
    const double lambda =
        strat.uses_real_head() ? s.weights.lambda_r : s.weights.lambda_f;
    const bool with_contrastive = strat.uses_contrastive() && lambda > 0.0;

    Tensor fakes = generator_forward(model.G, latents).second;
    BoundParams bp;
    DiscriminatorGraph dg = bind(model.D, bp, true);
    ad::Var real_logits = dg.logits(dg.backbone(ad::constant(reals)));
    ad::Var fake_logits = dg.logits(dg.backbone(ad::constant(fakes)));
    ad::Var adv = ad::add(ad::mean(ad::softplus_(ad::scale(real_logits, -1.0))),
                          ad::mean(ad::softplus_(fake_logits)));

    StepResult r;
    ad::Var total = adv;
    DContrastiveParts parts;
    if (with_contrastive) {
        parts = build_d_contrastive(model, dg, queue_fake, queue_real, latents, reals, strat,
                                    s.contrastive, rng_perturb, rng_augment);
        r.contrastive = parts.loss->value[0];
        total = ad::add(adv, ad::scale(parts.loss, lambda));
    }
    r.adversarial = adv->value[0];
    r.total = total->value[0];
    if (!std::isfinite(r.total))
        throw abort_run(iteration, "non-finite discriminator loss");

    ad::backward(total);
    bp.accumulate();
    opt_d.step(model.D.params());
    momentum_update(model.encoder, model.D, s.m_ema);
    if (with_contrastive) {
        NegativeQueue& target = strat.uses_real_head() ? queue_real : queue_fake;
        target.push(parts.enqueue_keys, iteration);
    }
    return r;
}

// G-side contrastive graph: two augmentations of the same generated batch,
// query through the live fake head (weights frozen), key through the momentum
// encoder, negatives from the fake queue with plain InfoNCE weights. Nothing
// is enqueued. Randomness order: query augmentation draw, then key draw.
inline ad::Var build_g_contrastive(GanModel& model, const DiscriminatorGraph& dg,
                                   const ad::Var& x_fake, const NegativeQueue& queue_fake,
                                   const ContrastiveSettings& cs, Rng& rng_augment) {
    ad::Var view_q = x_fake;
    Tensor view_k = x_fake->value;
    if (cs.augmentation.active()) {
        AugmentationDraw draw_q =
            sample_augmentation(x_fake->value.rows(), cs.augmentation, rng_augment);
        view_q = ad::augment_rows(x_fake, draw_q);
        view_k = augment_data(view_k, cs.augmentation, rng_augment);
    }
    ad::Var q = dg.embed_fake(dg.backbone(view_q));
    Tensor k = model.encoder.embed_fake(view_k);
    std::vector<double> m(queue_fake.size(), 0.0);
    return iteration_info_nce_graph(q, ad::constant(k),
                                    ad::constant(queue_fake.embedding_matrix()), m, cs.tau);
}

// Standalone value of the G-side term, for decomposing a g_step's loss.
inline double contrastive_term_G(GanModel& model, const NegativeQueue& queue_fake,
                                 const Tensor& latents, const StrategyConfig& strat,
                                 const ContrastiveSettings& cs, Rng& rng_augment) {
    strat.validate();
    if (!strat.uses_contrastive() || queue_fake.empty()) return 0.0;
    BoundParams bp;
    DiscriminatorGraph dg = bind(model.D, bp, false);
    GeneratorGraph gg = bind(model.G, bp, false);
    ad::Var x = gg.forward(ad::constant(latents)).second;
    return build_g_contrastive(model, dg, x, queue_fake, cs, rng_augment)->value[0];
}

// One generator update: adversarial loss plus the fake-side contrastive term
// against the current queue, one Adam step on G only. The queue is read,
// never written. An empty queue makes the contrastive term exactly zero with
// zero gradient, so the branch is skipped then as well.
inline StepResult g_step(GanModel& model, Adam& opt_g, const NegativeQueue& queue_fake,
                         const Tensor& latents, const StrategyConfig& strat,
                         const StepSettings& s, long long iteration, Rng& rng_augment) {
    strat.validate();
    s.weights.validate();
    const bool with_contrastive = strat.uses_contrastive() &&
                                  s.weights.lambda_g > 0.0 && !queue_fake.empty();

    BoundParams bp;
    GeneratorGraph gg = bind(model.G, bp, true);
    DiscriminatorGraph dg = bind(model.D, bp, false);
    ad::Var x = gg.forward(ad::constant(latents)).second;
    ad::Var fake_logits = dg.logits(dg.backbone(x));
    ad::Var adv = ad::mean(ad::softplus_(ad::scale(fake_logits, -1.0)));

    StepResult r;
    ad::Var total = adv;
    if (with_contrastive) {
        ad::Var closs = build_g_contrastive(model, dg, x, queue_fake, s.contrastive,
                                            rng_augment);
        r.contrastive = closs->value[0];
        total = ad::add(adv, ad::scale(closs, s.weights.lambda_g));
    }
    r.adversarial = adv->value[0];
    r.total = total->value[0];
    if (!std::isfinite(r.total))
        throw abort_run(iteration, "non-finite generator loss");

    ad::backward(total);
    bp.accumulate();
    opt_g.step(model.G.params());
    return r;
}

} // namespace fakeclr
