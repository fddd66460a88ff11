#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "fakeclr/config.hpp"
#include "fakeclr/gan.hpp"
#include "fakeclr/metrics.hpp"

namespace fakeclr {

// Named RNG stream ids derived from the run seed. Each consumer owns a
// stream, so a branch that is skipped (e.g. zero-weight contrastive) leaves
// every other stream's sequence untouched.
namespace stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t data = 2;
inline constexpr std::uint64_t latents_d = 3;
inline constexpr std::uint64_t latents_g = 4;
inline constexpr std::uint64_t perturb = 5;
inline constexpr std::uint64_t augment_d = 6;
inline constexpr std::uint64_t augment_g = 7;
// Evaluation at iteration t draws from derived streams eval_base + 8t + k so
// a metric's draws never depend on how many draws another metric made.
inline constexpr std::uint64_t eval_base = 0x10000;
} // namespace stream

struct MetricsRow {
    long long iteration = 0;
    double loss_d = 0.0;
    double loss_g = 0.0;
    double contrastive = 0.0;
    std::size_t queue_size = 0;
    double toy_fid = 0.0;
    double toy_kid = 0.0;
    double ppl_z_mean = 0.0;
    double ppl_w_mean = 0.0;
    double ppl_w_std = 0.0;
    double nn_min_dist = 0.0;

    void validate() const {
        const double vals[] = {loss_d,     loss_g,     contrastive, toy_fid,
                               toy_kid,    ppl_z_mean, ppl_w_mean,  ppl_w_std,
                               nn_min_dist};
        for (double v : vals)
            if (!std::isfinite(v)) throw evaluation_error("metrics row has a non-finite value");
    }
};

inline Tensor sample_latents(std::size_t n, std::size_t d_z, Rng& rng) {
    Tensor z({n, d_z});
    for (double& v : z.values()) v = rng.normal();
    return z;
}

inline Tensor sample_rows(const Tensor& data, std::size_t n, Rng& rng) {
    Tensor out({n, data.cols()});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = rng.index(data.rows());
        for (std::size_t j = 0; j < data.cols(); ++j) out.at(i, j) = data.at(r, j);
    }
    return out;
}

// One full metrics row for the current model state. Pure given the seed and
// iteration label; the queues are read, never written.
inline MetricsRow evaluate_model(GanModel& model, const NegativeQueue& queue_fake,
                                 const NegativeQueue& queue_real, const Tensor& train_set,
                                 const GaussianSummary& pool_summary, const Tensor& pool,
                                 const ExperimentConfig& cfg, long long iteration) {
    const std::uint64_t base = stream::eval_base + 8ULL * static_cast<std::uint64_t>(iteration);
    MetricsRow row;
    row.iteration = iteration;

    // Generated sample pool shared by toy-FID, toy-KID, and the NN scan.
    Rng rng_gen = Rng::derive(cfg.seed, base + 0);
    Tensor z_big = sample_latents(cfg.eval.fid_samples, cfg.network.d_z, rng_gen);
    Tensor x_big = generator_forward(model.G, z_big).second;
    row.toy_fid = frechet_distance(summarize(x_big), pool_summary);

    const std::size_t n_kid = std::min<std::size_t>(cfg.eval.kid_samples, x_big.rows());
    Tensor x_kid({n_kid, 2});
    for (std::size_t i = 0; i < n_kid; ++i)
        for (std::size_t j = 0; j < 2; ++j) x_kid.at(i, j) = x_big.at(i, j);
    Rng rng_kid = Rng::derive(cfg.seed, base + 1);
    Tensor y_kid = sample_rows(pool, n_kid, rng_kid);
    row.toy_kid = mmd_poly(x_kid, y_kid);

    Rng rng_pplz = Rng::derive(cfg.seed, base + 2);
    row.ppl_z_mean = path_length(model.G, PathSpace::z, cfg.eval.ppl_paths, cfg.eval.ppl_eps,
                                 rng_pplz)
                         .mean;
    Rng rng_pplw = Rng::derive(cfg.seed, base + 3);
    PathLengthStats pw =
        path_length(model.G, PathSpace::w, cfg.eval.ppl_paths, cfg.eval.ppl_eps, rng_pplw);
    row.ppl_w_mean = pw.mean;
    row.ppl_w_std = pw.stddev;

    const std::size_t n_nn = std::min<std::size_t>(cfg.eval.nn_samples, x_big.rows());
    Tensor x_nn({n_nn, 2});
    for (std::size_t i = 0; i < n_nn; ++i)
        for (std::size_t j = 0; j < 2; ++j) x_nn.at(i, j) = x_big.at(i, j);
    row.nn_min_dist =
        nearest_neighbor_report(x_nn, train_set, 1, cfg.eval.nn_delta).min_distance;

    // Losses on a held-out probe batch.
    Rng rng_batch = Rng::derive(cfg.seed, base + 4);
    Tensor reals = sample_rows(train_set, cfg.train_batch, rng_batch);
    Tensor z_probe = sample_latents(cfg.train_batch, cfg.network.d_z, rng_batch);
    Tensor fakes = generator_forward(model.G, z_probe).second;
    Tensor real_logits = discriminator_logits(model.D, reals);
    Tensor fake_logits = discriminator_logits(model.D, fakes);
    std::tie(row.loss_d, row.loss_g) = adversarial_losses(real_logits, fake_logits);

    if (cfg.strategy.uses_contrastive()) {
        Rng rng_perturb = Rng::derive(cfg.seed, base + 5);
        Rng rng_augment = Rng::derive(cfg.seed, base + 6);
        BoundParams bp;
        DiscriminatorGraph dg = bind(model.D, bp, false);
        DContrastiveParts parts =
            build_d_contrastive(model, dg, queue_fake, queue_real, z_probe, reals,
                                cfg.strategy, cfg.contrastive_settings(), rng_perturb,
                                rng_augment);
        row.contrastive = parts.loss->value[0];
        row.queue_size =
            cfg.strategy.uses_real_head() ? queue_real.size() : queue_fake.size();
    }

    row.validate();
    return row;
}

struct TrainResult {
    GanModel model;
    NegativeQueue queue_fake;
    NegativeQueue queue_real;
    std::vector<MetricsRow> rows;
    long long iterations_done = 0;
};

// Full training loop: alternating d_step / g_step with an evaluation row at
// iteration 0, every eval_interval iterations, and at the end. on_row (when
// given) sees each row as soon as it is computed, so callers can stream the
// log even if a later step aborts.
inline TrainResult train(const ExperimentConfig& cfg,
                         const std::function<void(const MetricsRow&)>& on_row = {}) {
    cfg.validate();
    const Tensor train_set = make_dataset(cfg.dataset.kind, cfg.dataset.n_samples,
                                          cfg.dataset.seed);
    const Tensor& pool = dataset_pool(cfg.dataset.kind);
    const GaussianSummary pool_summary = summarize(pool);

    Rng rng_init = Rng::derive(cfg.seed, stream::init);
    TrainResult out{GanModel(cfg.network, rng_init), NegativeQueue(cfg.queue),
                    NegativeQueue(cfg.queue), {}, 0};

    Rng rng_data = Rng::derive(cfg.seed, stream::data);
    Rng rng_latents_d = Rng::derive(cfg.seed, stream::latents_d);
    Rng rng_latents_g = Rng::derive(cfg.seed, stream::latents_g);
    Rng rng_perturb = Rng::derive(cfg.seed, stream::perturb);
    Rng rng_augment_d = Rng::derive(cfg.seed, stream::augment_d);
    Rng rng_augment_g = Rng::derive(cfg.seed, stream::augment_g);

    Adam opt_d(cfg.optimizer), opt_g(cfg.optimizer);
    const StepSettings step = cfg.step_settings();

    auto emit = [&](long long t) {
        MetricsRow row = evaluate_model(out.model, out.queue_fake, out.queue_real,
                                        train_set, pool_summary, pool, cfg, t);
        out.rows.push_back(row);
        if (on_row) on_row(row);
    };

    emit(0);
    for (long long t = 0; t < cfg.iterations; ++t) {
        Tensor reals = sample_rows(train_set, cfg.train_batch, rng_data);
        Tensor z_d = sample_latents(cfg.train_batch, cfg.network.d_z, rng_latents_d);
        d_step(out.model, opt_d, out.queue_fake, out.queue_real, reals, z_d, cfg.strategy,
               step, t, rng_perturb, rng_augment_d);
        Tensor z_g = sample_latents(cfg.train_batch, cfg.network.d_z, rng_latents_g);
        g_step(out.model, opt_g, out.queue_fake, z_g, cfg.strategy, step, t, rng_augment_g);
        out.iterations_done = t + 1;
        const bool at_interval = (t + 1) % cfg.eval_interval == 0;
        if (at_interval || t + 1 == cfg.iterations) emit(t + 1);
    }
    return out;
}

} // namespace fakeclr
