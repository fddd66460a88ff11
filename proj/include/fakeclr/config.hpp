#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <type_traits>

#include "json.hpp"

#include "fakeclr/dataset.hpp"
#include "fakeclr/gan.hpp"

namespace fakeclr {

using json = nlohmann::json;

struct DatasetConfig {
    DatasetKind kind = DatasetKind::ring;
    std::size_t n_samples = 1000;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_samples < 2) throw invalid_parameter("dataset: n_samples must be >= 2");
        if (n_samples > dataset_pool_size)
            throw invalid_parameter("dataset: n_samples exceeds the fixed pool size");
    }
};

struct EvalConfig {
    std::size_t fid_samples = 10000;  // generated points summarized against the pool
    std::size_t kid_samples = 1000;   // subset size per side of the MMD estimate
    std::size_t ppl_paths = 256;
    double ppl_eps = 1e-4;
    std::size_t nn_samples = 256;  // generated points scanned against the train set
    double nn_delta = 0.1;

    void validate() const {
        if (fid_samples < 2 || kid_samples < 2)
            throw invalid_parameter("eval: fid_samples and kid_samples must be >= 2");
        if (ppl_paths < 1) throw invalid_parameter("eval: ppl_paths must be >= 1");
        if (!(ppl_eps > 0.0)) throw invalid_parameter("eval: ppl_eps must be positive");
        if (nn_samples < 1) throw invalid_parameter("eval: nn_samples must be >= 1");
        if (!(nn_delta > 0.0)) throw invalid_parameter("eval: nn_delta must be positive");
    }
};

struct ExperimentConfig {
    DatasetConfig dataset;
    StrategyConfig strategy;
    NetworkConfig network;
    double tau = 0.07;
    ForgettingConfig forgetting;
    PerturbationConfig perturbation;
    AugmentationConfig augmentation;
    LossWeights weights;
    QueueSchedule queue;  // decay_rate resolved (0 when scheduling is off)
    AdamConfig optimizer;
    double m_ema = 0.999;
    std::size_t train_batch = 64;
    std::size_t enqueue_batch = 64;
    long long iterations = 3000;
    long long eval_interval = 500;
    EvalConfig eval;
    std::uint64_t seed = 1;
    std::string rng = "splitmix64";

    void validate() const {
        dataset.validate();
        strategy.validate();
        network.validate();
        if (!(tau > 0.0)) throw invalid_parameter("config: tau must be positive");
        if (!(forgetting.tau_m > 0.0))
            throw invalid_parameter("config: tau_m must be positive");
        perturbation.validate();
        augmentation.validate();
        weights.validate();
        queue_target_size(0, queue);  // bounds check on the schedule
        optimizer.validate();
        if (!(m_ema >= 0.0 && m_ema <= 1.0))
            throw invalid_parameter("config: m_ema outside [0,1]");
        if (train_batch < 1) throw invalid_parameter("config: train_batch must be >= 1");
        if (enqueue_batch < 1 || enqueue_batch > train_batch)
            throw invalid_parameter("config: enqueue_batch outside [1, train_batch]");
        if (iterations < 0) throw invalid_parameter("config: iterations must be >= 0");
        if (eval_interval < 1) throw invalid_parameter("config: eval_interval must be >= 1");
        eval.validate();
        if (rng != "splitmix64") throw invalid_parameter("config: unknown rng family " + rng);
    }

    ContrastiveSettings contrastive_settings() const {
        ContrastiveSettings cs;
        cs.tau = tau;
        cs.forgetting = forgetting;
        cs.perturbation = perturbation;
        cs.augmentation = augmentation;
        cs.queue = queue;
        cs.enqueue_batch = enqueue_batch;
        return cs;
    }

    StepSettings step_settings() const {
        StepSettings s;
        s.weights = weights;
        s.contrastive = contrastive_settings();
        s.m_ema = m_ema;
        return s;
    }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const char* where) {
    if (!j.is_object())
        throw invalid_parameter(std::string("config: ") + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known)
            throw invalid_parameter(std::string("config: unknown key '") + it.key() +
                                    "' in " + where);
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        if constexpr (std::is_unsigned_v<T>) {
            // Reject negative literals instead of letting them wrap.
            const json& v = j.at(key);
            if (v.is_number_integer() && !v.is_number_unsigned() &&
                v.get<long long>() < 0)
                throw invalid_parameter(std::string("config: '") + key +
                                        "' must be non-negative");
        }
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw invalid_parameter(std::string("config: bad value for '") + key + "': " +
                                e.what());
    }
}

} // namespace detail

// Parses a (possibly sparse) JSON config. Every omitted field takes its
// default; the strategy variant seeds the flag defaults and the flags in turn
// seed the perturbation mode and queue decay, so a config that names only the
// variant gets the variant's canonical behaviour.
inline ExperimentConfig config_from_json(const json& j) {
    using detail::check_keys;
    using detail::get_or;
    check_keys(j, {"dataset", "strategy", "network", "contrastive", "perturbation",
                   "augmentation", "weights", "queue", "optimizer", "m_ema",
                   "train_batch", "enqueue_batch", "iterations", "eval_interval",
                   "eval", "seed", "rng"},
               "config");
    ExperimentConfig cfg;

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        check_keys(d, {"kind", "n_samples", "seed"}, "dataset");
        cfg.dataset.kind =
            dataset_kind_from_string(get_or<std::string>(d, "kind", "ring"));
        cfg.dataset.n_samples = get_or<std::size_t>(d, "n_samples", cfg.dataset.n_samples);
        cfg.dataset.seed = get_or<std::uint64_t>(d, "seed", cfg.dataset.seed);
    }

    Variant variant = Variant::baseline;
    if (j.contains("strategy")) {
        const json& s = j.at("strategy");
        check_keys(s, {"variant", "noise_related", "forgetting", "queue_schedule",
                       "real_in_fake_queue"},
                   "strategy");
        variant = variant_from_string(get_or<std::string>(s, "variant", "baseline"));
        cfg.strategy = StrategyConfig::canonical(variant);
        cfg.strategy.noise_related = get_or<bool>(s, "noise_related", cfg.strategy.noise_related);
        cfg.strategy.forgetting = get_or<bool>(s, "forgetting", cfg.strategy.forgetting);
        cfg.strategy.queue_schedule =
            get_or<bool>(s, "queue_schedule", cfg.strategy.queue_schedule);
        cfg.strategy.real_in_fake_queue =
            get_or<double>(s, "real_in_fake_queue", cfg.strategy.real_in_fake_queue);
    } else {
        cfg.strategy = StrategyConfig::canonical(variant);
    }

    if (j.contains("network")) {
        const json& n = j.at("network");
        check_keys(n, {"d_z", "d_w", "d_h", "d_proj", "hidden"}, "network");
        cfg.network.d_z = get_or<std::size_t>(n, "d_z", cfg.network.d_z);
        cfg.network.d_w = get_or<std::size_t>(n, "d_w", cfg.network.d_w);
        cfg.network.d_h = get_or<std::size_t>(n, "d_h", cfg.network.d_h);
        cfg.network.d_proj = get_or<std::size_t>(n, "d_proj", cfg.network.d_proj);
        cfg.network.hidden = get_or<std::size_t>(n, "hidden", cfg.network.hidden);
    }

    if (j.contains("contrastive")) {
        const json& c = j.at("contrastive");
        check_keys(c, {"tau", "tau_m", "use_pseudocode_normalization"}, "contrastive");
        cfg.tau = get_or<double>(c, "tau", cfg.tau);
        cfg.forgetting.tau_m = get_or<double>(c, "tau_m", cfg.forgetting.tau_m);
        cfg.forgetting.use_pseudocode_normalization =
            get_or<bool>(c, "use_pseudocode_normalization",
                         cfg.forgetting.use_pseudocode_normalization);
    }
    cfg.forgetting.enabled = cfg.strategy.forgetting;

    // The perturbation mode is authoritative when given; otherwise the
    // strategy's noise_related flag picks between noise_related and fixed.
    bool mode_explicit = false;
    if (j.contains("perturbation")) {
        const json& p = j.at("perturbation");
        check_keys(p, {"mode", "l1", "sigma_fixed"}, "perturbation");
        if (p.contains("mode")) {
            cfg.perturbation.mode =
                perturbation_mode_from_string(p.at("mode").get<std::string>());
            mode_explicit = true;
        }
        cfg.perturbation.l1 = get_or<double>(p, "l1", cfg.perturbation.l1);
        cfg.perturbation.sigma_fixed =
            get_or<double>(p, "sigma_fixed", cfg.perturbation.sigma_fixed);
    }
    if (mode_explicit)
        cfg.strategy.noise_related = cfg.perturbation.mode == PerturbationMode::noise_related;
    else
        cfg.perturbation.mode = cfg.strategy.noise_related ? PerturbationMode::noise_related
                                                           : PerturbationMode::fixed;

    if (j.contains("augmentation")) {
        const json& a = j.at("augmentation");
        check_keys(a, {"jitter_std", "rotation_max", "enabled"}, "augmentation");
        cfg.augmentation.jitter_std =
            get_or<double>(a, "jitter_std", cfg.augmentation.jitter_std);
        cfg.augmentation.rotation_max =
            get_or<double>(a, "rotation_max", cfg.augmentation.rotation_max);
        cfg.augmentation.enabled = get_or<bool>(a, "enabled", cfg.augmentation.enabled);
    }

    if (j.contains("weights")) {
        const json& w = j.at("weights");
        check_keys(w, {"lambda_f", "lambda_r", "lambda_g"}, "weights");
        cfg.weights.lambda_f = get_or<double>(w, "lambda_f", cfg.weights.lambda_f);
        cfg.weights.lambda_r = get_or<double>(w, "lambda_r", cfg.weights.lambda_r);
        cfg.weights.lambda_g = get_or<double>(w, "lambda_g", cfg.weights.lambda_g);
    }

    cfg.m_ema = get_or<double>(j, "m_ema", cfg.m_ema);
    cfg.train_batch = get_or<std::size_t>(j, "train_batch", cfg.train_batch);
    cfg.enqueue_batch = get_or<std::size_t>(j, "enqueue_batch", cfg.enqueue_batch);
    cfg.iterations = get_or<long long>(j, "iterations", cfg.iterations);
    cfg.eval_interval = get_or<long long>(j, "eval_interval", cfg.eval_interval);

    bool decay_explicit = false;
    if (j.contains("queue")) {
        const json& q = j.at("queue");
        check_keys(q, {"initial_capacity", "decay_rate", "min_capacity"}, "queue");
        cfg.queue.initial_capacity =
            get_or<std::size_t>(q, "initial_capacity", cfg.queue.initial_capacity);
        if (q.contains("decay_rate")) {
            cfg.queue.decay_rate = q.at("decay_rate").get<double>();
            decay_explicit = true;
        }
        cfg.queue.min_capacity =
            get_or<std::size_t>(q, "min_capacity", cfg.queue.min_capacity);
    }
    if (!cfg.strategy.queue_schedule) {
        cfg.queue.decay_rate = 0.0;
    } else if (!decay_explicit) {
        // Default schedule: shed half the initial capacity over the run.
        cfg.queue.decay_rate = static_cast<double>(cfg.queue.initial_capacity) /
                               (2.0 * static_cast<double>(std::max<long long>(1, cfg.iterations)));
    }

    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        check_keys(o, {"lr", "beta1", "beta2", "eps"}, "optimizer");
        cfg.optimizer.lr = get_or<double>(o, "lr", cfg.optimizer.lr);
        cfg.optimizer.beta1 = get_or<double>(o, "beta1", cfg.optimizer.beta1);
        cfg.optimizer.beta2 = get_or<double>(o, "beta2", cfg.optimizer.beta2);
        cfg.optimizer.eps = get_or<double>(o, "eps", cfg.optimizer.eps);
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_keys(e, {"fid_samples", "kid_samples", "ppl_paths", "ppl_eps", "nn_samples",
                       "nn_delta"},
                   "eval");
        cfg.eval.fid_samples = get_or<std::size_t>(e, "fid_samples", cfg.eval.fid_samples);
        cfg.eval.kid_samples = get_or<std::size_t>(e, "kid_samples", cfg.eval.kid_samples);
        cfg.eval.ppl_paths = get_or<std::size_t>(e, "ppl_paths", cfg.eval.ppl_paths);
        cfg.eval.ppl_eps = get_or<double>(e, "ppl_eps", cfg.eval.ppl_eps);
        cfg.eval.nn_samples = get_or<std::size_t>(e, "nn_samples", cfg.eval.nn_samples);
        cfg.eval.nn_delta = get_or<double>(e, "nn_delta", cfg.eval.nn_delta);
    }

    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.rng = get_or<std::string>(j, "rng", cfg.rng);

    cfg.validate();
    return cfg;
}

inline ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw invalid_parameter(std::string("config: JSON parse error: ") + e.what());
    }
    return config_from_json(j);
}

// Serializes with every field materialized, defaults included, so the written
// config is self-contained and hashable.
inline json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["dataset"] = {{"kind", to_string(cfg.dataset.kind)},
                    {"n_samples", cfg.dataset.n_samples},
                    {"seed", cfg.dataset.seed}};
    j["strategy"] = {{"variant", to_string(cfg.strategy.variant)},
                     {"noise_related", cfg.strategy.noise_related},
                     {"forgetting", cfg.strategy.forgetting},
                     {"queue_schedule", cfg.strategy.queue_schedule},
                     {"real_in_fake_queue", cfg.strategy.real_in_fake_queue}};
    j["network"] = {{"d_z", cfg.network.d_z},
                    {"d_w", cfg.network.d_w},
                    {"d_h", cfg.network.d_h},
                    {"d_proj", cfg.network.d_proj},
                    {"hidden", cfg.network.hidden}};
    j["contrastive"] = {{"tau", cfg.tau},
                        {"tau_m", cfg.forgetting.tau_m},
                        {"use_pseudocode_normalization",
                         cfg.forgetting.use_pseudocode_normalization}};
    j["perturbation"] = {{"mode", to_string(cfg.perturbation.mode)},
                         {"l1", cfg.perturbation.l1},
                         {"sigma_fixed", cfg.perturbation.sigma_fixed}};
    j["augmentation"] = {{"jitter_std", cfg.augmentation.jitter_std},
                         {"rotation_max", cfg.augmentation.rotation_max},
                         {"enabled", cfg.augmentation.enabled}};
    j["weights"] = {{"lambda_f", cfg.weights.lambda_f},
                    {"lambda_r", cfg.weights.lambda_r},
                    {"lambda_g", cfg.weights.lambda_g}};
    j["queue"] = {{"initial_capacity", cfg.queue.initial_capacity},
                  {"decay_rate", cfg.queue.decay_rate},
                  {"min_capacity", cfg.queue.min_capacity}};
    j["optimizer"] = {{"lr", cfg.optimizer.lr},
                      {"beta1", cfg.optimizer.beta1},
                      {"beta2", cfg.optimizer.beta2},
                      {"eps", cfg.optimizer.eps}};
    j["m_ema"] = cfg.m_ema;
    j["train_batch"] = cfg.train_batch;
    j["enqueue_batch"] = cfg.enqueue_batch;
    j["iterations"] = cfg.iterations;
    j["eval_interval"] = cfg.eval_interval;
    j["eval"] = {{"fid_samples", cfg.eval.fid_samples},
                 {"kid_samples", cfg.eval.kid_samples},
                 {"ppl_paths", cfg.eval.ppl_paths},
                 {"ppl_eps", cfg.eval.ppl_eps},
                 {"nn_samples", cfg.eval.nn_samples},
                 {"nn_delta", cfg.eval.nn_delta}};
    j["seed"] = cfg.seed;
    j["rng"] = cfg.rng;
    return j;
}

} // namespace fakeclr
