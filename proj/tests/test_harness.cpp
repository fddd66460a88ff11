#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fakeclr/config.hpp"
#include "fakeclr/dataset.hpp"
#include "fakeclr/experiment.hpp"
#include "fakeclr/train.hpp"

using namespace fakeclr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("fakeclr_harness_" + tag);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

// Small, fast config used by the end-to-end harness tests.
std::string tiny_config_json(const std::string& variant, std::uint64_t seed,
                             long long iterations, long long eval_interval = 2) {
    std::ostringstream ss;
    ss << "{\"dataset\":{\"kind\":\"ring\",\"n_samples\":64},"
       << "\"strategy\":{\"variant\":\"" << variant << "\"},"
       << "\"queue\":{\"initial_capacity\":16,\"min_capacity\":4},"
       << "\"train_batch\":8,\"enqueue_batch\":2,"
       << "\"iterations\":" << iterations << ",\"eval_interval\":" << eval_interval << ","
       << "\"eval\":{\"fid_samples\":64,\"kid_samples\":16,\"ppl_paths\":4,"
       << "\"nn_samples\":8},"
       << "\"seed\":" << seed << "}";
    return ss.str();
}

bool rows_equal(const MetricsRow& a, const MetricsRow& b) {
    return a.iteration == b.iteration && a.loss_d == b.loss_d && a.loss_g == b.loss_g &&
           a.contrastive == b.contrastive && a.queue_size == b.queue_size &&
           a.toy_fid == b.toy_fid && a.toy_kid == b.toy_kid &&
           a.ppl_z_mean == b.ppl_z_mean && a.ppl_w_mean == b.ppl_w_mean &&
           a.ppl_w_std == b.ppl_w_std && a.nn_min_dist == b.nn_min_dist;
}

bool models_equal(GanModel& a, GanModel& b) {
    std::vector<Param*> pa = checkpoint_params(a), pb = checkpoint_params(b);
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i]->value.values() != pb[i]->value.values()) return false;
    return true;
}

} // namespace

TEST_CASE("dataset kind names round-trip") {
    for (DatasetKind k : {DatasetKind::ring, DatasetKind::grid, DatasetKind::spiral})
        REQUIRE(dataset_kind_from_string(to_string(k)) == k);
    REQUIRE_THROWS_AS(dataset_kind_from_string("moons"), invalid_parameter);
}

TEST_CASE("datasets are deterministic nested prefixes of a fixed pool") {
    const Tensor small = make_dataset(DatasetKind::ring, 100, 1);
    const Tensor small2 = make_dataset(DatasetKind::ring, 100, 1);
    const Tensor large = make_dataset(DatasetKind::ring, 1000, 1);
    REQUIRE(small.rows() == 100);
    REQUIRE(small.cols() == 2);
    REQUIRE(small.values() == small2.values());
    for (std::size_t i = 0; i < small.rows(); ++i) {
        REQUIRE(small.at(i, 0) == large.at(i, 0));
        REQUIRE(small.at(i, 1) == large.at(i, 1));
    }

    const Tensor reseeded = make_dataset(DatasetKind::ring, 100, 2);
    REQUIRE(reseeded.values() != small.values());
    REQUIRE(dataset_pool(DatasetKind::ring).rows() == dataset_pool_size);
}

TEST_CASE("ring samples cluster tightly around the eight component means") {
    const Tensor pts = make_dataset(DatasetKind::ring, 2000, 3);
    const auto means = ring_means();
    std::vector<std::size_t> counts(means.size(), 0);
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        double best = 1e300;
        std::size_t arg = 0;
        for (std::size_t k = 0; k < means.size(); ++k) {
            const double dx = pts.at(i, 0) - means[k].first;
            const double dy = pts.at(i, 1) - means[k].second;
            const double d = dx * dx + dy * dy;
            if (d < best) {
                best = d;
                arg = k;
            }
        }
        ++counts[arg];
        REQUIRE(std::sqrt(best) < 0.3);  // 6 sigma of the component noise
    }
    for (std::size_t c : counts) REQUIRE(c > 100);
}

TEST_CASE("all dataset families stay inside the expected radius") {
    for (DatasetKind k : {DatasetKind::ring, DatasetKind::grid, DatasetKind::spiral}) {
        const Tensor pts = make_dataset(k, 1000, 1);
        for (std::size_t i = 0; i < pts.rows(); ++i) {
            const double r = std::hypot(pts.at(i, 0), pts.at(i, 1));
            REQUIRE(r < (k == DatasetKind::grid ? 3.3 : 2.6));
        }
    }
}

TEST_CASE("dataset size contracts") {
    REQUIRE_THROWS_AS(make_dataset(DatasetKind::ring, 1, 1), invalid_parameter);
    REQUIRE_THROWS_AS(make_dataset(DatasetKind::ring, dataset_pool_size + 1, 1),
                      invalid_parameter);
    REQUIRE_NOTHROW(make_dataset(DatasetKind::ring, 2, 1));
}

TEST_CASE("an empty config materializes every default") {
    const ExperimentConfig cfg = config_from_json_text("{}");
    REQUIRE(cfg.dataset.kind == DatasetKind::ring);
    REQUIRE(cfg.dataset.n_samples == 1000);
    REQUIRE(cfg.dataset.seed == 1);
    REQUIRE(cfg.strategy.variant == Variant::baseline);
    REQUIRE_FALSE(cfg.strategy.noise_related);
    REQUIRE_FALSE(cfg.strategy.forgetting);
    REQUIRE_FALSE(cfg.strategy.queue_schedule);
    REQUIRE(cfg.strategy.real_in_fake_queue == 0.0);
    REQUIRE(cfg.network.d_z == 8);
    REQUIRE(cfg.network.d_proj == 16);
    REQUIRE(cfg.tau == 0.07);
    REQUIRE(cfg.forgetting.tau_m == 0.01);
    REQUIRE_FALSE(cfg.forgetting.enabled);
    REQUIRE(cfg.perturbation.mode == PerturbationMode::fixed);
    REQUIRE(cfg.perturbation.l1 == 0.1);
    REQUIRE(cfg.perturbation.sigma_fixed == 0.1);
    REQUIRE(cfg.augmentation.jitter_std == 0.05);
    REQUIRE(cfg.augmentation.rotation_max == 0.25);
    REQUIRE(cfg.augmentation.enabled);
    REQUIRE(cfg.weights.lambda_f == 1.0);
    REQUIRE(cfg.queue.initial_capacity == 1000);
    REQUIRE(cfg.queue.decay_rate == 0.0);
    REQUIRE(cfg.queue.min_capacity == 64);
    REQUIRE(cfg.optimizer.lr == 2e-4);
    REQUIRE(cfg.m_ema == 0.999);
    REQUIRE(cfg.train_batch == 64);
    REQUIRE(cfg.enqueue_batch == 64);
    REQUIRE(cfg.iterations == 3000);
    REQUIRE(cfg.eval_interval == 500);
    REQUIRE(cfg.eval.fid_samples == 10000);
    REQUIRE(cfg.eval.ppl_eps == 1e-4);
    REQUIRE(cfg.seed == 1);
    REQUIRE(cfg.rng == "splitmix64");
}

TEST_CASE("naming a variant resolves its canonical flags and derived settings") {
    const ExperimentConfig fc = config_from_json_text(
        R"({"strategy":{"variant":"fakeclr"},"iterations":1000,
            "queue":{"initial_capacity":800}})");
    REQUIRE(fc.strategy.variant == Variant::fakeclr);
    REQUIRE(fc.strategy.noise_related);
    REQUIRE(fc.strategy.forgetting);
    REQUIRE(fc.strategy.queue_schedule);
    REQUIRE(fc.forgetting.enabled);
    REQUIRE(fc.perturbation.mode == PerturbationMode::noise_related);
    // Default schedule sheds half the initial capacity over the run.
    REQUIRE(fc.queue.decay_rate == Catch::Approx(800.0 / 2000.0));

    const ExperimentConfig explicit_decay = config_from_json_text(
        R"({"strategy":{"variant":"fakeclr"},"queue":{"decay_rate":0.25}})");
    REQUIRE(explicit_decay.queue.decay_rate == 0.25);

    // Scheduling off forces a flat queue even when a rate is spelled out.
    const ExperimentConfig flat = config_from_json_text(
        R"({"strategy":{"variant":"instance_perturbation"},"queue":{"decay_rate":5.0}})");
    REQUIRE(flat.queue.decay_rate == 0.0);

    // An explicit perturbation mode is authoritative over the variant flag.
    const ExperimentConfig fixed_mode = config_from_json_text(
        R"({"strategy":{"variant":"fakeclr"},"perturbation":{"mode":"fixed"}})");
    REQUIRE(fixed_mode.perturbation.mode == PerturbationMode::fixed);
    REQUIRE_FALSE(fixed_mode.strategy.noise_related);

    // Without an explicit mode the flag decides.
    const ExperimentConfig flag_mode = config_from_json_text(
        R"({"strategy":{"variant":"instance_perturbation","noise_related":true}})");
    REQUIRE(flag_mode.perturbation.mode == PerturbationMode::noise_related);

    const ExperimentConfig real = config_from_json_text(
        R"({"strategy":{"variant":"instance_real"}})");
    REQUIRE(real.strategy.uses_real_head());
    REQUIRE_FALSE(real.strategy.uses_perturbation());
}

TEST_CASE("configs round-trip losslessly through json") {
    const ExperimentConfig cfg = config_from_json_text(
        R"({"strategy":{"variant":"fakeclr"},
            "contrastive":{"tau":0.11,"tau_m":0.02},
            "perturbation":{"l1":0.3},
            "augmentation":{"jitter_std":0.01},
            "weights":{"lambda_g":0.5},
            "optimizer":{"lr":0.001,"beta1":0.5},
            "queue":{"initial_capacity":128,"min_capacity":16},
            "train_batch":32,"enqueue_batch":8,
            "iterations":250,"eval_interval":50,"seed":9})");
    const std::string dumped = config_to_json(cfg).dump();
    const ExperimentConfig back = config_from_json_text(dumped);
    REQUIRE(config_to_json(back).dump() == dumped);
    REQUIRE(config_hash(back) == config_hash(cfg));
    REQUIRE(back.tau == 0.11);
    REQUIRE(back.forgetting.tau_m == 0.02);
    REQUIRE(back.perturbation.l1 == 0.3);
    REQUIRE(back.weights.lambda_g == 0.5);
    REQUIRE(back.optimizer.beta1 == 0.5);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
    REQUIRE_THROWS_AS(config_from_json_text(R"({"bogus":1})"), invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text(R"({"dataset":{"bogus":1}})"),
                      invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text(R"({"strategy":{"variant":"nope"}})"),
                      invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text(R"({"seed":-1})"), invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text(R"({"train_batch":"eight"})"),
                      invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text(R"({"train_batch":4,"enqueue_batch":8})"),
                      invalid_parameter);
    REQUIRE_THROWS_AS(
        config_from_json_text(R"({"strategy":{"variant":"fakeclr","forgetting":false}})"),
        invalid_parameter);
    REQUIRE_THROWS_AS(
        config_from_json_text(R"({"strategy":{"real_in_fake_queue":0.5}})"),
        invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text(R"({"contrastive":{"tau":-1.0}})"),
                      invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text(R"({"m_ema":1.5})"), invalid_parameter);
    REQUIRE_THROWS_AS(config_from_json_text("not json"), invalid_parameter);
}

TEST_CASE("metrics csv round-trips awkward doubles losslessly") {
    MetricsRow r;
    r.iteration = 1234;
    r.loss_d = 1.0 / 3.0;
    r.loss_g = 1e-300;
    r.contrastive = 3.14159265358979312;
    r.queue_size = 77;
    r.toy_fid = 1.2345678901234567e-7;
    r.toy_kid = -0.0;
    r.ppl_z_mean = 1e300;
    r.ppl_w_mean = 0.1;
    r.ppl_w_std = 2.2250738585072014e-308;
    r.nn_min_dist = 42.5;

    const fs::path dir = temp_dir("csv");
    fs::create_directories(dir);
    const fs::path file = dir / "metrics.csv";
    {
        std::ofstream out(file);
        out << metrics_csv_header << "\n" << metrics_csv_line(r) << "\n";
    }
    const std::vector<MetricsRow> rows = parse_metrics_csv(file.string());
    REQUIRE(rows.size() == 1);
    REQUIRE(rows_equal(rows[0], r));
    fs::remove_all(dir);
}

TEST_CASE("csv quoting survives delimiters and quotes") {
    REQUIRE(csv_quote("plain") == "plain");
    REQUIRE(csv_quote("a,b") == "\"a,b\"");
    REQUIRE(csv_quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
    const std::vector<std::string> f = split_csv_line("x,\"a,b\",\"say \"\"hi\"\"\",y");
    REQUIRE(f == std::vector<std::string>{"x", "a,b", "say \"hi\"", "y"});
}

TEST_CASE("metrics csv parsing rejects malformed files") {
    REQUIRE_THROWS_AS(parse_metrics_csv("/nonexistent/metrics.csv"), invalid_input);

    const fs::path dir = temp_dir("badcsv");
    fs::create_directories(dir);
    spit(dir / "wrong_header.csv", "iteration,loss\n0,1\n");
    REQUIRE_THROWS_AS(parse_metrics_csv((dir / "wrong_header.csv").string()),
                      invalid_input);
    spit(dir / "short_row.csv", std::string(metrics_csv_header) + "\n0,1,2\n");
    REQUIRE_THROWS_AS(parse_metrics_csv((dir / "short_row.csv").string()), invalid_input);
    fs::remove_all(dir);
}

TEST_CASE("checkpoints restore every parameter bit-exactly") {
    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("fakeclr", 5, 4));
    Rng rng = Rng::derive(cfg.seed, stream::init);
    GanModel model(cfg.network, rng);
    REQUIRE(checkpoint_params(model).size() == 42);

    const fs::path dir = temp_dir("ckpt");
    fs::create_directories(dir);
    const fs::path file = dir / "model.ckpt";
    save_checkpoint(file.string(), model, cfg);

    const Checkpoint ck = load_checkpoint(file.string());
    REQUIRE(config_to_json(ck.config).dump() == config_to_json(cfg).dump());
    REQUIRE(ck.tensors.size() == 42);
    GanModel restored = restore_model(ck);
    REQUIRE(models_equal(model, restored));
    fs::remove_all(dir);
}

TEST_CASE("checkpoint loading rejects corruption") {
    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("baseline", 5, 4));
    Rng rng = Rng::derive(cfg.seed, stream::init);
    GanModel model(cfg.network, rng);

    const fs::path dir = temp_dir("ckpt_bad");
    fs::create_directories(dir);
    const fs::path file = dir / "model.ckpt";
    save_checkpoint(file.string(), model, cfg);
    const std::string full = slurp(file);

    spit(dir / "magic.ckpt", "BOGUS-CKPT\n" + full.substr(full.find('\n') + 1));
    REQUIRE_THROWS_AS(load_checkpoint((dir / "magic.ckpt").string()), invalid_input);

    spit(dir / "truncated.ckpt", full.substr(0, full.size() / 2));
    REQUIRE_THROWS_AS(load_checkpoint((dir / "truncated.ckpt").string()), invalid_input);

    REQUIRE_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), invalid_input);

    Checkpoint ck = load_checkpoint(file.string());
    ck.config.network.d_h = 16;  // tensors no longer match the dimensions
    REQUIRE_THROWS_AS(restore_model(ck), invalid_input);
    fs::remove_all(dir);
}

TEST_CASE("zero-iteration training evaluates the fresh model once") {
    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("fakeclr", 11, 0));
    TrainResult out = train(cfg);
    REQUIRE(out.rows.size() == 1);
    REQUIRE(out.rows[0].iteration == 0);
    REQUIRE(out.iterations_done == 0);
    REQUIRE(out.queue_fake.empty());

    Rng rng = Rng::derive(cfg.seed, stream::init);
    GanModel fresh(cfg.network, rng);
    REQUIRE(models_equal(out.model, fresh));
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("fakeclr", 7, 6));
    TrainResult a = train(cfg);
    TrainResult b = train(cfg);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) REQUIRE(rows_equal(a.rows[i], b.rows[i]));
    REQUIRE(models_equal(a.model, b.model));
    REQUIRE(a.queue_fake.size() == b.queue_fake.size());
    const auto &ea = a.queue_fake.entries(), &eb = b.queue_fake.entries();
    for (std::size_t i = 0; i < ea.size(); ++i) {
        REQUIRE(ea[i].iteration_label == eb[i].iteration_label);
        REQUIRE(ea[i].embedding == eb[i].embedding);
    }
}

TEST_CASE("evaluation rows appear at iteration zero, every interval, and the end") {
    const ExperimentConfig uneven =
        config_from_json_text(tiny_config_json("baseline", 1, 7, 3));
    TrainResult a = train(uneven);
    std::vector<long long> got;
    for (const MetricsRow& r : a.rows) got.push_back(r.iteration);
    REQUIRE(got == std::vector<long long>{0, 3, 6, 7});

    const ExperimentConfig even =
        config_from_json_text(tiny_config_json("baseline", 1, 6, 3));
    TrainResult b = train(even);
    got.clear();
    for (const MetricsRow& r : b.rows) got.push_back(r.iteration);
    REQUIRE(got == std::vector<long long>{0, 3, 6});

    for (const MetricsRow& r : b.rows) {
        REQUIRE(r.contrastive == 0.0);
        REQUIRE(r.queue_size == 0);
    }
}

TEST_CASE("logged queue sizes follow the shrink schedule") {
    const ExperimentConfig cfg = config_from_json_text(
        R"({"dataset":{"kind":"ring","n_samples":64},
            "strategy":{"variant":"fakeclr"},
            "queue":{"initial_capacity":8,"decay_rate":0.5,"min_capacity":2},
            "train_batch":8,"enqueue_batch":2,
            "iterations":6,"eval_interval":1,
            "eval":{"fid_samples":64,"kid_samples":16,"ppl_paths":4,"nn_samples":8},
            "seed":13})");
    TrainResult out = train(cfg);
    REQUIRE(out.rows.size() == 7);
    REQUIRE(out.rows[0].queue_size == 0);
    std::size_t size = 0;
    for (long long t = 0; t < 6; ++t) {
        size = std::min(size + cfg.enqueue_batch, queue_target_size(t, cfg.queue));
        REQUIRE(out.rows[static_cast<std::size_t>(t) + 1].queue_size == size);
    }
    REQUIRE(out.queue_fake.size() == size);
}

TEST_CASE("a short contrastive run stays finite and non-negative") {
    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("fakeclr", 21, 4));
    TrainResult out = train(cfg);
    REQUIRE(out.rows.size() == 3);
    for (const MetricsRow& r : out.rows) {
        REQUIRE_NOTHROW(r.validate());
        REQUIRE(r.contrastive >= 0.0);
        REQUIRE(r.toy_fid >= 0.0);
        REQUIRE(r.nn_min_dist >= 0.0);
    }
    // The queue only ever holds momentum keys from the fake head.
    for (const QueueEntry& e : out.queue_fake.entries())
        REQUIRE(e.embedding.size() == cfg.network.d_proj);
}

TEST_CASE("metrics rows reject non-finite values") {
    MetricsRow r;
    REQUIRE_NOTHROW(r.validate());
    r.toy_fid = std::nan("");
    REQUIRE_THROWS_AS(r.validate(), evaluation_error);
}

TEST_CASE("batch samplers draw existing rows deterministically") {
    const Tensor data = make_dataset(DatasetKind::ring, 16, 1);
    Rng r1(5), r2(5);
    const Tensor a = sample_rows(data, 10, r1);
    const Tensor b = sample_rows(data, 10, r2);
    REQUIRE(a.values() == b.values());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        bool found = false;
        for (std::size_t j = 0; j < data.rows() && !found; ++j)
            found = a.at(i, 0) == data.at(j, 0) && a.at(i, 1) == data.at(j, 1);
        REQUIRE(found);
    }
    Rng r3(6), r4(6);
    REQUIRE(sample_latents(4, 8, r3).values() == sample_latents(4, 8, r4).values());
}

TEST_CASE("run_experiment writes config, streamed metrics, and a checkpoint") {
    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("fakeclr", 5, 4));
    const fs::path dir = temp_dir("run_ok");
    const RunOutcome out = run_experiment(cfg, dir.string());
    REQUIRE(out.status == 0);
    REQUIRE(out.error.empty());
    REQUIRE(fs::exists(dir / "config.json"));
    REQUIRE(fs::exists(dir / "metrics.csv"));
    REQUIRE(fs::exists(dir / "final.ckpt"));
    REQUIRE_FALSE(fs::exists(dir / "error.txt"));

    const std::vector<MetricsRow> parsed = parse_metrics_csv((dir / "metrics.csv").string());
    REQUIRE(parsed.size() == out.rows.size());
    for (std::size_t i = 0; i < parsed.size(); ++i) REQUIRE(rows_equal(parsed[i], out.rows[i]));

    const ExperimentConfig reread = config_from_json_text(slurp(dir / "config.json"));
    REQUIRE(config_to_json(reread).dump() == config_to_json(cfg).dump());

    const Checkpoint ck = load_checkpoint((dir / "final.ckpt").string());
    REQUIRE(ck.tensors.size() == 42);
    fs::remove_all(dir);
}

TEST_CASE("identical runs produce byte-identical artifacts") {
    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("fakeclr", 6, 4));
    const fs::path d1 = temp_dir("run_rep1"), d2 = temp_dir("run_rep2");
    REQUIRE(run_experiment(cfg, d1.string()).status == 0);
    REQUIRE(run_experiment(cfg, d2.string()).status == 0);
    REQUIRE(slurp(d1 / "metrics.csv") == slurp(d2 / "metrics.csv"));
    REQUIRE(slurp(d1 / "config.json") == slurp(d2 / "config.json"));
    REQUIRE(slurp(d1 / "final.ckpt") == slurp(d2 / "final.ckpt"));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("an exploding run aborts with a partial log and no checkpoint") {
    ExperimentConfig cfg = config_from_json_text(
        R"({"dataset":{"kind":"ring","n_samples":64},
            "strategy":{"variant":"baseline"},
            "optimizer":{"lr":1e308},
            "train_batch":8,"enqueue_batch":2,
            "iterations":50,"eval_interval":1000,
            "eval":{"fid_samples":64,"kid_samples":16,"ppl_paths":4,"nn_samples":8},
            "seed":3})");
    const fs::path dir = temp_dir("run_abort");
    const RunOutcome out = run_experiment(cfg, dir.string());
    REQUIRE(out.status == 1);
    REQUIRE_FALSE(out.error.empty());
    REQUIRE(fs::exists(dir / "error.txt"));
    REQUIRE_FALSE(fs::exists(dir / "final.ckpt"));
    const std::vector<MetricsRow> parsed = parse_metrics_csv((dir / "metrics.csv").string());
    REQUIRE(parsed.size() == out.rows.size());
    REQUIRE(!parsed.empty());
    REQUIRE(parsed[0].iteration == 0);
    fs::remove_all(dir);
}

TEST_CASE("dotted overrides address nested config fields") {
    json doc = json::object();
    apply_override(doc, "optimizer.lr", json(0.5));
    apply_override(doc, "x.y.z", json(3));
    apply_override(doc, "seed", json(9));
    REQUIRE(doc["optimizer"]["lr"] == 0.5);
    REQUIRE(doc["x"]["y"]["z"] == 3);
    REQUIRE(doc["seed"] == 9);
    REQUIRE_THROWS_AS(apply_override(doc, "", json(1)), invalid_parameter);
}

TEST_CASE("grids expand in row-major order over sorted axes") {
    const json base = json::object();
    const json grid = json::parse(R"({"b":[10,20],"a":[1,2]})");
    const auto points = expand_grid(base, grid);
    REQUIRE(points.size() == 4);
    REQUIRE(points[0].first == "a=1 b=10");
    REQUIRE(points[1].first == "a=1 b=20");
    REQUIRE(points[2].first == "a=2 b=10");
    REQUIRE(points[3].first == "a=2 b=20");
    REQUIRE(points[3].second["a"] == 2);
    REQUIRE(points[3].second["b"] == 20);

    REQUIRE_THROWS_AS(expand_grid(base, json::object()), invalid_parameter);
    REQUIRE_THROWS_AS(expand_grid(base, json::parse(R"({"a":5})")), invalid_parameter);
    REQUIRE_THROWS_AS(expand_grid(base, json::parse(R"({"a":[]})")), invalid_parameter);
}

TEST_CASE("a one-point sweep reproduces the standalone run byte for byte") {
    const json base = json::parse(tiny_config_json("fakeclr", 3, 4));
    const json grid = json::parse(R"({"seed":[5]})");
    const fs::path sweep_dir = temp_dir("sweep_one");
    const std::vector<SweepItem> items = sweep(base, grid, sweep_dir.string());
    REQUIRE(items.size() == 1);
    REQUIRE(items[0].status == "ok");
    REQUIRE(items[0].overrides == "seed=5");

    const ExperimentConfig cfg = config_from_json_text(tiny_config_json("fakeclr", 5, 4));
    REQUIRE(items[0].dir == sweep_dir.string() + "/run-" + config_hash(cfg));

    const fs::path solo_dir = temp_dir("sweep_solo");
    REQUIRE(run_experiment(cfg, solo_dir.string()).status == 0);
    REQUIRE(slurp(fs::path(items[0].dir) / "metrics.csv") == slurp(solo_dir / "metrics.csv"));
    REQUIRE(slurp(fs::path(items[0].dir) / "final.ckpt") == slurp(solo_dir / "final.ckpt"));

    const std::string summary = slurp(sweep_dir / "summary.csv");
    REQUIRE(summary.rfind(summary_csv_header, 0) == 0);
    fs::remove_all(sweep_dir);
    fs::remove_all(solo_dir);
}

TEST_CASE("a repeated sweep reuses completed runs") {
    const json base = json::parse(tiny_config_json("fakeclr", 3, 4));
    const json grid = json::parse(R"({"seed":[5,6]})");
    const fs::path dir = temp_dir("sweep_resume");
    const std::vector<SweepItem> first = sweep(base, grid, dir.string());
    REQUIRE(first.size() == 2);
    for (const SweepItem& it : first) REQUIRE(it.status == "ok");

    const std::vector<SweepItem> second = sweep(base, grid, dir.string());
    REQUIRE(second.size() == 2);
    for (std::size_t i = 0; i < second.size(); ++i) {
        REQUIRE(second[i].status == "cached");
        REQUIRE(rows_equal(second[i].final_row, first[i].final_row));
    }
    fs::remove_all(dir);
}

TEST_CASE("a failing grid point is recorded without stopping the sweep") {
    const json base = json::parse(tiny_config_json("fakeclr", 3, 4));
    // enqueue_batch is 2, so train_batch 1 is rejected at config time.
    const json grid = json::parse(R"({"train_batch":[1,8]})");
    const fs::path dir = temp_dir("sweep_fail");
    const std::vector<SweepItem> items = sweep(base, grid, dir.string());
    REQUIRE(items.size() == 2);
    REQUIRE(items[0].status == "error");
    REQUIRE_FALSE(items[0].error.empty());
    REQUIRE(items[1].status == "ok");
    const std::string summary = slurp(dir / "summary.csv");
    REQUIRE(std::count(summary.begin(), summary.end(), '\n') == 3);
    fs::remove_all(dir);
}

#ifdef FAKECLR_CLI_PATH
TEST_CASE("cli seed precedence: flag beats environment beats config") {
    const fs::path dir = temp_dir("cli");
    fs::create_directories(dir);
    const fs::path cfg = dir / "config.json";
    spit(cfg, tiny_config_json("baseline", 3, 0));
    const std::string cli = FAKECLR_CLI_PATH;

    auto run_cli = [&](const std::string& prefix, const std::string& args) {
        const std::string cmd = prefix + "'" + cli + "' " + args + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    auto seed_of = [&](const fs::path& out_dir) {
        return json::parse(slurp(out_dir / "config.json")).at("seed").get<std::uint64_t>();
    };

    REQUIRE(run_cli("", "run --config '" + cfg.string() + "' --out '" +
                            (dir / "o1").string() + "'") == 0);
    REQUIRE(seed_of(dir / "o1") == 3);

    REQUIRE(run_cli("FAKECLR_SEED=9 ", "run --config '" + cfg.string() + "' --out '" +
                                           (dir / "o2").string() + "'") == 0);
    REQUIRE(seed_of(dir / "o2") == 9);

    REQUIRE(run_cli("FAKECLR_SEED=9 ", "run --config '" + cfg.string() + "' --out '" +
                                           (dir / "o3").string() + "' --seed 11") == 0);
    REQUIRE(seed_of(dir / "o3") == 11);

    REQUIRE(run_cli("FAKECLR_SEED=abc ", "run --config '" + cfg.string() + "' --out '" +
                                             (dir / "o4").string() + "'") != 0);

    const std::string metrics_out = (dir / "metrics_out.txt").string();
    const std::string cmd = "'" + cli + "' metrics --ckpt '" +
                            (dir / "o1" / "final.ckpt").string() + "' > " + metrics_out +
                            " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    REQUIRE(slurp(metrics_out).rfind(metrics_csv_header, 0) == 0);
    fs::remove_all(dir);
}
#endif
