#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "fakeclr/experiment.hpp"
#include "fakeclr/selftest.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fakeclr::invalid_parameter("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Seed precedence: --seed beats FAKECLR_SEED beats the config file.
void apply_seed_overrides(fakeclr::ExperimentConfig& cfg, bool have_cli_seed,
                          std::uint64_t cli_seed) {
    if (const char* env = std::getenv("FAKECLR_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end == env || *end != '\0')
            throw fakeclr::invalid_parameter("FAKECLR_SEED is not an integer");
        cfg.seed = v;
    }
    if (have_cli_seed) cfg.seed = cli_seed;
}

fakeclr::DatasetConfig parse_dataset_spec(const std::string& spec,
                                          fakeclr::DatasetConfig base) {
    if (spec.empty()) return base;
    std::istringstream ss(spec);
    std::string part;
    if (std::getline(ss, part, ':')) base.kind = fakeclr::dataset_kind_from_string(part);
    if (std::getline(ss, part, ':')) base.n_samples = std::stoull(part);
    if (std::getline(ss, part, ':')) base.seed = std::stoull(part);
    return base;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fakeclr: contrastive-regularized GAN experiments on 2-D toy data"};
    app.require_subcommand(1);

    std::string config_path, grid_path, out_dir, ckpt_path, dataset_spec;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    CLI::App* run = app.add_subcommand("run", "train one configuration");
    run->add_option("--config", config_path, "config JSON path")->required();
    run->add_option("--out", out_dir, "output directory")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed, "override the config seed");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a grid of configurations");
    sweep_cmd->add_option("--config", config_path, "base config JSON path")->required();
    sweep_cmd->add_option("--grid", grid_path, "grid JSON path (dotted path -> values)")
        ->required();
    sweep_cmd->add_option("--out", out_dir, "output directory")->required();
    sweep_cmd->add_option("--jobs", jobs, "parallel worker threads");

    CLI::App* metrics_cmd =
        app.add_subcommand("metrics", "re-evaluate metrics on a checkpoint");
    metrics_cmd->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
    metrics_cmd->add_option("--dataset", dataset_spec,
                            "dataset spec kind[:n[:seed]] (default: from checkpoint)");

    CLI::App* selftest_cmd =
        app.add_subcommand("selftest", "run the oracle and gradient suite");
    (void)selftest_cmd;

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            fakeclr::ExperimentConfig cfg =
                fakeclr::config_from_json_text(read_file(config_path));
            apply_seed_overrides(cfg, seed_opt->count() > 0, seed);
            fakeclr::RunOutcome out = fakeclr::run_experiment(cfg, out_dir);
            if (out.status != 0) {
                std::cerr << "run aborted: " << out.error << "\n";
                return 1;
            }
            std::cout << "run complete: " << out.rows.size() << " eval rows in " << out_dir
                      << "\n";
            return 0;
        }
        if (sweep_cmd->parsed()) {
            const fakeclr::json base = fakeclr::json::parse(read_file(config_path));
            const fakeclr::json grid = fakeclr::json::parse(read_file(grid_path));
            std::vector<fakeclr::SweepItem> items = fakeclr::sweep(base, grid, out_dir, jobs);
            std::size_t ok = 0, cached = 0, failed = 0;
            for (const auto& it : items) {
                if (it.status == "ok") ++ok;
                else if (it.status == "cached") ++cached;
                else ++failed;
            }
            std::cout << "sweep complete: " << ok << " ran, " << cached << " cached, "
                      << failed << " failed; summary in " << out_dir << "/summary.csv\n";
            return failed == 0 ? 0 : 1;
        }
        if (metrics_cmd->parsed()) {
            fakeclr::Checkpoint ck = fakeclr::load_checkpoint(ckpt_path);
            fakeclr::GanModel model = fakeclr::restore_model(ck);
            fakeclr::ExperimentConfig cfg = ck.config;
            cfg.dataset = parse_dataset_spec(dataset_spec, cfg.dataset);
            cfg.validate();
            const fakeclr::Tensor train_set = fakeclr::make_dataset(
                cfg.dataset.kind, cfg.dataset.n_samples, cfg.dataset.seed);
            const fakeclr::Tensor& pool = fakeclr::dataset_pool(cfg.dataset.kind);
            fakeclr::NegativeQueue qf(cfg.queue), qr(cfg.queue);
            fakeclr::MetricsRow row =
                fakeclr::evaluate_model(model, qf, qr, train_set, fakeclr::summarize(pool),
                                        pool, cfg, cfg.iterations);
            std::cout << fakeclr::metrics_csv_header << "\n"
                      << fakeclr::metrics_csv_line(row) << "\n";
            return 0;
        }
        return fakeclr::run_selftest(std::cout) ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
