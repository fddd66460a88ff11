#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fakeclr/config.hpp"
#include "fakeclr/train.hpp"

namespace fakeclr {

// ---------------------------------------------------------------------------
// CSV plumbing. Numbers print as %.17g so a strtod round-trip is lossless;
// strings are quoted RFC-4180 style when they contain a delimiter.
// ---------------------------------------------------------------------------

inline std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline constexpr const char* metrics_csv_header =
    "iteration,loss_d,loss_g,contrastive,queue_size,toy_fid,toy_kid,"
    "ppl_z_mean,ppl_w_mean,ppl_w_std,nn_min_dist";

inline std::string metrics_csv_line(const MetricsRow& r) {
    std::string out = std::to_string(r.iteration);
    out += ',';
    out += csv_double(r.loss_d);
    out += ',';
    out += csv_double(r.loss_g);
    out += ',';
    out += csv_double(r.contrastive);
    out += ',';
    out += std::to_string(r.queue_size);
    for (double v : {r.toy_fid, r.toy_kid, r.ppl_z_mean, r.ppl_w_mean, r.ppl_w_std,
                     r.nn_min_dist}) {
        out += ',';
        out += csv_double(v);
    }
    return out;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::vector<MetricsRow> parse_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open metrics csv: " + path);
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header)
        throw invalid_input("unrecognized metrics csv header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 11) throw invalid_input("malformed metrics csv row in " + path);
        MetricsRow r;
        r.iteration = std::stoll(f[0]);
        r.loss_d = std::strtod(f[1].c_str(), nullptr);
        r.loss_g = std::strtod(f[2].c_str(), nullptr);
        r.contrastive = std::strtod(f[3].c_str(), nullptr);
        r.queue_size = static_cast<std::size_t>(std::stoull(f[4]));
        r.toy_fid = std::strtod(f[5].c_str(), nullptr);
        r.toy_kid = std::strtod(f[6].c_str(), nullptr);
        r.ppl_z_mean = std::strtod(f[7].c_str(), nullptr);
        r.ppl_w_mean = std::strtod(f[8].c_str(), nullptr);
        r.ppl_w_std = std::strtod(f[9].c_str(), nullptr);
        r.nn_min_dist = std::strtod(f[10].c_str(), nullptr);
        rows.push_back(r);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Checkpoint: versioned text format. Line 1 is the magic, line 2 embeds the
// resolved config as one-line JSON, then each parameter tensor in a fixed
// enumeration order (generator, discriminator, momentum encoder) with shape
// header and hexfloat values, which round-trip bit-exactly through strtod.
// ---------------------------------------------------------------------------

inline constexpr const char* checkpoint_magic = "FAKECLR-CKPT-1";

inline std::vector<Param*> checkpoint_params(GanModel& model) {
    std::vector<Param*> ps = model.G.params();
    for (Param* p : model.D.params()) ps.push_back(p);
    for (Param* p : model.encoder.params()) ps.push_back(p);
    return ps;
}

inline void save_checkpoint(const std::string& path, GanModel& model,
                            const ExperimentConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw evaluation_error("cannot write checkpoint: " + path);
    out << checkpoint_magic << "\n";
    out << "config " << config_to_json(cfg).dump() << "\n";
    std::vector<Param*> ps = checkpoint_params(model);
    out << "tensors " << ps.size() << "\n";
    char buf[64];
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const Tensor& t = ps[i]->value;
        out << "tensor " << i << " " << t.rows() << " " << t.cols() << "\n";
        for (std::size_t r = 0; r < t.rows(); ++r) {
            for (std::size_t c = 0; c < t.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%a", t.at(r, c));
                out << (c ? " " : "") << buf;
            }
            out << "\n";
        }
    }
    if (!out) throw evaluation_error("checkpoint write failed: " + path);
}

struct Checkpoint {
    ExperimentConfig config;
    std::vector<Tensor> tensors;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw invalid_input("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != checkpoint_magic)
        throw invalid_input("bad checkpoint magic in " + path);
    if (!std::getline(in, line) || line.rfind("config ", 0) != 0)
        throw invalid_input("missing config line in " + path);
    Checkpoint ck{config_from_json_text(line.substr(7)), {}};
    std::size_t n = 0;
    std::string word;
    in >> word >> n;
    if (word != "tensors") throw invalid_input("missing tensor count in " + path);
    ck.tensors.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx = 0, rows = 0, cols = 0;
        in >> word >> idx >> rows >> cols;
        if (word != "tensor" || idx != i)
            throw invalid_input("malformed tensor header in " + path);
        Tensor t(rows > 0 && cols == 1 ? std::vector<std::size_t>{rows}
                                       : std::vector<std::size_t>{rows, cols});
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (!(in >> word)) throw invalid_input("truncated checkpoint: " + path);
            t[k] = std::strtod(word.c_str(), nullptr);
        }
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

// Rebuilds a model from a checkpoint: fresh nets of the config's dimensions
// with every parameter tensor overwritten in enumeration order.
inline GanModel restore_model(const Checkpoint& ck) {
    Rng rng(0);
    GanModel model(ck.config.network, rng);
    std::vector<Param*> ps = checkpoint_params(model);
    if (ps.size() != ck.tensors.size())
        throw invalid_input("checkpoint tensor count does not match the config");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (ps[i]->value.size() != ck.tensors[i].size())
            throw invalid_input("checkpoint tensor shape mismatch");
        ps[i]->value.values() = ck.tensors[i].values();
    }
    return model;
}

// ---------------------------------------------------------------------------
// run_experiment: train under a config, streaming metrics.csv row by row so
// an aborted run keeps its partial log. Writes the resolved config.json up
// front and final.ckpt on success. Returns 0 on success, 1 on abort.
// ---------------------------------------------------------------------------

struct RunOutcome {
    int status = 0;
    std::string error;
    std::vector<MetricsRow> rows;
};

inline RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    {
        std::ofstream cj(out_dir + "/config.json");
        if (!cj) throw evaluation_error("cannot write config.json in " + out_dir);
        cj << config_to_json(cfg).dump(2) << "\n";
    }
    std::ofstream csv(out_dir + "/metrics.csv");
    if (!csv) throw evaluation_error("cannot write metrics.csv in " + out_dir);
    csv << metrics_csv_header << "\n";
    RunOutcome outcome;
    auto on_row = [&](const MetricsRow& r) {
        outcome.rows.push_back(r);
        csv << metrics_csv_line(r) << "\n";
        csv.flush();
    };
    try {
        TrainResult result = train(cfg, on_row);
        save_checkpoint(out_dir + "/final.ckpt", result.model, cfg);
    } catch (const abort_run& e) {
        outcome.status = 1;
        outcome.error = e.what();
        std::ofstream err(out_dir + "/error.txt");
        err << e.what() << "\n";
    }
    return outcome;
}

// ---------------------------------------------------------------------------
// Sweep: cartesian product of dotted-path overrides applied to a base config.
// Each combination runs in its own run-<confighash> directory; completed runs
// (config.json + metrics.csv + final.ckpt present) are skipped on resume, and
// failures are recorded in the summary without stopping the sweep.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_to_json(cfg).dump())));
    return buf;
}

inline void apply_override(json& doc, const std::string& dotted, const json& value) {
    std::string pointer;
    std::string part;
    std::istringstream path(dotted);
    while (std::getline(path, part, '.')) pointer += "/" + part;
    if (pointer.empty()) throw invalid_parameter("sweep: empty override path");
    doc[json::json_pointer(pointer)] = value;
}

struct SweepItem {
    std::string hash;
    std::string dir;
    std::string overrides;  // "path=value ..." for the summary
    std::string status;     // ok | cached | error
    std::string error;
    MetricsRow final_row;
    double runtime_seconds = 0.0;
    ExperimentConfig config;
};

inline constexpr const char* summary_csv_header =
    "config_hash,run_dir,overrides,status,error,iteration,loss_d,loss_g,contrastive,"
    "queue_size,toy_fid,toy_kid,ppl_z_mean,ppl_w_mean,ppl_w_std,nn_min_dist,"
    "runtime_seconds";

inline std::string summary_csv_line(const SweepItem& it) {
    std::string out = csv_quote(it.hash);
    out += ',';
    out += csv_quote(it.dir);
    out += ',';
    out += csv_quote(it.overrides);
    out += ',';
    out += csv_quote(it.status);
    out += ',';
    out += csv_quote(it.error);
    out += ',';
    out += metrics_csv_line(it.final_row);
    out += ',';
    out += csv_double(it.runtime_seconds);
    return out;
}

// Expands the grid (object: dotted path -> array of values) into one config
// per point of the cartesian product, in row-major order over the sorted
// keys. A single-point grid reduces to the base config with that override.
inline std::vector<std::pair<std::string, json>> expand_grid(const json& base,
                                                             const json& grid) {
    if (!grid.is_object() || grid.empty())
        throw invalid_parameter("sweep: grid must be a non-empty object");
    std::vector<std::string> keys;
    std::vector<const json*> axes;
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        if (!it.value().is_array() || it.value().empty())
            throw invalid_parameter("sweep: grid axis '" + it.key() +
                                    "' must be a non-empty array");
        keys.push_back(it.key());
        axes.push_back(&it.value());
    }
    std::vector<std::pair<std::string, json>> out;
    std::vector<std::size_t> cursor(keys.size(), 0);
    while (true) {
        json doc = base;
        std::string desc;
        for (std::size_t i = 0; i < keys.size(); ++i) {
            const json& v = (*axes[i])[cursor[i]];
            apply_override(doc, keys[i], v);
            if (!desc.empty()) desc += ' ';
            desc += keys[i] + "=" + v.dump();
        }
        out.emplace_back(std::move(desc), std::move(doc));
        std::size_t d = keys.size();
        while (d > 0) {
            --d;
            if (++cursor[d] < axes[d]->size()) break;
            cursor[d] = 0;
            if (d == 0) return out;
        }
    }
}

inline std::vector<SweepItem> sweep(const json& base, const json& grid,
                                    const std::string& out_dir, std::size_t jobs = 1) {
    namespace fs = std::filesystem;
    std::vector<std::pair<std::string, json>> points = expand_grid(base, grid);
    fs::create_directories(out_dir);

    std::vector<SweepItem> items(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        items[i].overrides = points[i].first;
        try {
            items[i].config = config_from_json(points[i].second);
            items[i].hash = config_hash(items[i].config);
            items[i].dir = out_dir + "/run-" + items[i].hash;
        } catch (const std::exception& e) {
            items[i].status = "error";
            items[i].error = e.what();
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            SweepItem& it = items[i];
            if (it.status == "error") continue;  // config rejected above
            const auto t0 = std::chrono::steady_clock::now();
            try {
                if (fs::exists(it.dir + "/metrics.csv") &&
                    fs::exists(it.dir + "/final.ckpt")) {
                    std::vector<MetricsRow> rows = parse_metrics_csv(it.dir + "/metrics.csv");
                    if (!rows.empty()) {
                        it.status = "cached";
                        it.final_row = rows.back();
                        continue;
                    }
                }
                RunOutcome out = run_experiment(it.config, it.dir);
                it.runtime_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                        .count();
                if (out.status == 0) {
                    it.status = "ok";
                    it.final_row = out.rows.back();
                } else {
                    it.status = "error";
                    it.error = out.error;
                    if (!out.rows.empty()) it.final_row = out.rows.back();
                }
            } catch (const std::exception& e) {
                it.status = "error";
                it.error = e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t k = 0; k < jobs; ++k) threads.emplace_back(worker);
        for (std::thread& th : threads) th.join();
    }

    std::ofstream csv(out_dir + "/summary.csv");
    if (!csv) throw evaluation_error("cannot write summary.csv in " + out_dir);
    csv << summary_csv_header << "\n";
    for (const SweepItem& it : items) csv << summary_csv_line(it) << "\n";
    return items;
}

} // namespace fakeclr
