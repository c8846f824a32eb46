#include "dmot/cli.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dmot/csv.hpp"
#include "dmot/errors.hpp"
#include "dmot/metrics.hpp"

namespace dmot {

namespace {

struct TimingSummary {
    double mean = 0.0;
    double stddev = 0.0;
    int64_t samples = 0;
};

TimingSummary summarize_stage(const RunLog& log, const std::string& stage) {
    TimingSummary s;
    double sum = 0.0, sum2 = 0.0;
    for (const auto& t : log.timings) {
        if (t.stage != stage) continue;
        sum += t.millis;
        sum2 += t.millis * t.millis;
        s.samples += 1;
    }
    if (s.samples > 0) {
        s.mean = sum / s.samples;
        const double var = std::max(0.0, sum2 / s.samples - s.mean * s.mean);
        s.stddev = std::sqrt(var);
    }
    return s;
}

void write_metrics_files(const std::filesystem::path& dir, const RunLog& log,
                         const EvalReport& report) {
    CsvTable metrics;
    metrics.header = {"metric", "value"};
    metrics.rows.push_back({"mota_merged", format_double(report.mota_merged)});
    metrics.rows.push_back({"mota_per_robot_mean", format_double(report.mota_per_robot_mean)});
    for (size_t r = 0; r < report.per_robot_mota.size(); ++r) {
        metrics.rows.push_back(
            {"mota_robot_" + std::to_string(r), format_double(report.per_robot_mota[r])});
    }
    metrics.rows.push_back({"misses", std::to_string(report.misses)});
    metrics.rows.push_back({"false_positives", std::to_string(report.false_positives)});
    metrics.rows.push_back({"mismatches", std::to_string(report.mismatches)});
    metrics.rows.push_back({"gt_total", std::to_string(report.gt_total)});
    metrics.rows.push_back(
        {"alignment_median_translation_m", format_double(report.alignment.median_translation_m)});
    metrics.rows.push_back(
        {"alignment_median_heading_deg", format_double(report.alignment.median_heading_deg)});
    metrics.rows.push_back({"d_match_m", format_double(log.d_match_m)});
    write_csv(dir / "metrics.csv", metrics);

    CsvTable sliding;
    sliding.header = {"end_frame", "mota"};
    const std::vector<double> series = sliding_mota(report.merged, 10.0, log.frame_rate_hz);
    const int64_t window = std::clamp<int64_t>(
        static_cast<int64_t>(std::llround(10.0 * log.frame_rate_hz)), 1,
        static_cast<int64_t>(report.merged.frames.size()));
    for (size_t i = 0; i < series.size(); ++i) {
        sliding.rows.push_back({std::to_string(window - 1 + static_cast<int64_t>(i)),
                                format_double(series[i])});
    }
    write_csv(dir / "sliding_mota.csv", sliding);

    CsvTable hist;
    hist.header = {"kind", "bin_lo", "bin_hi", "count"};
    for (const auto& b : report.alignment.translation_hist) {
        hist.rows.push_back({"translation_m", format_double(b.lo), format_double(b.hi),
                             std::to_string(b.count)});
    }
    for (const auto& b : report.alignment.heading_hist) {
        hist.rows.push_back({"heading_deg", format_double(b.lo), format_double(b.hi),
                             std::to_string(b.count)});
    }
    write_csv(dir / "alignment_hist.csv", hist);
}

void print_summary(const RunLog& log, const EvalReport& report) {
    std::printf("mota_merged %.4f\n", report.mota_merged);
    std::printf("mota_per_robot_mean %.4f\n", report.mota_per_robot_mean);
    std::printf("misses %lld\n", static_cast<long long>(report.misses));
    std::printf("false_positives %lld\n", static_cast<long long>(report.false_positives));
    std::printf("mismatches %lld\n", static_cast<long long>(report.mismatches));
    std::printf("gt_total %lld\n", static_cast<long long>(report.gt_total));
    std::printf("alignment_median_translation_m %.4f\n", report.alignment.median_translation_m);
    std::printf("alignment_median_heading_deg %.4f\n", report.alignment.median_heading_deg);
    for (const char* stage : {"tracking", "alignment"}) {
        const TimingSummary ts = summarize_stage(log, stage);
        if (ts.samples > 0) {
            std::printf("timing_%s_ms mean %.3f std %.3f over %lld cycles\n", stage, ts.mean,
                        ts.stddev, static_cast<long long>(ts.samples));
        }
    }
}

int eval_directory(const std::filesystem::path& dir, std::optional<double> d_match_override) {
    const RunLog log = RunLog::read(dir);
    const double d_match = d_match_override.value_or(log.d_match_m);
    const EvalReport report = evaluate_runlog(log, d_match);
    RunLog annotated = log;
    annotated.d_match_m = d_match;
    write_metrics_files(dir, annotated, report);
    print_summary(log, report);
    return 0;
}

}  // namespace

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("sweep spec file not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("sweep spec is not valid JSON: ") + e.what());
    }
    SweepSpec spec;
    try {
        std::filesystem::path base = j.at("base_config").get<std::string>();
        if (base.is_relative()) base = path.parent_path() / base;
        spec.base_config = base;
        for (const auto& v : j.at("sigma_t_levels")) {
            spec.sigma_t_levels.push_back(v.get<double>());
        }
        spec.seeds_per_level = j.value("seeds_per_level", 1);
        for (const auto& m : j.at("modes")) spec.modes.push_back(m.get<std::string>());
        spec.base_seed = j.value("base_seed", 0);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep spec field error: ") + e.what());
    }
    if (spec.seeds_per_level < 1) throw ConfigError("seeds_per_level must be at least 1");
    for (double level : spec.sigma_t_levels) {
        if (level < 0.0) throw ConfigError("sigma_t levels must be non-negative");
    }
    if (spec.modes.empty()) throw ConfigError("sweep spec needs at least one mode");
    return spec;
}

void apply_mode(ScenarioConfig& cfg, const std::string& mode) {
    if (mode == "off") {
        // The no-compensation baseline: no realignment and no alignment
        // uncertainty in the exchanged covariances.
        cfg.realign.mode = RealignMode::off;
        cfg.realign.reactive_gate = false;
        cfg.tracker.use_alignment_cov = false;
    } else if (mode == "static") {
        cfg.realign.mode = RealignMode::static_landmarks;
        cfg.realign.reactive_gate = false;
    } else if (mode == "dynamic") {
        cfg.realign.mode = RealignMode::dynamic_objects;
        cfg.realign.reactive_gate = false;
    } else if (mode == "dynamic_reactive") {
        cfg.realign.mode = RealignMode::dynamic_objects;
        cfg.realign.reactive_gate = true;
    } else if (mode == "gt_localization") {
        cfg.ground_truth_localization = true;
        cfg.realign.mode = RealignMode::off;
        cfg.realign.reactive_gate = false;
        cfg.error_injection.enabled = false;
        cfg.error_injection.sigma_t_m = 0.0;
    } else {
        throw ConfigError("unknown mode '" + mode +
                          "' (expected off/static/dynamic/dynamic_reactive/gt_localization)");
    }
}

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
            std::optional<uint64_t> seed_override) {
    try {
        ScenarioConfig cfg = load_config(config_path);
        if (seed_override.has_value()) cfg.rng_seed = *seed_override;
        const RunLog log = run_scenario(cfg);
        log.write(out_dir);
        // Evaluate from the written files so `eval` reproduces run output
        // bit for bit.
        return eval_directory(out_dir, std::nullopt);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "run failed: %s\n", e.what());
        return 1;
    }
}

int cmd_sweep(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
              int threads) {
    try {
        const SweepSpec spec = load_sweep_spec(spec_path);
        const ScenarioConfig base = load_config(spec.base_config);
        const uint64_t seed0 = spec.base_seed != 0 ? spec.base_seed : base.rng_seed;

        struct Cell {
            std::string mode;
            double sigma_t = 0.0;
            uint64_t seed = 0;
            EvalReport report;
        };
        std::vector<Cell> cells;
        for (const auto& mode : spec.modes) {
            for (double level : spec.sigma_t_levels) {
                for (int s = 0; s < spec.seeds_per_level; ++s) {
                    cells.push_back({mode, level, seed0 + static_cast<uint64_t>(s), {}});
                }
            }
        }

        std::atomic<size_t> next{0};
        std::atomic<bool> failed{false};
        std::string first_error;
        std::mutex error_mutex;
        auto worker = [&]() {
            while (true) {
                const size_t idx = next.fetch_add(1);
                if (idx >= cells.size() || failed.load()) break;
                Cell& cell = cells[idx];
                try {
                    ScenarioConfig cfg = base;
                    apply_mode(cfg, cell.mode);
                    cfg.error_injection.enabled = cell.sigma_t > 0.0 && cell.mode != "gt_localization";
                    cfg.error_injection.sigma_t_m = cell.mode == "gt_localization" ? 0.0 : cell.sigma_t;
                    cfg.rng_seed = cell.seed;
                    const RunLog log = run_scenario(cfg);
                    cell.report = evaluate_runlog(log, cfg.d_match_m);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!failed.exchange(true)) first_error = e.what();
                }
            }
        };
        const int nthreads = std::max(1, threads);
        std::vector<std::thread> pool;
        for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        if (failed.load()) throw ConfigError("sweep cell failed: " + first_error);

        std::filesystem::create_directories(out_dir);
        CsvTable table;
        table.header = {"mode", "sigma_t", "seed", "mota", "misses", "false_positives",
                        "mismatches", "gt_total", "align_median_trans_m", "align_median_heading_deg"};
        for (const Cell& c : cells) {
            table.rows.push_back({c.mode, format_double(c.sigma_t), std::to_string(c.seed),
                                  format_double(c.report.mota_merged),
                                  std::to_string(c.report.misses),
                                  std::to_string(c.report.false_positives),
                                  std::to_string(c.report.mismatches),
                                  std::to_string(c.report.gt_total),
                                  format_double(c.report.alignment.median_translation_m),
                                  format_double(c.report.alignment.median_heading_deg)});
        }
        write_csv(out_dir / "sweep.csv", table);

        for (const auto& mode : spec.modes) {
            for (double level : spec.sigma_t_levels) {
                double sum = 0.0;
                int count = 0;
                for (const Cell& c : cells) {
                    if (c.mode == mode && c.sigma_t == level) {
                        sum += c.report.mota_merged;
                        ++count;
                    }
                }
                std::printf("mode %s sigma_t %.2f mean_mota %.4f over %d seeds\n", mode.c_str(),
                            level, sum / count, count);
            }
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "sweep failed: %s\n", e.what());
        return 1;
    }
}

int cmd_eval(const std::filesystem::path& runlog_dir, std::optional<double> d_match_override) {
    try {
        return eval_directory(runlog_dir, d_match_override);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "eval failed: %s\n", e.what());
        return 1;
    }
}

}  // namespace dmot
