#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "mea/diagnostics.hpp"
#include "mea/errors.hpp"
#include "mea/estimator.hpp"
#include "mea/hashing.hpp"
#include "mea/partition.hpp"
#include "mea/power.hpp"
#include "mea/report.hpp"
#include "mea/simulator.hpp"
#include "mea/unit_table.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDegenerate = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw mea::ConfigError("cannot open file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw mea::ConfigError("cannot write file: " + path.string());
    out << content;
}

int exit_code_for(const mea::Error& e) {
    if (dynamic_cast<const mea::EmptySupportError*>(&e) ||
        dynamic_cast<const mea::MissingCellError*>(&e) ||
        dynamic_cast<const mea::InsufficientDataError*>(&e) ||
        dynamic_cast<const mea::ZeroDenominatorError*>(&e) ||
        dynamic_cast<const mea::DegenerateBucketError*>(&e)) {
        return kExitDegenerate;
    }
    return kExitConfig;
}

mea::UnitTable load_table(const std::string& data_path, const std::string& config_path) {
    const mea::AnalysisConfig config = mea::config_from_json(read_file(config_path));
    std::ifstream data(data_path, std::ios::binary);
    if (!data) throw mea::ConfigError("cannot open file: " + data_path);
    return mea::ingest_unit_table(data, config);
}

struct AnalyzeArgs {
    std::string data, config, out;
    std::uint64_t seed = 0;
    std::string variance;
    bool allow_drop = false;
};

int cmd_analyze(const AnalyzeArgs& args) {
    mea::UnitTable table = load_table(args.data, args.config);
    const mea::RegionPartition partition = mea::build_partition(table);

    mea::AnalyzeFlags flags;
    flags.seed = args.seed;
    flags.allow_drop_empty_regions = args.allow_drop;
    if (args.variance == "analytic") {
        flags.variance = mea::VarianceMethod::Analytic;
    } else if (args.variance == "jackknife") {
        flags.variance = mea::VarianceMethod::Jackknife;
    } else if (!args.variance.empty()) {
        throw mea::ConfigError("--variance must be 'analytic' or 'jackknife'");
    }

    const mea::Json report = mea::build_analysis_report(table, partition, flags);
    fs::create_directories(args.out);
    write_file(fs::path(args.out) / "report.json", mea::dump_report(report));
    write_file(fs::path(args.out) / "report.md", mea::render_markdown(report));
    std::cout << "wrote " << (fs::path(args.out) / "report.json").string() << "\n";
    return 0;
}

int cmd_diagnose(const std::string& data, const std::string& config, const std::string& out) {
    mea::UnitTable table = load_table(data, config);
    const mea::Json report = mea::build_diagnostics_report(table);
    fs::create_directories(out);
    write_file(fs::path(out) / "diagnostics.json", mea::dump_report(report));
    for (const auto& dr : mea::invariance_check(table)) {
        if (dr.verdict == mea::Verdict::Skipped) continue;
        std::ostringstream os;
        mea::write_bar_chart_csv(mea::export_bar_chart_data(dr), os);
        write_file(fs::path(out) / ("barchart_" + dr.source_id + ".csv"), os.str());
    }
    std::cout << "wrote " << (fs::path(out) / "diagnostics.json").string() << "\n";
    return 0;
}

struct SimulateArgs {
    std::string preset, config, out;
    int reps = 0;
    std::uint64_t seed = 0;
    long long n = 0;  // 0: preset default
    std::string combo;
};

std::vector<int> parse_combo(const mea::AnalysisConfig& cfg, const std::string& text) {
    if (text.empty()) {
        // default: first non-baseline variant of each experiment
        std::vector<int> combo;
        for (const auto& e : cfg.experiments) {
            const int baseline = e.baseline_index();
            int pick = baseline;
            for (std::size_t v = 0; v < e.variants.size(); ++v) {
                if (static_cast<int>(v) != baseline) {
                    pick = static_cast<int>(v);
                    break;
                }
            }
            combo.push_back(pick);
        }
        return combo;
    }
    std::vector<std::string> names;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            names.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    names.push_back(cur);
    return mea::resolve_combo(cfg, names);
}

void write_coverage_csv(const fs::path& path, const mea::CoverageResult& result) {
    std::ostringstream os;
    os << "rep,point,se,ci_lo,ci_hi,covered\n";
    char buf[128];
    for (const auto& rep : result.reps) {
        std::snprintf(buf, sizeof(buf), "%d,%.12g,%.12g,%.12g,%.12g,%d\n", rep.rep, rep.point,
                      rep.se, rep.ci_lo, rep.ci_hi, rep.covered ? 1 : 0);
        os << buf;
    }
    write_file(path, os.str());
}

int simulate_coverage(const mea::SimConfig& cfg, const SimulateArgs& args, const std::string& label,
                      const std::vector<int>& combo, const std::vector<int>& baseline) {
    const mea::CoverageResult result =
        mea::coverage_experiment(cfg, args.reps, 0.05, combo, baseline);
    fs::create_directories(args.out);
    write_coverage_csv(fs::path(args.out) / "estimates.csv", result);

    mea::Json summary;
    summary["mode"] = label;
    summary["n"] = cfg.n;
    summary["reps"] = args.reps;
    summary["seed"] = cfg.seed;
    summary["truth"] = mea::round12(result.truth);
    summary["coverage"] = mea::round12(result.coverage);
    summary["mean_ci_length"] = mea::round12(result.mean_ci_length);
    write_file(fs::path(args.out) / "summary.json", mea::dump_report(summary));

    std::printf("%s: n=%lld reps=%d truth=%.4f coverage=%.3f mean CI length=%.4f\n", label.c_str(),
                cfg.n, args.reps, result.truth, result.coverage, result.mean_ci_length);
    return 0;
}

// Appendix-C-style study: per replication, decide a launch combination by
// isolated univariate analysis, by a two-stage sequential rollout, and by
// joint combination analysis; tabulate decisions and estimates.
int simulate_decisions(const mea::SimConfig& cfg, const SimulateArgs& args) {
    const mea::AnalysisConfig analysis = cfg.analysis_config();
    const mea::MetricSpec metric = analysis.metrics.front();
    const std::vector<int> base = mea::baseline_combo(analysis);

    std::ostringstream csv;
    csv << "rep,univariate_decision,sequential_decision,mea_decision,mea_optimal_estimate\n";

    auto combo_label = [&analysis](const std::vector<int>& combo) {
        std::string s;
        for (std::size_t j = 0; j < combo.size(); ++j) {
            if (j > 0) s.push_back('+');
            s += analysis.experiments[j].variants[combo[j]];
        }
        return s;
    };

    std::map<std::string, int> univariate_votes, sequential_votes, mea_votes;
    std::map<std::string, std::pair<double, int>> mea_estimates;  // combo -> (sum, n)
    for (int r = 0; r < args.reps; ++r) {
        mea::SimConfig rep_cfg = cfg;
        rep_cfg.seed = mea::derive_seed(cfg.seed, static_cast<std::uint64_t>(r) + 1);

        const mea::UnitTable table = mea::simulate_population(rep_cfg);
        const mea::RegionPartition partition = mea::build_partition(table);

        const std::vector<int> univariate = mea::univariate_combo_decision(table);
        const mea::SequentialTrace seq = mea::sequential_pipeline(rep_cfg);
        const mea::CombinationReport report =
            mea::all_combinations(partition, analysis, metric, metric, {});

        univariate_votes[combo_label(univariate)] += 1;
        sequential_votes[combo_label(seq.final_combo)] += 1;
        double optimal_estimate = 0.0;
        if (report.optimal) {
            mea_votes[combo_label(*report.optimal)] += 1;
            for (const auto& entry : report.results) {
                auto& agg = mea_estimates[combo_label(entry.combo)];
                agg.first += entry.estimate.point;
                agg.second += 1;
                if (entry.combo == *report.optimal) optimal_estimate = entry.estimate.point;
            }
        }
        csv << r << ',' << combo_label(univariate) << ',' << combo_label(seq.final_combo) << ','
            << (report.optimal ? combo_label(*report.optimal) : "-") << ',' << optimal_estimate
            << "\n";
    }

    fs::create_directories(args.out);
    write_file(fs::path(args.out) / "decisions.csv", csv.str());

    auto modal = [](const std::map<std::string, int>& votes) {
        std::string best = "-";
        int count = -1;
        for (const auto& [label, n] : votes) {
            if (n > count) {
                best = label;
                count = n;
            }
        }
        return best;
    };

    mea::Json summary;
    summary["mode"] = "decision-comparison";
    summary["n"] = cfg.n;
    summary["reps"] = args.reps;
    summary["seed"] = cfg.seed;
    summary["univariate_decision"] = modal(univariate_votes);
    summary["sequential_decision"] = modal(sequential_votes);
    summary["mea_decision"] = modal(mea_votes);
    mea::Json ests;
    for (const auto& [label, agg] : mea_estimates) {
        ests[label] = mea::round12(agg.first / agg.second);
    }
    summary["mea_mean_estimates"] = ests;
    write_file(fs::path(args.out) / "summary.json", mea::dump_report(summary));

    std::printf("| Approach | Decision |\n|---|---|\n");
    std::printf("| Concurrent univariate | (%s) |\n", modal(univariate_votes).c_str());
    std::printf("| Sequential | (%s) |\n", modal(sequential_votes).c_str());
    std::printf("| MEA joint | (%s) |\n", modal(mea_votes).c_str());
    std::printf("\n| Combination | MEA mean estimate |\n|---|---|\n");
    for (const auto& [label, agg] : mea_estimates) {
        std::printf("| (%s) | %+.2f |\n", label.c_str(), agg.first / agg.second);
    }
    return 0;
}

int cmd_simulate(const SimulateArgs& args) {
    if (args.reps < 1) {
        std::cerr << "error: --reps must be positive\n";
        return kExitUsage;
    }
    if (args.preset.empty() == args.config.empty()) {
        std::cerr << "error: exactly one of --preset / --config is required\n";
        return kExitUsage;
    }
    if (!args.preset.empty()) {
        if (args.preset == "appendix-b") {
            const long long n = args.n > 0 ? args.n : 200000;
            const mea::SimConfig cfg = mea::appendix_b_preset(n, args.seed);
            // launch impact of (v1, enabled) vs (control, control)
            return simulate_coverage(cfg, args, "appendix-b", {1, 1}, {0, 0});
        }
        if (args.preset == "appendix-c") {
            const long long n = args.n > 0 ? args.n : 100000;
            const mea::SimConfig cfg = mea::appendix_c_preset(n, args.seed);
            return simulate_decisions(cfg, args);
        }
        std::cerr << "error: unknown preset '" << args.preset << "'\n";
        return kExitUsage;
    }
    mea::SimConfig cfg = mea::sim_config_from_json(read_file(args.config));
    if (args.n > 0) cfg.n = args.n;
    if (args.seed != 0) cfg.seed = args.seed;
    const mea::AnalysisConfig analysis = cfg.analysis_config();
    const std::vector<int> combo = parse_combo(analysis, args.combo);
    return simulate_coverage(cfg, args, "custom", combo, mea::baseline_combo(analysis));
}

int cmd_power(int k, int ell, double rate, const std::string& format) {
    if (k < 1 || ell < 2 || !(rate > 0.0 && rate <= 1.0)) {
        std::cerr << "error: require k >= 1, ell >= 2, rate in (0,1]\n";
        return kExitUsage;
    }
    if (format == "csv") {
        std::printf("k,variance_ratio,sample_size_multiplier\n");
        for (int i = 1; i <= k; ++i) {
            const double ratio = mea::variance_ratio(i, ell, rate);
            std::printf("%d,%.6g,%.6g\n", i, ratio, 1.0 / ratio);
        }
    } else {
        std::printf("| k | variance ratio | sample-size multiplier |\n|---|---|---|\n");
        for (int i = 1; i <= k; ++i) {
            const double ratio = mea::variance_ratio(i, ell, rate);
            std::printf("| %d | %.2f | %.2f |\n", i, ratio, 1.0 / ratio);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mea: consistent joint analysis of overlapping experiments"};
    app.require_subcommand(1);

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand("analyze", "full analysis report over a unit-level CSV");
    analyze->add_option("--data", analyze_args.data, "unit-level CSV")->required();
    analyze->add_option("--config", analyze_args.config, "analysis config JSON")->required();
    analyze->add_option("--out", analyze_args.out, "output directory")->required();
    analyze->add_option("--seed", analyze_args.seed, "seed echoed into the report");
    analyze->add_option("--variance", analyze_args.variance, "jackknife|analytic");
    analyze->add_flag("--allow-drop-empty-regions", analyze_args.allow_drop,
                      "renormalize over remaining regions when a cell is empty");

    std::string diag_data, diag_config, diag_out;
    CLI::App* diagnose = app.add_subcommand("diagnose", "arm-trigger invariance diagnostics only");
    diagnose->add_option("--data", diag_data, "unit-level CSV")->required();
    diagnose->add_option("--config", diag_config, "analysis config JSON")->required();
    diagnose->add_option("--out", diag_out, "output directory")->required();

    SimulateArgs sim_args;
    CLI::App* simulate = app.add_subcommand("simulate", "synthetic-population studies");
    simulate->add_option("--preset", sim_args.preset, "appendix-b | appendix-c");
    simulate->add_option("--config", sim_args.config, "simulation config JSON");
    simulate->add_option("--reps", sim_args.reps, "number of replications")->required();
    simulate->add_option("--out", sim_args.out, "output directory")->required();
    simulate->add_option("--seed", sim_args.seed, "master seed");
    simulate->add_option("--n", sim_args.n, "population size override");
    simulate->add_option("--combo", sim_args.combo,
                         "comma-separated target variants (custom configs)");

    int power_k = 0, power_ell = 0;
    double power_rate = 0.0;
    std::string power_format = "markdown";
    CLI::App* power = app.add_subcommand("power", "variance ratio vs coordinated factorial");
    power->add_option("--k", power_k, "number of experiments")->required();
    power->add_option("--ell", power_ell, "variants per experiment")->required();
    power->add_option("--rate", power_rate, "uniform trigger rate")->required();
    power->add_option("--format", power_format, "markdown|csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*analyze) return cmd_analyze(analyze_args);
        if (*diagnose) return cmd_diagnose(diag_data, diag_config, diag_out);
        if (*simulate) return cmd_simulate(sim_args);
        if (*power) return cmd_power(power_k, power_ell, power_rate, power_format);
    } catch (const mea::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitUsage;
}
