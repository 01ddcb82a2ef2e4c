#include "mea/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <set>
#include <thread>

#include "json.hpp"

#include "mea/errors.hpp"
#include "mea/hashing.hpp"
#include "mea/partition.hpp"

namespace mea {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void SimConfig::validate() const {
    if (experiments.empty()) throw ConfigError("sim: at least one experiment required");
    if (experiments.size() > 20) throw ConfigError("sim: at most 20 experiments supported");
    if (n < 1) throw ConfigError("sim: population size must be positive");
    if (noise_sd < 0.0) throw ConfigError("sim: noise_sd must be nonnegative");

    for (const auto& e : experiments) {
        if (!(e.trigger_rate > 0.0 && e.trigger_rate <= 1.0)) {
            throw ConfigError("sim: trigger rate for '" + e.spec.id + "' must lie in (0,1]");
        }
        if (e.variant_split.size() != e.spec.variants.size()) {
            throw ConfigError("sim: variant split size mismatch for '" + e.spec.id + "'");
        }
        double total = 0.0;
        for (const double p : e.variant_split) {
            if (p < 0.0) throw ConfigError("sim: negative split probability for '" + e.spec.id + "'");
            total += p;
        }
        if (std::fabs(total - 1.0) > 1e-12) {
            throw ConfigError("sim: variant split for '" + e.spec.id + "' must sum to 1");
        }
    }
    if (trigger_dependence == TriggerDependence::Custom) {
        const std::size_t want = std::size_t{1} << experiments.size();
        if (custom_joint.size() != want) {
            throw ConfigError("sim: custom joint trigger table must have 2^k entries");
        }
        double total = 0.0;
        for (const double p : custom_joint) {
            if (p < 0.0) throw ConfigError("sim: negative custom joint probability");
            total += p;
        }
        if (std::fabs(total - 1.0) > 1e-12) {
            throw ConfigError("sim: custom joint trigger table must sum to 1");
        }
    }
    for (const auto& [key, _] : main_effects) {
        const auto& [e, v] = key;
        if (e < 0 || e >= static_cast<int>(experiments.size()) || v < 0 ||
            v >= static_cast<int>(experiments[e].spec.variants.size())) {
            throw ConfigError("sim: main effect references unknown (experiment, variant)");
        }
    }
    for (const auto& inter : interactions) {
        if (inter.terms.size() < 2) {
            throw ConfigError("sim: interaction needs at least two experiments");
        }
        std::set<int> exps;
        for (const auto& [e, v] : inter.terms) {
            if (e < 0 || e >= static_cast<int>(experiments.size()) || v < 0 ||
                v >= static_cast<int>(experiments[e].spec.variants.size())) {
                throw ConfigError("sim: interaction references unknown (experiment, variant)");
            }
            if (!exps.insert(e).second) {
                throw ConfigError("sim: interaction names an experiment twice");
            }
        }
    }
    if (contamination) {
        if (trigger_dependence != TriggerDependence::Independent) {
            throw ConfigError("sim: trigger contamination requires independent triggering");
        }
        const auto& c = *contamination;
        const int k = static_cast<int>(experiments.size());
        if (c.source_experiment < 0 || c.source_experiment >= k || c.target_experiment < 0 ||
            c.target_experiment >= k || c.source_experiment == c.target_experiment) {
            throw ConfigError("sim: contamination source/target invalid");
        }
        if (c.source_variant < 0 ||
            c.source_variant >= static_cast<int>(experiments[c.source_experiment].spec.variants.size())) {
            throw ConfigError("sim: contamination source variant invalid");
        }
        if (c.rate_factor < 0.0) throw ConfigError("sim: contamination rate factor negative");
    }
    validate_config(analysis_config());
}

AnalysisConfig SimConfig::analysis_config() const {
    AnalysisConfig cfg;
    for (const auto& e : experiments) cfg.experiments.push_back(e.spec);
    MetricSpec metric;
    metric.name = metric_column;
    metric.kind = MetricKind::Mean;
    metric.numerator_column = metric_column;
    cfg.metrics.push_back(metric);
    cfg.jackknife_buckets = jackknife_buckets;
    return cfg;
}

double SimConfig::main_effect(int experiment, int variant) const {
    const auto it = main_effects.find({experiment, variant});
    return it == main_effects.end() ? 0.0 : it->second;
}

namespace {

int categorical(double u, const std::vector<double>& probs) {
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

enum class ExperimentRole { Active, Deployed, Absent };

}  // namespace

UnitTable simulate_population_ex(const SimConfig& cfg, const std::vector<int>& active_experiments,
                                 const std::map<int, int>& deployed) {
    cfg.validate();
    const int k = static_cast<int>(cfg.experiments.size());

    std::vector<ExperimentRole> role(k, ExperimentRole::Absent);
    for (const int j : active_experiments) {
        if (j < 0 || j >= k) throw ConfigError("sim: active experiment index out of range");
        role[j] = ExperimentRole::Active;
    }
    std::vector<int> forced(k, -1);
    for (const auto& [j, v] : deployed) {
        if (j < 0 || j >= k) throw ConfigError("sim: deployed experiment index out of range");
        if (role[j] == ExperimentRole::Active) {
            throw ConfigError("sim: experiment cannot be both active and deployed");
        }
        if (v < 0 || v >= static_cast<int>(cfg.experiments[j].spec.variants.size())) {
            throw ConfigError("sim: deployed variant index out of range");
        }
        role[j] = ExperimentRole::Deployed;
        forced[j] = v;
    }

    AnalysisConfig analysis;
    for (const int j : active_experiments) analysis.experiments.push_back(cfg.experiments[j].spec);
    MetricSpec metric;
    metric.name = cfg.metric_column;
    metric.kind = MetricKind::Mean;
    metric.numerator_column = cfg.metric_column;
    analysis.metrics.push_back(metric);
    analysis.jackknife_buckets = cfg.jackknife_buckets;

    std::vector<UnitRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.n));

    std::vector<double> trig_u(k), var_u(k);
    std::vector<char> triggered(k);
    std::vector<int> variant(k);
    for (long long i = 0; i < cfg.n; ++i) {
        Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
        for (int j = 0; j < k; ++j) trig_u[j] = rng.next_unit();
        for (int j = 0; j < k; ++j) var_u[j] = rng.next_unit();
        const double noise_u1 = rng.next_unit_open();
        const double noise_u2 = rng.next_unit();

        switch (cfg.trigger_dependence) {
            case TriggerDependence::Independent:
                for (int j = 0; j < k; ++j) triggered[j] = trig_u[j] < cfg.experiments[j].trigger_rate;
                break;
            case TriggerDependence::Nested:
                // comonotone coupling: one shared uniform, so experiments
                // with smaller rates trigger inside larger ones
                for (int j = 0; j < k; ++j) triggered[j] = trig_u[0] < cfg.experiments[j].trigger_rate;
                break;
            case TriggerDependence::Custom: {
                const double u = trig_u[0];
                double cum = 0.0;
                std::uint32_t bits = static_cast<std::uint32_t>(cfg.custom_joint.size()) - 1;
                for (std::size_t s = 0; s < cfg.custom_joint.size(); ++s) {
                    cum += cfg.custom_joint[s];
                    if (u < cum) {
                        bits = static_cast<std::uint32_t>(s);
                        break;
                    }
                }
                for (int j = 0; j < k; ++j) triggered[j] = (bits >> j) & 1u;
                break;
            }
        }
        for (int j = 0; j < k; ++j) {
            if (role[j] == ExperimentRole::Absent) triggered[j] = 0;
        }
        for (int j = 0; j < k; ++j) {
            variant[j] = role[j] == ExperimentRole::Deployed
                             ? forced[j]
                             : categorical(var_u[j], cfg.experiments[j].variant_split);
        }
        if (cfg.contamination) {
            const auto& c = *cfg.contamination;
            if (role[c.target_experiment] != ExperimentRole::Absent &&
                triggered[c.source_experiment] && variant[c.source_experiment] == c.source_variant) {
                const double rate =
                    std::min(1.0, cfg.experiments[c.target_experiment].trigger_rate * c.rate_factor);
                triggered[c.target_experiment] = trig_u[c.target_experiment] < rate;
            }
        }

        double outcome = cfg.baseline_mean;
        for (int j = 0; j < k; ++j) {
            if (triggered[j]) outcome += cfg.main_effect(j, variant[j]);
        }
        for (const auto& inter : cfg.interactions) {
            bool match = true;
            for (const auto& [e, v] : inter.terms) {
                if (!triggered[e] || variant[e] != v) {
                    match = false;
                    break;
                }
            }
            if (match) outcome += inter.effect;
        }
        outcome += cfg.noise_sd * std::sqrt(-2.0 * std::log(noise_u1)) * std::cos(kTwoPi * noise_u2);

        UnitRecord rec;
        rec.unit_id = "u" + std::to_string(i);
        rec.variant.reserve(active_experiments.size());
        for (const int j : active_experiments) {
            rec.variant.push_back(triggered[j] ? variant[j] : kNotTriggered);
        }
        rec.values.push_back(outcome);
        records.push_back(std::move(rec));
    }
    return UnitTable(std::move(analysis), std::move(records));
}

UnitTable simulate_population(const SimConfig& cfg) {
    std::vector<int> all(cfg.experiments.size());
    std::iota(all.begin(), all.end(), 0);
    return simulate_population_ex(cfg, all, {});
}

namespace {

// Distribution of the trigger-state vector implied by the joint law.
std::vector<double> trigger_state_distribution(const SimConfig& cfg) {
    const int k = static_cast<int>(cfg.experiments.size());
    std::vector<double> prob(std::size_t{1} << k, 0.0);
    switch (cfg.trigger_dependence) {
        case TriggerDependence::Independent:
            for (std::size_t s = 0; s < prob.size(); ++s) {
                double p = 1.0;
                for (int j = 0; j < k; ++j) {
                    const double r = cfg.experiments[j].trigger_rate;
                    p *= ((s >> j) & 1u) ? r : 1.0 - r;
                }
                prob[s] = p;
            }
            break;
        case TriggerDependence::Nested: {
            std::vector<double> breaks{0.0, 1.0};
            for (const auto& e : cfg.experiments) breaks.push_back(e.trigger_rate);
            std::sort(breaks.begin(), breaks.end());
            for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
                const double a = breaks[i];
                const double b = breaks[i + 1];
                if (b <= a) continue;
                const double u = 0.5 * (a + b);
                std::uint32_t bits = 0;
                for (int j = 0; j < k; ++j) {
                    if (u < cfg.experiments[j].trigger_rate) bits |= (1u << j);
                }
                prob[bits] += b - a;
            }
            break;
        }
        case TriggerDependence::Custom:
            prob = cfg.custom_joint;
            break;
    }
    return prob;
}

double combo_expected_effect(const SimConfig& cfg, const std::vector<int>& combo,
                             std::uint32_t bits) {
    double effect = 0.0;
    const int k = static_cast<int>(cfg.experiments.size());
    for (int j = 0; j < k; ++j) {
        if ((bits >> j) & 1u) effect += cfg.main_effect(j, combo[j]);
    }
    for (const auto& inter : cfg.interactions) {
        bool match = true;
        for (const auto& [e, v] : inter.terms) {
            if (!((bits >> e) & 1u) || combo[e] != v) {
                match = false;
                break;
            }
        }
        if (match) effect += inter.effect;
    }
    return effect;
}

}  // namespace

GroundTruth true_combination_delta(const SimConfig& cfg, const std::vector<int>& combo,
                                   const std::vector<int>& baseline_combo) {
    cfg.validate();
    if (cfg.contamination) {
        throw ConfigError("true_combination_delta: undefined under trigger contamination");
    }
    const int k = static_cast<int>(cfg.experiments.size());
    if (combo.size() != static_cast<std::size_t>(k) ||
        baseline_combo.size() != static_cast<std::size_t>(k)) {
        throw ConfigError("true_combination_delta: one variant per experiment required");
    }

    std::uint32_t changed = 0;
    for (int j = 0; j < k; ++j) {
        if (combo[j] != baseline_combo[j]) changed |= (1u << j);
    }

    const auto prob = trigger_state_distribution(cfg);
    GroundTruth gt;
    double weighted = 0.0;
    for (std::uint32_t bits = 1; bits < prob.size(); ++bits) {
        if (prob[bits] <= 0.0) continue;
        gt.region_probability[bits] = prob[bits];
        const double effect =
            combo_expected_effect(cfg, combo, bits) - combo_expected_effect(cfg, baseline_combo, bits);
        gt.region_effect[bits] = effect;
        if ((bits & changed) != 0) {
            gt.impacted_probability += prob[bits];
            weighted += prob[bits] * effect;
        }
    }
    gt.expected_delta = gt.impacted_probability > 0.0 ? weighted / gt.impacted_probability : 0.0;
    return gt;
}

int thread_budget() {
    if (const char* env = std::getenv("MEA_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

CoverageResult coverage_experiment(const SimConfig& cfg, int reps, double alpha,
                                   const std::vector<int>& combo,
                                   const std::vector<int>& baseline_combo,
                                   const EstimatorOptions& options) {
    if (reps < 1) throw ConfigError("coverage_experiment: reps must be positive");
    const GroundTruth gt = true_combination_delta(cfg, combo, baseline_combo);
    const AnalysisConfig analysis = cfg.analysis_config();
    const MetricSpec metric = analysis.metrics.front();

    EstimatorOptions opts = options;
    if (!opts.alpha) opts.alpha = alpha;

    CoverageResult result;
    result.truth = gt.expected_delta;
    result.reps.resize(static_cast<std::size_t>(reps));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
            SimConfig rep_cfg = cfg;
            rep_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r) + 1);
            const UnitTable table = simulate_population(rep_cfg);
            const RegionPartition partition = build_partition(table);
            const EffectEstimate est =
                combination_effect(partition, analysis, combo, baseline_combo, metric, opts);
            RepEstimate& out = result.reps[static_cast<std::size_t>(r)];
            out.rep = r;
            out.point = est.point;
            out.se = est.se;
            out.ci_lo = est.ci_lo;
            out.ci_hi = est.ci_hi;
            out.covered = est.ci_lo <= gt.expected_delta && gt.expected_delta <= est.ci_hi;
        }
    };
    const int workers = std::min(thread_budget(), reps);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    double covered = 0.0, length = 0.0;
    for (const auto& rep : result.reps) {
        covered += rep.covered ? 1.0 : 0.0;
        length += rep.ci_hi - rep.ci_lo;
    }
    result.coverage = covered / static_cast<double>(reps);
    result.mean_ci_length = length / static_cast<double>(reps);
    return result;
}

double univariate_effect(const UnitTable& table, int experiment, int target_variant,
                         const MetricSpec& metric) {
    if (metric.kind != MetricKind::Mean) {
        throw ConfigError("univariate_effect: mean metrics only");
    }
    const AnalysisConfig& cfg = table.config();
    if (experiment < 0 || experiment >= static_cast<int>(cfg.num_experiments())) {
        throw ConfigError("univariate_effect: experiment index out of range");
    }
    const int column = table.column_index(metric.numerator_column);
    if (column < 0) {
        throw SchemaError("univariate_effect: absent column '" + metric.numerator_column + "'");
    }
    const int baseline = cfg.experiments[experiment].baseline_index();

    double sum_t = 0.0, sum_c = 0.0;
    std::int64_t n_t = 0, n_c = 0;
    const auto& variants = table.variant_column(static_cast<std::size_t>(experiment));
    const auto& values = table.value_column(static_cast<std::size_t>(column));
    for (std::size_t row = 0; row < variants.size(); ++row) {
        const std::int32_t v = variants[row];
        if (v == target_variant) {
            sum_t += values[row];
            ++n_t;
        } else if (v == baseline) {
            sum_c += values[row];
            ++n_c;
        }
    }
    if (n_t == 0 || n_c == 0) {
        throw MissingCellError("univariate_effect: empty " + std::string(n_t == 0 ? "target" : "baseline") +
                               " arm for experiment '" + cfg.experiments[experiment].id + "'");
    }
    return sum_t / static_cast<double>(n_t) - sum_c / static_cast<double>(n_c);
}

std::vector<int> univariate_combo_decision(const UnitTable& table) {
    const AnalysisConfig& cfg = table.config();
    const MetricSpec metric = cfg.metrics.front();
    std::vector<int> combo;
    for (std::size_t j = 0; j < cfg.num_experiments(); ++j) {
        const int baseline = cfg.experiments[j].baseline_index();
        int best = baseline;
        double best_effect = 0.0;
        for (std::size_t v = 0; v < cfg.experiments[j].variants.size(); ++v) {
            if (static_cast<int>(v) == baseline) continue;
            double effect;
            try {
                effect = univariate_effect(table, static_cast<int>(j), static_cast<int>(v), metric);
            } catch (const MissingCellError&) {
                continue;
            }
            if (effect > best_effect) {
                best_effect = effect;
                best = static_cast<int>(v);
            }
        }
        combo.push_back(best);
    }
    return combo;
}

SequentialTrace sequential_pipeline(const SimConfig& cfg) {
    cfg.validate();
    if (cfg.experiments.size() != 2) {
        throw ConfigError("sequential_pipeline: the two-stage construction requires k = 2");
    }
    const MetricSpec metric{cfg.metric_column, MetricKind::Mean, cfg.metric_column, ""};

    SequentialTrace trace;

    // Stage 1: experiment 0 runs alone.
    const UnitTable stage1 = simulate_population_ex(cfg, {0}, {});
    const auto& e1 = cfg.experiments[0].spec;
    const int base1 = e1.baseline_index();
    trace.stage1_effects.assign(e1.variants.size(), 0.0);
    trace.stage1_winner = base1;
    double best1 = 0.0;
    for (std::size_t v = 0; v < e1.variants.size(); ++v) {
        if (static_cast<int>(v) == base1) continue;
        const double effect = univariate_effect(stage1, 0, static_cast<int>(v), metric);
        trace.stage1_effects[v] = effect;
        if (effect > best1) {
            best1 = effect;
            trace.stage1_winner = static_cast<int>(v);
        }
    }
    trace.stage1_shipped = trace.stage1_winner != base1;
    const int deployed1 = trace.stage1_shipped ? trace.stage1_winner : base1;

    // Stage 2: experiment 1 runs with stage-1's decision deployed.
    SimConfig stage2_cfg = cfg;
    stage2_cfg.seed = derive_seed(cfg.seed, 1);
    const UnitTable stage2 = simulate_population_ex(stage2_cfg, {1}, {{0, deployed1}});
    const auto& e2 = cfg.experiments[1].spec;
    const int base2 = e2.baseline_index();
    trace.stage2_effects.assign(e2.variants.size(), 0.0);
    trace.stage2_winner = base2;
    double best2 = 0.0;
    for (std::size_t v = 0; v < e2.variants.size(); ++v) {
        if (static_cast<int>(v) == base2) continue;
        const double effect = univariate_effect(stage2, 0, static_cast<int>(v), metric);
        trace.stage2_effects[v] = effect;
        if (effect > best2) {
            best2 = effect;
            trace.stage2_winner = static_cast<int>(v);
        }
    }
    trace.stage2_shipped = trace.stage2_winner != base2;
    trace.stage2_pooled = trace.stage2_shipped ? best2 : 0.0;

    trace.final_combo = {deployed1, trace.stage2_shipped ? trace.stage2_winner : base2};
    return trace;
}

double regression_r11(const UnitTable& table, const MetricSpec& metric,
                      const std::vector<int>& target_combo,
                      const std::vector<int>& baseline_combo) {
    const AnalysisConfig& cfg = table.config();
    if (cfg.num_experiments() != 2) {
        throw ConfigError("regression_r11: requires exactly 2 experiments");
    }
    if (metric.kind != MetricKind::Mean) {
        throw ConfigError("regression_r11: mean metrics only");
    }
    const int column = table.column_index(metric.numerator_column);
    if (column < 0) throw SchemaError("regression_r11: absent metric column");

    // Restricted to the 2x2 formed by {baseline, target} per experiment,
    // the saturated interaction model's combination contrast equals the
    // corner cell-mean difference.
    double sum[2][2] = {{0, 0}, {0, 0}};
    std::int64_t count[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t row = 0; row < table.size(); ++row) {
        const std::int32_t v0 = table.variant(0, row);
        const std::int32_t v1 = table.variant(1, row);
        if (v0 == kNotTriggered || v1 == kNotTriggered) continue;
        int a, b;
        if (v0 == baseline_combo[0]) {
            a = 0;
        } else if (v0 == target_combo[0]) {
            a = 1;
        } else {
            continue;
        }
        if (v1 == baseline_combo[1]) {
            b = 0;
        } else if (v1 == target_combo[1]) {
            b = 1;
        } else {
            continue;
        }
        sum[a][b] += table.value(static_cast<std::size_t>(column), row);
        count[a][b] += 1;
    }
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            if (count[a][b] == 0) {
                throw MissingCellError("regression_r11: empty cell in the doubly-triggered region");
            }
        }
    }
    return sum[1][1] / static_cast<double>(count[1][1]) -
           sum[0][0] / static_cast<double>(count[0][0]);
}

SimConfig appendix_b_preset(long long n, std::uint64_t seed) {
    SimConfig cfg;
    SimExperiment e1;
    e1.spec = {"e1", {"control", "v1", "v2"}, "control"};
    e1.trigger_rate = 0.5;
    e1.variant_split = {0.4, 0.3, 0.3};
    SimExperiment e2;
    e2.spec = {"e2", {"control", "enabled"}, "control"};
    e2.trigger_rate = 0.4;
    e2.variant_split = {0.4, 0.6};
    cfg.experiments = {e1, e2};
    cfg.main_effects[{0, 1}] = -2.0;  // v1
    cfg.main_effects[{0, 2}] = 5.0;   // v2
    cfg.main_effects[{1, 1}] = -2.0;  // enabled
    cfg.interactions.push_back({{{0, 1}, {1, 1}}, 15.0});  // (v1, enabled)
    cfg.interactions.push_back({{{0, 2}, {1, 0}}, -2.0});  // (v2, control)
    cfg.baseline_mean = 0.0;
    cfg.noise_sd = 5.0;
    cfg.n = n;
    cfg.seed = seed;
    return cfg;
}

SimConfig appendix_c_preset(long long n, std::uint64_t seed) {
    SimConfig cfg;
    SimExperiment e1;
    e1.spec = {"e1", {"control", "treatment"}, "control"};
    e1.trigger_rate = 0.3;
    e1.variant_split = {0.5, 0.5};
    SimExperiment e2;
    e2.spec = {"e2", {"control", "treatment"}, "control"};
    e2.trigger_rate = 0.3;
    e2.variant_split = {0.5, 0.5};
    cfg.experiments = {e1, e2};
    cfg.main_effects[{0, 1}] = 3.0;
    cfg.main_effects[{1, 1}] = 4.0;
    cfg.interactions.push_back({{{0, 1}, {1, 1}}, -10.0});
    cfg.baseline_mean = 0.0;
    cfg.noise_sd = 5.0;
    cfg.n = n;
    cfg.seed = seed;
    return cfg;
}

SimConfig sim_config_from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sim config: invalid JSON: ") + e.what());
    }

    SimConfig cfg;
    try {
        for (const auto& e : doc.at("experiments")) {
            SimExperiment exp;
            exp.spec.id = e.at("id").get<std::string>();
            for (const auto& v : e.at("variants")) exp.spec.variants.push_back(v.get<std::string>());
            exp.spec.baseline = e.at("baseline").get<std::string>();
            exp.trigger_rate = e.at("trigger_rate").get<double>();
            for (const auto& p : e.at("variant_split")) exp.variant_split.push_back(p.get<double>());
            cfg.experiments.push_back(std::move(exp));
        }
        const std::string dep = doc.value("trigger_dependence", "independent");
        if (dep == "independent") {
            cfg.trigger_dependence = TriggerDependence::Independent;
        } else if (dep == "nested") {
            cfg.trigger_dependence = TriggerDependence::Nested;
        } else if (dep == "custom") {
            cfg.trigger_dependence = TriggerDependence::Custom;
            for (const auto& p : doc.at("custom_joint")) cfg.custom_joint.push_back(p.get<double>());
        } else {
            throw ConfigError("sim config: unknown trigger_dependence '" + dep + "'");
        }

        auto experiment_index = [&cfg](const std::string& id) {
            for (std::size_t j = 0; j < cfg.experiments.size(); ++j) {
                if (cfg.experiments[j].spec.id == id) return static_cast<int>(j);
            }
            throw ConfigError("sim config: unknown experiment '" + id + "'");
        };
        auto variant_index = [&cfg](int e, const std::string& name) {
            const int v = cfg.experiments[e].spec.variant_index(name);
            if (v < 0) {
                throw ConfigError("sim config: unknown variant '" + name + "' for experiment '" +
                                  cfg.experiments[e].spec.id + "'");
            }
            return v;
        };
        for (const auto& m : doc.value("main_effects", nlohmann::json::array())) {
            const int e = experiment_index(m.at("experiment").get<std::string>());
            const int v = variant_index(e, m.at("variant").get<std::string>());
            cfg.main_effects[{e, v}] = m.at("effect").get<double>();
        }
        for (const auto& spec : doc.value("interaction_effects", nlohmann::json::array())) {
            InteractionEffect inter;
            for (const auto& t : spec.at("terms")) {
                const int e = experiment_index(t.at("experiment").get<std::string>());
                inter.terms.emplace_back(e, variant_index(e, t.at("variant").get<std::string>()));
            }
            inter.effect = spec.at("effect").get<double>();
            cfg.interactions.push_back(std::move(inter));
        }
        cfg.baseline_mean = doc.value("baseline_mean", 0.0);
        cfg.noise_sd = doc.value("noise_sd", 1.0);
        cfg.n = doc.value("n", 0LL);
        cfg.seed = doc.value("seed", 0ULL);
        cfg.metric_column = doc.value("metric", "metric1");
        cfg.jackknife_buckets = doc.value("jackknife_buckets", 20);
        if (doc.contains("contamination")) {
            const auto& c = doc.at("contamination");
            TriggerContamination tc;
            tc.source_experiment = experiment_index(c.at("source").get<std::string>());
            tc.source_variant = variant_index(tc.source_experiment, c.at("variant").get<std::string>());
            tc.target_experiment = experiment_index(c.at("target").get<std::string>());
            tc.rate_factor = c.at("rate_factor").get<double>();
            cfg.contamination = tc;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sim config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace mea
