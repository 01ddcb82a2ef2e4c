#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mea/errors.hpp"
#include "mea/estimator.hpp"
#include "mea/partition.hpp"
#include "mea/simulator.hpp"

#include "test_util.hpp"

using namespace mea;

namespace {
const EstimatorOptions kAnalytic{VarianceMethod::Analytic, std::nullopt, false};
}

TEST_CASE("same seed reproduces the same table") {
    const SimConfig cfg = appendix_b_preset(2000, 42);
    const UnitTable a = simulate_population(cfg);
    const UnitTable b = simulate_population(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t row = 0; row < a.size(); ++row) {
        CHECK(a.unit_id(row) == b.unit_id(row));
        CHECK(a.variant(0, row) == b.variant(0, row));
        CHECK(a.variant(1, row) == b.variant(1, row));
        CHECK(a.value(0, row) == b.value(0, row));
    }
    const UnitTable c = simulate_population(appendix_b_preset(2000, 43));
    bool any_diff = false;
    for (std::size_t row = 0; row < a.size() && !any_diff; ++row) {
        any_diff = a.value(0, row) != c.value(0, row);
    }
    CHECK(any_diff);
}

TEST_CASE("noiseless null model collapses to the baseline mean") {
    SimConfig cfg = appendix_b_preset(500, 7);
    cfg.noise_sd = 0.0;
    cfg.main_effects.clear();
    cfg.interactions.clear();
    cfg.baseline_mean = 3.25;
    const UnitTable table = simulate_population(cfg);
    for (std::size_t row = 0; row < table.size(); ++row) {
        CHECK(table.value(0, row) == 3.25);
    }
}

TEST_CASE("appendix-b ground truth: 1.2 / 0.70") {
    const SimConfig cfg = appendix_b_preset(1000, 1);
    const GroundTruth gt = true_combination_delta(cfg, {1, 1}, {0, 0});
    CHECK(gt.expected_delta == doctest::Approx(1.2 / 0.70).epsilon(1e-12));
    CHECK(gt.impacted_probability == doctest::Approx(0.70).epsilon(1e-12));
    CHECK(gt.region_effect.at(0b11) == doctest::Approx(11.0));   // -2 -2 +15
    CHECK(gt.region_effect.at(0b01) == doctest::Approx(-2.0));   // v1 alone
    CHECK(gt.region_effect.at(0b10) == doctest::Approx(-2.0));   // enabled alone
    CHECK(gt.region_probability.at(0b11) == doctest::Approx(0.20).epsilon(1e-12));

    // all effects zero -> 0 for every combination
    SimConfig null_cfg = cfg;
    null_cfg.main_effects.clear();
    null_cfg.interactions.clear();
    CHECK(true_combination_delta(null_cfg, {1, 1}, {0, 0}).expected_delta == 0.0);
    CHECK(true_combination_delta(null_cfg, {2, 1}, {0, 0}).expected_delta == 0.0);
}

TEST_CASE("appendix-c ground truth: +4.00, +3.00, +2.35") {
    const SimConfig cfg = appendix_c_preset(1000, 1);
    const GroundTruth c1t2 = true_combination_delta(cfg, {0, 1}, {0, 0});
    const GroundTruth t1c2 = true_combination_delta(cfg, {1, 0}, {0, 0});
    const GroundTruth t1t2 = true_combination_delta(cfg, {1, 1}, {0, 0});
    CHECK(c1t2.expected_delta == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(t1c2.expected_delta == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(t1t2.expected_delta == doctest::Approx(1.2 / 0.51).epsilon(1e-12));
    CHECK(t1t2.expected_delta == doctest::Approx(2.3529411765).epsilon(1e-6));
    // region effects for the joint launch
    CHECK(t1t2.region_effect.at(0b11) == doctest::Approx(-3.0));
    CHECK(t1t2.region_effect.at(0b01) == doctest::Approx(3.0));
    CHECK(t1t2.region_effect.at(0b10) == doctest::Approx(4.0));
}

TEST_CASE("simulated estimate lands on the appendix-b oracle") {
    const SimConfig cfg = appendix_b_preset(200000, 11);
    const UnitTable table = simulate_population(cfg);
    const RegionPartition p = build_partition(table);
    const AnalysisConfig analysis = cfg.analysis_config();
    const EffectEstimate est =
        combination_effect(p, analysis, {1, 1}, {0, 0}, analysis.metrics[0], kAnalytic);
    const double truth = 1.2 / 0.70;
    CHECK(est.ci_lo <= truth);
    CHECK(truth <= est.ci_hi);
    CHECK(std::fabs(est.point - truth) < 0.5);
}

TEST_CASE("univariate effects match the appendix-c pooled expectations") {
    const SimConfig cfg = appendix_c_preset(100000, 21);
    const UnitTable table = simulate_population(cfg);
    const MetricSpec metric = cfg.analysis_config().metrics[0];
    const double e1 = univariate_effect(table, 0, 1, metric);
    const double e2 = univariate_effect(table, 1, 1, metric);
    CHECK(e1 == doctest::Approx(1.5).epsilon(0.2));   // 0.7*3 + 0.3*(-2)
    CHECK(e2 == doctest::Approx(2.5).epsilon(0.15));  // 0.7*4 + 0.3*(-1)

    // decision: both positive, so isolated analysis launches (t1, t2)
    CHECK(univariate_combo_decision(table) == std::vector<int>{1, 1});
}

TEST_CASE("scenario effect on the concurrent appendix-c population") {
    // conditional effect of e2 treatment given e1 treatment launched:
    // 0.7 * (+4) + 0.3 * (-6) = +1.0 over e2's triggered regions
    const SimConfig cfg = appendix_c_preset(100000, 23);
    const UnitTable table = simulate_population(cfg);
    const RegionPartition p = build_partition(table);
    const AnalysisConfig analysis = cfg.analysis_config();
    const EffectEstimate est =
        scenario_effect(p, analysis, {{0, 1}}, 1, 1, 0, analysis.metrics[0], kAnalytic);
    CHECK(est.point == doctest::Approx(1.0).epsilon(0.35));
    // and under the control scenario the interaction never applies: +4
    const EffectEstimate ctrl =
        scenario_effect(p, analysis, {{0, 0}}, 1, 1, 0, analysis.metrics[0], kAnalytic);
    CHECK(ctrl.point == doctest::Approx(4.0).epsilon(0.12));
}

TEST_CASE("univariate effect on a null model stays within noise") {
    SimConfig cfg = appendix_c_preset(50000, 99);
    cfg.main_effects.clear();
    cfg.interactions.clear();
    const UnitTable table = simulate_population(cfg);
    const MetricSpec metric = cfg.analysis_config().metrics[0];
    // se of a two-sample mean difference on ~7.5k units per arm
    const double se = 5.0 * std::sqrt(2.0 / 7500.0);
    CHECK(std::fabs(univariate_effect(table, 0, 1, metric)) < 3.0 * se);
    CHECK(std::fabs(univariate_effect(table, 1, 1, metric)) < 3.0 * se);
}

TEST_CASE("univariate reduction on a single-experiment table") {
    SimConfig cfg = appendix_c_preset(20000, 33);
    const UnitTable table = simulate_population_ex(cfg, {0}, {});
    CHECK(table.config().num_experiments() == 1);
    const MetricSpec metric{cfg.metric_column, MetricKind::Mean, cfg.metric_column, ""};
    const double uni = univariate_effect(table, 0, 1, metric);
    const RegionPartition p = build_partition(table);
    const EffectEstimate est =
        combination_effect(p, table.config(), {1}, {0}, table.config().metrics[0], kAnalytic);
    CHECK(uni == doctest::Approx(est.point).epsilon(1e-12));
    // true effect of t1 alone is +3 (no interaction partner)
    CHECK(uni == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("sequential pipeline ships both treatments") {
    const SimConfig cfg = appendix_c_preset(100000, 55);
    const SequentialTrace trace = sequential_pipeline(cfg);
    CHECK(trace.stage1_winner == 1);
    CHECK(trace.stage1_shipped);
    CHECK(trace.stage1_effects[1] == doctest::Approx(3.0).epsilon(0.1));
    CHECK(trace.stage2_winner == 1);
    CHECK(trace.stage2_shipped);
    // pooled stage-2 effect: 0.7*4 + 0.3*(-6) = 1.0
    CHECK(trace.stage2_pooled == doctest::Approx(1.0).epsilon(0.35));
    CHECK(trace.final_combo == std::vector<int>{1, 1});

    SimConfig three = cfg;
    three.experiments.push_back(cfg.experiments[0]);
    three.experiments[2].spec.id = "e3";
    CHECK_THROWS_AS(sequential_pipeline(three), ConfigError);
}

TEST_CASE("no-interaction config: sequential agrees with the joint optimum") {
    SimConfig cfg = appendix_c_preset(60000, 66);
    cfg.interactions.clear();  // additive world
    const SequentialTrace trace = sequential_pipeline(cfg);
    CHECK(trace.final_combo == std::vector<int>{1, 1});

    const UnitTable table = simulate_population(cfg);
    const RegionPartition p = build_partition(table);
    const AnalysisConfig analysis = cfg.analysis_config();
    const CombinationReport report =
        all_combinations(p, analysis, analysis.metrics[0], analysis.metrics[0], kAnalytic);
    REQUIRE(report.optimal.has_value());
    CHECK(*report.optimal == trace.final_combo);
}

TEST_CASE("strong positive interaction: both pipelines pick the joint launch") {
    SimConfig cfg = appendix_c_preset(60000, 67);
    cfg.interactions.clear();
    cfg.interactions.push_back({{{0, 1}, {1, 1}}, +10.0});
    const SequentialTrace trace = sequential_pipeline(cfg);
    CHECK(trace.final_combo == std::vector<int>{1, 1});
    const UnitTable table = simulate_population(cfg);
    const RegionPartition p = build_partition(table);
    const AnalysisConfig analysis = cfg.analysis_config();
    const CombinationReport report =
        all_combinations(p, analysis, analysis.metrics[0], analysis.metrics[0], kAnalytic);
    REQUIRE(report.optimal.has_value());
    CHECK(*report.optimal == std::vector<int>{1, 1});
}

TEST_CASE("regression on the doubly-triggered region overstates the launch impact") {
    const SimConfig cfg = appendix_b_preset(200000, 77);
    const UnitTable table = simulate_population(cfg);
    const MetricSpec metric = cfg.analysis_config().metrics[0];
    const double reg = regression_r11(table, metric, {1, 1}, {0, 0});
    CHECK(reg == doctest::Approx(11.0).epsilon(0.09));  // within +-1

    const RegionPartition p = build_partition(table);
    const EffectEstimate mea_est = combination_effect(p, cfg.analysis_config(), {1, 1}, {0, 0},
                                                      cfg.analysis_config().metrics[0], kAnalytic);
    CHECK(std::fabs(mea_est.point - 1.2 / 0.70) < 0.5);

    // additive config with homogeneous regions (full overlap): the R11
    // contrast and the weighted estimator are the same quantity
    SimConfig additive = cfg;
    additive.n = 50000;
    additive.interactions.clear();
    additive.experiments[0].trigger_rate = 1.0;
    additive.experiments[1].trigger_rate = 1.0;
    const UnitTable add_table = simulate_population(additive);
    const double add_reg = regression_r11(add_table, metric, {1, 1}, {0, 0});
    const RegionPartition add_p = build_partition(add_table);
    const EffectEstimate add_mea =
        combination_effect(add_p, additive.analysis_config(), {1, 1}, {0, 0},
                           additive.analysis_config().metrics[0], kAnalytic);
    CHECK(add_reg == doctest::Approx(add_mea.point).epsilon(1e-9));

    // empty R11: regression has nothing to fit
    SimConfig disjoint = appendix_c_preset(1000, 3);
    disjoint.trigger_dependence = TriggerDependence::Custom;
    disjoint.custom_joint = {0.4, 0.3, 0.3, 0.0};  // never both
    const UnitTable dt = simulate_population(disjoint);
    CHECK_THROWS_AS(regression_r11(dt, metric, {1, 1}, {0, 0}), MissingCellError);
}

TEST_CASE("coverage experiment is calibrated on a quick run") {
    const SimConfig cfg = appendix_b_preset(20000, 909);
    const CoverageResult result = coverage_experiment(cfg, 200, 0.05, {1, 1}, {0, 0}, kAnalytic);
    CHECK(result.truth == doctest::Approx(1.2 / 0.7).epsilon(1e-12));
    CHECK(result.coverage > 0.90);
    CHECK(result.coverage < 0.99);
    CHECK(result.mean_ci_length > 0.0);
    // deterministic given the master seed
    const CoverageResult again = coverage_experiment(cfg, 200, 0.05, {1, 1}, {0, 0}, kAnalytic);
    CHECK(again.coverage == result.coverage);
    CHECK(again.reps[7].point == result.reps[7].point);
}

TEST_CASE("noiseless simulation recovers the oracle almost exactly") {
    // with noise off, the only variability left is the estimated region
    // weights, an O(1/sqrt(N)) effect that the jackknife picks up
    SimConfig cfg = appendix_b_preset(50000, 13);
    cfg.noise_sd = 0.0;
    const CoverageResult result = coverage_experiment(cfg, 20, 0.05, {1, 1}, {0, 0},
                                                      {VarianceMethod::Jackknife, std::nullopt,
                                                       false});
    for (const auto& rep : result.reps) {
        CHECK(std::fabs(rep.point - result.truth) < 0.2);
    }
    CHECK(result.mean_ci_length < 0.3);
    CHECK(result.coverage >= 0.8);
}

TEST_CASE("estimation error shrinks as N grows (common random numbers)") {
    const long long sizes[] = {5000, 20000, 80000};
    double mae[3] = {0, 0, 0};
    const int seeds = 12;
    for (int s = 0; s < seeds; ++s) {
        for (int i = 0; i < 3; ++i) {
            const SimConfig cfg = appendix_b_preset(sizes[i], 1700 + s);
            const UnitTable table = simulate_population(cfg);
            const RegionPartition p = build_partition(table);
            const EffectEstimate est = combination_effect(
                p, cfg.analysis_config(), {1, 1}, {0, 0}, cfg.analysis_config().metrics[0],
                kAnalytic);
            mae[i] += std::fabs(est.point - 1.2 / 0.7);
        }
    }
    CHECK(mae[0] > mae[1]);
    CHECK(mae[1] > mae[2]);
}

TEST_CASE("nested triggering stays consistent with the oracle") {
    SimConfig cfg = appendix_b_preset(150000, 2500);
    cfg.trigger_dependence = TriggerDependence::Nested;  // e2 nests inside e1 (0.4 < 0.5)
    const GroundTruth gt = true_combination_delta(cfg, {1, 1}, {0, 0});
    // comonotone law: P(11) = 0.4, P(10) = 0.1, P(01) = 0
    CHECK(gt.region_probability.at(0b11) == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(gt.region_probability.at(0b01) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(gt.region_probability.count(0b10) == 0);

    const UnitTable table = simulate_population(cfg);
    const RegionPartition p = build_partition(table);
    const EffectEstimate est = combination_effect(p, cfg.analysis_config(), {1, 1}, {0, 0},
                                                  cfg.analysis_config().metrics[0], kAnalytic);
    CHECK(std::fabs(est.point - gt.expected_delta) < 4.0 * est.se);
}

TEST_CASE("custom joint trigger table is honored") {
    SimConfig cfg = appendix_c_preset(100000, 31);
    cfg.trigger_dependence = TriggerDependence::Custom;
    cfg.custom_joint = {0.1, 0.2, 0.3, 0.4};
    const UnitTable table = simulate_population(cfg);
    const RegionPartition p = build_partition(table);
    auto share = [&](std::uint32_t bits) {
        const Region* r = p.region(bits);
        return r == nullptr ? 0.0 : static_cast<double>(r->count) / table.size();
    };
    CHECK(std::fabs(share(0b00) - 0.1) < 0.01);
    CHECK(std::fabs(share(0b01) - 0.2) < 0.01);
    CHECK(std::fabs(share(0b10) - 0.3) < 0.01);
    CHECK(std::fabs(share(0b11) - 0.4) < 0.01);
}

TEST_CASE("sim config validation") {
    SimConfig cfg = appendix_b_preset(100, 1);
    cfg.experiments[0].variant_split = {0.5, 0.5, 0.1};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = appendix_b_preset(100, 1);
    cfg.experiments[0].trigger_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = appendix_b_preset(0, 1);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = appendix_b_preset(100, 1);
    cfg.interactions.push_back({{{0, 1}}, 1.0});  // single-term interaction
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    CHECK_THROWS_AS(coverage_experiment(appendix_b_preset(100, 1), 0, 0.05, {1, 1}, {0, 0}),
                    ConfigError);
}

TEST_CASE("sim config JSON round trip") {
    const std::string json = R"({
      "experiments": [
        {"id": "e1", "variants": ["c", "t"], "baseline": "c",
         "trigger_rate": 0.5, "variant_split": [0.5, 0.5]},
        {"id": "e2", "variants": ["c", "t"], "baseline": "c",
         "trigger_rate": 0.4, "variant_split": [0.4, 0.6]}
      ],
      "main_effects": [{"experiment": "e1", "variant": "t", "effect": 2.0}],
      "interaction_effects": [
        {"terms": [{"experiment": "e1", "variant": "t"},
                   {"experiment": "e2", "variant": "t"}], "effect": -1.5}
      ],
      "baseline_mean": 1.0, "noise_sd": 2.0, "n": 5000, "seed": 9
    })";
    const SimConfig cfg = sim_config_from_json(json);
    CHECK(cfg.experiments.size() == 2);
    CHECK(cfg.main_effects.at({0, 1}) == 2.0);
    CHECK(cfg.interactions.size() == 1);
    CHECK(cfg.n == 5000);
    const GroundTruth gt = true_combination_delta(cfg, {1, 1}, {0, 0});
    // regions: 11 (0.2): 2 + 4... main e2 has no effect; interaction -1.5
    CHECK(gt.region_effect.at(0b11) == doctest::Approx(2.0 - 1.5));
    CHECK_THROWS_AS(sim_config_from_json("{"), ConfigError);
}
