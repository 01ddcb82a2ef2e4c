#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mea/estimator.hpp"
#include "mea/unit_table.hpp"

namespace mea {

struct SimExperiment {
    ExperimentSpec spec;
    double trigger_rate = 1.0;          // in (0, 1]
    std::vector<double> variant_split;  // one probability per variant, sums to 1
};

enum class TriggerDependence { Independent, Nested, Custom };

// Interaction keyed on realized variant combinations: applies only when
// the unit triggered every named experiment with exactly these variants.
struct InteractionEffect {
    std::vector<std::pair<int, int>> terms;  // (experiment index, variant index)
    double effect = 0.0;
};

// Deliberate Arm-Trigger Invariance violation for diagnostics tests: when
// the source experiment triggers with the given variant, the target
// experiment's trigger rate is multiplied by rate_factor.
struct TriggerContamination {
    int source_experiment = -1;
    int source_variant = 0;
    int target_experiment = -1;
    double rate_factor = 1.0;
};

struct SimConfig {
    std::vector<SimExperiment> experiments;
    TriggerDependence trigger_dependence = TriggerDependence::Independent;
    std::vector<double> custom_joint;  // size 2^k distribution, bit j = experiment j
    std::map<std::pair<int, int>, double> main_effects;  // (experiment, variant) -> effect
    std::vector<InteractionEffect> interactions;
    double baseline_mean = 0.0;
    double noise_sd = 1.0;
    long long n = 0;
    std::uint64_t seed = 0;
    std::string metric_column = "metric1";
    int jackknife_buckets = 20;
    std::optional<TriggerContamination> contamination;

    void validate() const;  // throws ConfigError
    // AnalysisConfig over these experiments and a single mean metric.
    AnalysisConfig analysis_config() const;
    double main_effect(int experiment, int variant) const;
};

// One unit per row: trigger vector from the joint trigger law, one
// independent variant draw per triggered experiment, outcome =
// baseline_mean + main effects + realized interactions + N(0, noise_sd).
// Deterministic: unit i's stream is derived from (seed, i), so estimates
// for growing N reuse common random numbers.
UnitTable simulate_population(const SimConfig& cfg);

// As above but with a subset of experiments still randomized and others
// hard-deployed at a fixed variant (they contribute effects to any unit
// that triggers them, without appearing as an experiment column).
UnitTable simulate_population_ex(const SimConfig& cfg, const std::vector<int>& active_experiments,
                                 const std::map<int, int>& deployed);

struct GroundTruth {
    double expected_delta = 0.0;                   // over the impacted population
    double impacted_probability = 0.0;
    std::map<std::uint32_t, double> region_probability;
    std::map<std::uint32_t, double> region_effect;  // effect of the launch per region
};

// Closed-form region-weighted expected delta of launching combo vs
// baseline_combo; the oracle for all consistency tests.
GroundTruth true_combination_delta(const SimConfig& cfg, const std::vector<int>& combo,
                                   const std::vector<int>& baseline_combo);

struct RepEstimate {
    int rep = 0;
    double point = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool covered = false;
};

struct CoverageResult {
    double truth = 0.0;
    double coverage = 0.0;
    double mean_ci_length = 0.0;
    std::vector<RepEstimate> reps;
};

// reps independent simulations (seeds derived from cfg.seed), each
// estimated with combination_effect; reports the fraction of CIs covering
// the closed-form truth. Parallel over replications (MEA_THREADS).
CoverageResult coverage_experiment(const SimConfig& cfg, int reps, double alpha,
                                   const std::vector<int>& combo,
                                   const std::vector<int>& baseline_combo,
                                   const EstimatorOptions& options = {});

// Plain difference of means between target and the experiment's baseline
// over all units triggered in that experiment, ignoring other experiments.
double univariate_effect(const UnitTable& table, int experiment, int target_variant,
                         const MetricSpec& metric);

// Launch decision by isolated analysis: per experiment the best variant by
// univariate effect, baseline when nothing beats it.
std::vector<int> univariate_combo_decision(const UnitTable& table);

struct SequentialTrace {
    std::vector<double> stage1_effects;  // per variant of experiment 1
    int stage1_winner = 0;
    bool stage1_shipped = false;
    std::vector<double> stage2_effects;  // per variant of experiment 2
    int stage2_winner = 0;
    bool stage2_shipped = false;
    double stage2_pooled = 0.0;          // winner's pooled univariate effect
    std::vector<int> final_combo;
};

// Two-stage timeline for k = 2: experiment 1 runs alone and ships its
// winner when positive; experiment 2 then runs with that winner deployed.
SequentialTrace sequential_pipeline(const SimConfig& cfg);

// Saturated 2x2 interaction-model estimate on the doubly-triggered region:
// the combination-vs-baseline contrast of cell means restricted to the
// target/baseline variants of each experiment.
double regression_r11(const UnitTable& table, const MetricSpec& metric,
                      const std::vector<int>& target_combo, const std::vector<int>& baseline_combo);

// Named presets encoding the two built-in simulation studies.
SimConfig appendix_b_preset(long long n, std::uint64_t seed);
SimConfig appendix_c_preset(long long n, std::uint64_t seed);

SimConfig sim_config_from_json(const std::string& json_text);

// Number of worker threads: MEA_THREADS when set, hardware concurrency
// otherwise, always at least 1.
int thread_budget();

}  // namespace mea
