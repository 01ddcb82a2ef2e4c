#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mea/partition.hpp"

namespace mea {

// A weighted cell comparison: per-experiment target/baseline variants plus
// the set of regions it is estimated over. Within region r the compared
// cells fix each triggered coordinate at the target (resp. baseline)
// variant and each non-triggered coordinate at the non-triggered marker.
struct Comparison {
    std::vector<int> target;              // variant index per experiment
    std::vector<int> baseline;
    std::vector<std::uint32_t> support;   // region bits, never the all-false state

    CellLabels target_cell(std::uint32_t bits) const;
    CellLabels baseline_cell(std::uint32_t bits) const;
};

struct RegionLedgerEntry {
    TriggerState region;
    double weight = 0.0;
    double delta = 0.0;
    std::int64_t n_target = 0;
    std::int64_t n_baseline = 0;
    double mean_target = 0.0;       // mean metric: cell means
    double mean_baseline = 0.0;
    double num_mean_target = 0.0;   // ratio metric: per-arm component means
    double den_mean_target = 0.0;
    double num_mean_baseline = 0.0;
    double den_mean_baseline = 0.0;
};

struct EffectEstimate {
    std::string metric;
    MetricKind kind = MetricKind::Mean;
    double point = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double p_value = 1.0;
    VarianceMethod method = VarianceMethod::Analytic;
    std::vector<RegionLedgerEntry> ledger;
    std::vector<std::string> notes;  // dropped regions, degenerate cases
};

struct EstimatorOptions {
    std::optional<VarianceMethod> method;  // default: config.variance_method
    std::optional<double> alpha;           // default: config.alpha
    // When a positively weighted region misses a required cell, drop it and
    // renormalize the remaining weights instead of refusing the estimate.
    bool allow_drop_empty_regions = false;
};

// Effect of launching target_combo versus baseline_combo, weighted over
// the regions impacted by the change (regions triggering at least one
// experiment whose target differs from its baseline). When every
// experiment changes this is the full impacted population. An identity
// comparison returns point 0, se 0, p 1.
EffectEstimate combination_effect(const RegionPartition& partition, const AnalysisConfig& config,
                                  const std::vector<int>& target_combo,
                                  const std::vector<int>& baseline_combo, const MetricSpec& metric,
                                  const EstimatorOptions& options = {});

// Conditional effect of one experiment's target vs baseline variant given
// fixed launch decisions for every other experiment; estimated only over
// regions where the experiment of interest triggers, with weights
// recomputed over that support.
EffectEstimate scenario_effect(const RegionPartition& partition, const AnalysisConfig& config,
                               const std::map<int, int>& scenario_fix, int experiment_of_interest,
                               int target_variant, int baseline_variant, const MetricSpec& metric,
                               const EstimatorOptions& options = {});

struct CombinationEntry {
    std::vector<int> combo;
    EffectEstimate estimate;
    double objective_point = 0.0;
};

struct CombinationReport {
    std::string metric;
    std::string objective_metric;
    double alpha = 0.05;
    double bonferroni_alpha = 0.0;
    long long combination_count = 0;  // prod(ell_j) - 1, the full family
    std::vector<CombinationEntry> results;
    std::vector<std::pair<std::vector<int>, std::string>> skipped;  // combo, reason
    std::optional<std::vector<int>> optimal;
};

// Every non-baseline combination versus the all-baseline combination.
// optimal maximizes the objective metric's point estimate; ties break to
// the lexicographically smallest combination in declared variant order.
// Combinations that cannot be estimated are reported under skipped.
CombinationReport all_combinations(const RegionPartition& partition, const AnalysisConfig& config,
                                   const MetricSpec& metric, const MetricSpec& objective_metric,
                                   const EstimatorOptions& options = {});

// Eq.-style bucketed jackknife: (B-1)/B * sum_b (est(-b) - mean)^2 with
// region counts and weights recomputed per leave-out. Throws
// DegenerateBucketError when a leave-out loses support the estimator needs.
double jackknife_variance(const RegionPartition& partition,
                          const std::function<double(const RegionPartition&)>& estimator);

std::pair<double, double> confidence_interval(double point, double se, double alpha);

// Three-term decomposition of the variance contribution of estimated
// weights for a mean-metric comparison, with Var(w_r) taken as the
// multinomial w_r(1-w_r)/N over the support. The first term is the
// fixed-weight variance; the remaining two are the terms the analytic
// formula ignores.
struct WeightUncertainty {
    double fixed_weight_term = 0.0;
    double weight_variance_term = 0.0;
    double cross_term = 0.0;
    double total() const { return fixed_weight_term + weight_variance_term + cross_term; }
};

WeightUncertainty weight_uncertainty_decomposition(const RegionPartition& partition,
                                                   const AnalysisConfig& config,
                                                   const std::vector<int>& target_combo,
                                                   const std::vector<int>& baseline_combo,
                                                   const MetricSpec& metric);

// Shared helpers used by the report layer and the simulator.
std::vector<int> baseline_combo(const AnalysisConfig& config);
std::vector<int> resolve_combo(const AnalysisConfig& config, const std::vector<std::string>& names);

}  // namespace mea
