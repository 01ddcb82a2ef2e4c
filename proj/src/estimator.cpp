#include "mea/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mea/errors.hpp"
#include "mea/stats.hpp"

namespace mea {

CellLabels Comparison::target_cell(std::uint32_t bits) const {
    CellLabels labels(target.size(), kNotTriggered);
    for (std::size_t j = 0; j < target.size(); ++j) {
        if ((bits >> j) & 1u) labels[j] = target[j];
    }
    return labels;
}

CellLabels Comparison::baseline_cell(std::uint32_t bits) const {
    CellLabels labels(baseline.size(), kNotTriggered);
    for (std::size_t j = 0; j < baseline.size(); ++j) {
        if ((bits >> j) & 1u) labels[j] = baseline[j];
    }
    return labels;
}

std::vector<int> baseline_combo(const AnalysisConfig& config) {
    std::vector<int> combo;
    combo.reserve(config.experiments.size());
    for (const auto& e : config.experiments) combo.push_back(e.baseline_index());
    return combo;
}

std::vector<int> resolve_combo(const AnalysisConfig& config, const std::vector<std::string>& names) {
    if (names.size() != config.num_experiments()) {
        throw ConfigError("combination must name one variant per experiment");
    }
    std::vector<int> combo(names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const int v = config.experiments[j].variant_index(names[j]);
        if (v < 0) {
            throw ConfigError("unknown variant '" + names[j] + "' for experiment '" +
                              config.experiments[j].id + "'");
        }
        combo[j] = v;
    }
    return combo;
}

namespace {

struct EvalResult {
    double point = 0.0;
    double variance = 0.0;  // analytic
    std::vector<RegionLedgerEntry> ledger;
    std::vector<std::string> notes;
};

struct RegionCells {
    std::uint32_t bits = 0;
    double weight = 0.0;
    const CellStats* target = nullptr;
    const CellStats* baseline = nullptr;
    bool identical = false;
};

// Resolve cells per support region and apply the missing-cell policy:
// refuse (MissingCellError) unless dropping is allowed, in which case the
// remaining weights are renormalized.
std::vector<RegionCells> resolve_cells(const RegionPartition& partition, const Comparison& cmp,
                                       bool allow_drop, std::vector<std::string>& notes) {
    const auto weights = region_weights(partition, cmp.support);

    std::vector<RegionCells> resolved;
    std::vector<std::string> missing;
    double dropped_weight = 0.0;
    for (const std::uint32_t bits : cmp.support) {
        const double w = weights.at(bits);
        if (w == 0.0) continue;  // empty region contributes nothing
        RegionCells rc;
        rc.bits = bits;
        rc.weight = w;
        const CellLabels t = cmp.target_cell(bits);
        const CellLabels b = cmp.baseline_cell(bits);
        rc.identical = (t == b);
        rc.target = partition.cell(bits, t);
        rc.baseline = partition.cell(bits, b);
        if (!rc.identical &&
            (rc.target == nullptr || rc.target->n == 0 || rc.baseline == nullptr ||
             rc.baseline->n == 0)) {
            TriggerState st{bits, partition.num_experiments()};
            std::ostringstream os;
            os << "region " << st.to_string() << " (weight " << w << ") lacks "
               << ((rc.target == nullptr || rc.target->n == 0) ? "target" : "baseline") << " cell";
            missing.push_back(os.str());
            dropped_weight += w;
            continue;
        }
        resolved.push_back(rc);
    }

    if (!missing.empty()) {
        std::ostringstream os;
        for (std::size_t i = 0; i < missing.size(); ++i) {
            if (i > 0) os << "; ";
            os << missing[i];
        }
        if (!allow_drop) throw MissingCellError(os.str());
        notes.push_back("dropped: " + os.str());
        if (resolved.empty()) {
            throw EmptySupportError("all support regions lack required cells");
        }
        const double keep = 1.0 - dropped_weight;
        for (auto& rc : resolved) rc.weight /= keep;
    }
    if (resolved.empty()) {
        throw EmptySupportError("no support region holds units");
    }
    return resolved;
}

// Weighted mean-difference estimate with the per-region two-sample
// variance: Var(delta_r) = s2_t/n_t + s2_c/n_c.
EvalResult eval_mean(const RegionPartition& partition, const Comparison& cmp, int column,
                     bool allow_drop) {
    EvalResult out;
    const auto cells = resolve_cells(partition, cmp, allow_drop, out.notes);
    for (const auto& rc : cells) {
        RegionLedgerEntry entry;
        entry.region = TriggerState{rc.bits, partition.num_experiments()};
        entry.weight = rc.weight;
        if (rc.identical) {
            if (rc.target != nullptr && rc.target->n > 0) {
                entry.n_target = entry.n_baseline = rc.target->n;
                entry.mean_target = entry.mean_baseline = rc.target->mean(column);
            }
        } else {
            entry.n_target = rc.target->n;
            entry.n_baseline = rc.baseline->n;
            entry.mean_target = rc.target->mean(column);
            entry.mean_baseline = rc.baseline->mean(column);
            entry.delta = entry.mean_target - entry.mean_baseline;
            const double var_delta =
                rc.target->sample_variance(column) / static_cast<double>(rc.target->n) +
                rc.baseline->sample_variance(column) / static_cast<double>(rc.baseline->n);
            out.variance += rc.weight * rc.weight * var_delta;
        }
        out.point += entry.weight * entry.delta;
        out.ledger.push_back(entry);
    }
    return out;
}

// Difference of ratios of weighted means, Delta-method variance from the
// first-order expansion with independent arms and independent regions:
//   Var(X/Y) ~ Var(X)/Y^2 + X^2 Var(Y)/Y^4 - 2 X Cov(X,Y)/Y^3.
EvalResult eval_ratio(const RegionPartition& partition, const Comparison& cmp, int num_column,
                      int den_column, int pair, bool allow_drop) {
    EvalResult out;
    const auto cells = resolve_cells(partition, cmp, allow_drop, out.notes);

    bool all_identical = true;
    double num_t = 0.0, den_t = 0.0, num_c = 0.0, den_c = 0.0;
    double var_num_t = 0.0, var_den_t = 0.0, cov_t = 0.0;
    double var_num_c = 0.0, var_den_c = 0.0, cov_c = 0.0;
    for (const auto& rc : cells) {
        RegionLedgerEntry entry;
        entry.region = TriggerState{rc.bits, partition.num_experiments()};
        entry.weight = rc.weight;
        const CellStats* t = rc.target;
        const CellStats* b = rc.identical ? rc.target : rc.baseline;
        if (!rc.identical) all_identical = false;
        if (t == nullptr || t->n == 0) {
            // identity comparison over a region with no matching cell
            out.ledger.push_back(entry);
            continue;
        }
        const double w = rc.weight;
        const double w2 = w * w;
        entry.n_target = t->n;
        entry.n_baseline = b->n;
        entry.num_mean_target = t->mean(num_column);
        entry.den_mean_target = t->mean(den_column);
        entry.num_mean_baseline = b->mean(num_column);
        entry.den_mean_baseline = b->mean(den_column);
        num_t += w * entry.num_mean_target;
        den_t += w * entry.den_mean_target;
        num_c += w * entry.num_mean_baseline;
        den_c += w * entry.den_mean_baseline;
        var_num_t += w2 * t->sample_variance(num_column) / static_cast<double>(t->n);
        var_den_t += w2 * t->sample_variance(den_column) / static_cast<double>(t->n);
        cov_t += w2 * t->sample_covariance(pair, num_column, den_column) / static_cast<double>(t->n);
        var_num_c += w2 * b->sample_variance(num_column) / static_cast<double>(b->n);
        var_den_c += w2 * b->sample_variance(den_column) / static_cast<double>(b->n);
        cov_c += w2 * b->sample_covariance(pair, num_column, den_column) / static_cast<double>(b->n);
        out.ledger.push_back(entry);
    }

    if (all_identical) {
        // target and baseline are the same cells everywhere: the estimator
        // is identically zero.
        out.point = 0.0;
        out.variance = 0.0;
        return out;
    }
    if (den_t == 0.0 || den_c == 0.0) {
        throw ZeroDenominatorError("ratio metric: weighted denominator mean is zero");
    }
    const double ratio_t = num_t / den_t;
    const double ratio_c = num_c / den_c;
    out.point = ratio_t - ratio_c;
    const double var_rt = var_num_t / (den_t * den_t) +
                          ratio_t * ratio_t * var_den_t / (den_t * den_t) -
                          2.0 * ratio_t * cov_t / (den_t * den_t);
    const double var_rc = var_num_c / (den_c * den_c) +
                          ratio_c * ratio_c * var_den_c / (den_c * den_c) -
                          2.0 * ratio_c * cov_c / (den_c * den_c);
    out.variance = var_rt + var_rc;
    return out;
}

EvalResult eval_metric(const RegionPartition& partition, const Comparison& cmp,
                       const MetricSpec& metric, bool allow_drop) {
    const int num_col = partition.column_index(metric.numerator_column);
    if (num_col < 0) {
        throw SchemaError("metric '" + metric.name + "' references absent column '" +
                          metric.numerator_column + "'");
    }
    if (metric.kind == MetricKind::Mean) {
        return eval_mean(partition, cmp, num_col, allow_drop);
    }
    const int den_col = partition.column_index(metric.denominator_column);
    if (den_col < 0) {
        throw SchemaError("metric '" + metric.name + "' references absent column '" +
                          metric.denominator_column + "'");
    }
    const int pair = partition.ratio_pair_index(num_col, den_col);
    if (pair < 0) {
        throw SchemaError("partition was not built with cross-products for ratio metric '" +
                          metric.name + "'");
    }
    return eval_ratio(partition, cmp, num_col, den_col, pair, allow_drop);
}

EffectEstimate finish_estimate(const std::string& metric_name, MetricKind kind, EvalResult eval,
                               double variance, VarianceMethod method, double alpha) {
    EffectEstimate est;
    est.metric = metric_name;
    est.kind = kind;
    est.point = eval.point;
    est.se = variance > 0.0 ? std::sqrt(variance) : 0.0;
    est.method = method;
    std::tie(est.ci_lo, est.ci_hi) = confidence_interval(est.point, est.se, alpha);
    est.p_value = normal_two_sided_p(est.point, est.se);
    est.ledger = std::move(eval.ledger);
    est.notes = std::move(eval.notes);
    return est;
}

EffectEstimate estimate_comparison(const RegionPartition& partition, const AnalysisConfig& config,
                                   const Comparison& cmp, const MetricSpec& metric,
                                   const EstimatorOptions& options) {
    const double alpha = options.alpha.value_or(config.alpha);
    const VarianceMethod method = options.method.value_or(config.variance_method);
    EvalResult eval = eval_metric(partition, cmp, metric, options.allow_drop_empty_regions);

    double variance = eval.variance;
    if (method == VarianceMethod::Jackknife) {
        const bool allow_drop = options.allow_drop_empty_regions;
        variance = jackknife_variance(partition, [&](const RegionPartition& reduced) {
            return eval_metric(reduced, cmp, metric, allow_drop).point;
        });
    }
    return finish_estimate(metric.name, metric.kind, std::move(eval), variance, method, alpha);
}

void check_combo(const AnalysisConfig& config, const std::vector<int>& combo, const char* what) {
    if (combo.size() != config.num_experiments()) {
        throw ConfigError(std::string(what) + ": one variant per experiment required");
    }
    for (std::size_t j = 0; j < combo.size(); ++j) {
        if (combo[j] < 0 || combo[j] >= static_cast<int>(config.experiments[j].variants.size())) {
            throw ConfigError(std::string(what) + ": variant index out of range for experiment '" +
                              config.experiments[j].id + "'");
        }
    }
}

}  // namespace

EffectEstimate combination_effect(const RegionPartition& partition, const AnalysisConfig& config,
                                  const std::vector<int>& target_combo,
                                  const std::vector<int>& baseline_combo, const MetricSpec& metric,
                                  const EstimatorOptions& options) {
    check_combo(config, target_combo, "combination_effect target");
    check_combo(config, baseline_combo, "combination_effect baseline");

    std::uint32_t changed = 0;
    for (std::size_t j = 0; j < target_combo.size(); ++j) {
        if (target_combo[j] != baseline_combo[j]) changed |= (1u << j);
    }
    if (changed == 0) {
        // Identity launch: no unit's experience changes.
        EffectEstimate est;
        est.metric = metric.name;
        est.kind = metric.kind;
        est.method = options.method.value_or(config.variance_method);
        est.ci_lo = est.ci_hi = 0.0;
        est.p_value = 1.0;
        est.notes.push_back("identity comparison: target equals baseline");
        return est;
    }

    Comparison cmp;
    cmp.target = target_combo;
    cmp.baseline = baseline_combo;
    for (const auto& [bits, region] : partition.regions()) {
        if (bits == 0 || region.count == 0) continue;
        if ((bits & changed) != 0) cmp.support.push_back(bits);
    }
    if (cmp.support.empty()) {
        throw EmptySupportError("no region triggers a changed experiment");
    }
    return estimate_comparison(partition, config, cmp, metric, options);
}

EffectEstimate scenario_effect(const RegionPartition& partition, const AnalysisConfig& config,
                               const std::map<int, int>& scenario_fix, int experiment_of_interest,
                               int target_variant, int baseline_variant, const MetricSpec& metric,
                               const EstimatorOptions& options) {
    const int k = static_cast<int>(config.num_experiments());
    if (experiment_of_interest < 0 || experiment_of_interest >= k) {
        throw ConfigError("scenario_effect: experiment of interest out of range");
    }
    if (scenario_fix.count(experiment_of_interest) > 0) {
        throw ConfigError("scenario_effect: scenario must not fix the experiment of interest");
    }

    Comparison cmp;
    cmp.target.assign(k, 0);
    cmp.baseline.assign(k, 0);
    for (int j = 0; j < k; ++j) {
        if (j == experiment_of_interest) {
            cmp.target[j] = target_variant;
            cmp.baseline[j] = baseline_variant;
            continue;
        }
        const auto it = scenario_fix.find(j);
        if (it == scenario_fix.end()) {
            throw ConfigError("scenario_effect: scenario must fix experiment '" +
                              config.experiments[j].id + "' (every experiment except the one of interest)");
        }
        cmp.target[j] = it->second;
        cmp.baseline[j] = it->second;
    }
    check_combo(config, cmp.target, "scenario_effect target");
    check_combo(config, cmp.baseline, "scenario_effect baseline");

    for (const auto& [bits, region] : partition.regions()) {
        if (bits == 0 || region.count == 0) continue;
        if ((bits >> experiment_of_interest) & 1u) cmp.support.push_back(bits);
    }
    if (cmp.support.empty()) {
        throw EmptySupportError("experiment of interest triggers in no region");
    }
    return estimate_comparison(partition, config, cmp, metric, options);
}

CombinationReport all_combinations(const RegionPartition& partition, const AnalysisConfig& config,
                                   const MetricSpec& metric, const MetricSpec& objective_metric,
                                   const EstimatorOptions& options) {
    const long long count = config.combination_count();
    if (count < 0 || count > config.combination_cap) {
        std::ostringstream os;
        os << "combination count " << count << " exceeds cap " << config.combination_cap;
        throw CapExceededError(os.str());
    }

    CombinationReport report;
    report.metric = metric.name;
    report.objective_metric = objective_metric.name;
    report.alpha = options.alpha.value_or(config.alpha);
    report.combination_count = count;
    report.bonferroni_alpha = report.alpha / static_cast<double>(count);

    const std::vector<int> base = baseline_combo(config);
    const std::size_t k = config.num_experiments();
    std::vector<int> combo(k, 0);

    double best = 0.0;
    bool have_best = false;
    while (true) {
        if (combo != base) {
            try {
                EffectEstimate est = combination_effect(partition, config, combo, base, metric, options);
                double objective_point = est.point;
                if (objective_metric.name != metric.name) {
                    objective_point =
                        combination_effect(partition, config, combo, base, objective_metric, options)
                            .point;
                }
                CombinationEntry entry;
                entry.combo = combo;
                entry.estimate = std::move(est);
                entry.objective_point = objective_point;
                if (!have_best || objective_point > best) {
                    best = objective_point;
                    have_best = true;
                    report.optimal = combo;
                }
                report.results.push_back(std::move(entry));
            } catch (const CapExceededError&) {
                throw;
            } catch (const Error& e) {
                report.skipped.emplace_back(combo, e.what());
            }
        }
        // lexicographic odometer, last experiment fastest
        std::size_t j = k;
        while (j > 0) {
            --j;
            if (++combo[j] < static_cast<int>(config.experiments[j].variants.size())) break;
            combo[j] = 0;
            if (j == 0) return report;
        }
        if (k == 0) return report;
    }
}

double jackknife_variance(const RegionPartition& partition,
                          const std::function<double(const RegionPartition&)>& estimator) {
    const int b_count = partition.num_buckets();
    if (b_count < 2) {
        throw ConfigError("jackknife_variance: partition carries no bucket shards");
    }
    std::vector<double> estimates;
    estimates.reserve(b_count);
    for (int b = 0; b < b_count; ++b) {
        try {
            estimates.push_back(estimator(partition.leave_out_bucket(b)));
        } catch (const Error& e) {
            std::ostringstream os;
            os << "leave-out bucket " << b << ": " << e.what();
            throw DegenerateBucketError(os.str());
        }
    }
    double mean = 0.0;
    for (const double v : estimates) mean += v;
    mean /= static_cast<double>(b_count);
    double ss = 0.0;
    for (const double v : estimates) ss += (v - mean) * (v - mean);
    return ss * static_cast<double>(b_count - 1) / static_cast<double>(b_count);
}

std::pair<double, double> confidence_interval(double point, double se, double alpha) {
    const double z = normal_quantile(1.0 - alpha / 2.0);
    return {point - z * se, point + z * se};
}

WeightUncertainty weight_uncertainty_decomposition(const RegionPartition& partition,
                                                   const AnalysisConfig& config,
                                                   const std::vector<int>& target_combo,
                                                   const std::vector<int>& baseline_combo,
                                                   const MetricSpec& metric) {
    if (metric.kind != MetricKind::Mean) {
        throw ConfigError("weight_uncertainty_decomposition: mean metrics only");
    }
    EffectEstimate est = combination_effect(partition, config, target_combo, baseline_combo, metric,
                                            EstimatorOptions{VarianceMethod::Analytic, std::nullopt,
                                                             false});
    double support_units = 0.0;
    for (const auto& entry : est.ledger) {
        const Region* r = partition.region(entry.region.bits);
        if (r != nullptr) support_units += static_cast<double>(r->count);
    }
    const int column = partition.column_index(metric.numerator_column);

    WeightUncertainty wu;
    for (const auto& entry : est.ledger) {
        const Comparison cmp{target_combo, baseline_combo, {entry.region.bits}};
        const CellStats* t = partition.cell(entry.region.bits, cmp.target_cell(entry.region.bits));
        const CellStats* c = partition.cell(entry.region.bits, cmp.baseline_cell(entry.region.bits));
        double var_delta = 0.0;
        if (t != nullptr && c != nullptr && t->n > 0 && c->n > 0 && t != c) {
            var_delta = t->sample_variance(column) / static_cast<double>(t->n) +
                        c->sample_variance(column) / static_cast<double>(c->n);
        }
        const double var_w = entry.weight * (1.0 - entry.weight) / support_units;
        wu.fixed_weight_term += entry.weight * entry.weight * var_delta;
        wu.weight_variance_term += entry.delta * entry.delta * var_w;
        wu.cross_term += var_w * var_delta;
    }
    return wu;
}

}  // namespace mea
