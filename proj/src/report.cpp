#include "mea/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "mea/errors.hpp"

namespace mea {

double round12(double v) {
    if (!std::isfinite(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::strtod(buf, nullptr);
}

namespace {

Json config_to_json(const AnalysisConfig& cfg) {
    Json out;
    Json experiments = Json::array();
    for (const auto& e : cfg.experiments) {
        Json exp;
        exp["id"] = e.id;
        exp["variants"] = e.variants;
        exp["baseline"] = e.baseline;
        experiments.push_back(exp);
    }
    out["experiments"] = experiments;
    Json metrics = Json::array();
    for (const auto& m : cfg.metrics) {
        Json metric;
        metric["name"] = m.name;
        metric["kind"] = m.kind == MetricKind::Mean ? "mean" : "ratio";
        metric["numerator"] = m.numerator_column;
        if (m.kind == MetricKind::Ratio) metric["denominator"] = m.denominator_column;
        metrics.push_back(metric);
    }
    out["metrics"] = metrics;
    out["alpha"] = round12(cfg.alpha);
    out["jackknife_buckets"] = cfg.jackknife_buckets;
    out["variance_method"] = cfg.variance_method == VarianceMethod::Analytic ? "analytic" : "jackknife";
    out["cramers_v_threshold"] = round12(cfg.cramers_v_threshold);
    out["combination_cap"] = cfg.combination_cap;
    if (!cfg.scenarios.empty()) {
        Json scenarios = Json::array();
        for (const auto& sc : cfg.scenarios) {
            Json s;
            s["fix"] = sc.fix;
            s["of_interest"] = sc.of_interest;
            s["target"] = sc.target;
            if (sc.baseline) s["baseline"] = *sc.baseline;
            scenarios.push_back(s);
        }
        out["scenarios"] = scenarios;
    }
    return out;
}

std::vector<std::string> combo_names(const AnalysisConfig& cfg, const std::vector<int>& combo) {
    std::vector<std::string> names;
    names.reserve(combo.size());
    for (std::size_t j = 0; j < combo.size(); ++j) {
        names.push_back(cfg.experiments[j].variants[combo[j]]);
    }
    return names;
}

Json overlap_to_json(const RegionPartition& partition) {
    Json out;
    out["total_units"] = partition.total_rows();
    out["total_triggered"] = partition.total_triggered();
    Json regions = Json::array();
    for (const auto& [bits, region] : partition.regions()) {
        Json r;
        r["region"] = TriggerState{bits, partition.num_experiments()}.to_string();
        r["count"] = region.count;
        if (partition.total_rows() > 0) {
            r["proportion_all"] =
                round12(static_cast<double>(region.count) / partition.total_rows());
        }
        if (bits != 0 && partition.total_triggered() > 0) {
            r["proportion_triggered"] =
                round12(static_cast<double>(region.count) / partition.total_triggered());
        }
        regions.push_back(r);
    }
    out["regions"] = regions;
    return out;
}

Json ledger_to_json(const EffectEstimate& est) {
    Json ledger = Json::array();
    for (const auto& entry : est.ledger) {
        Json row;
        row["region"] = entry.region.to_string();
        row["weight"] = round12(entry.weight);
        row["n_target"] = entry.n_target;
        row["n_baseline"] = entry.n_baseline;
        if (est.kind == MetricKind::Mean) {
            row["delta"] = round12(entry.delta);
            row["mean_target"] = round12(entry.mean_target);
            row["mean_baseline"] = round12(entry.mean_baseline);
        } else {
            row["num_mean_target"] = round12(entry.num_mean_target);
            row["den_mean_target"] = round12(entry.den_mean_target);
            row["num_mean_baseline"] = round12(entry.num_mean_baseline);
            row["den_mean_baseline"] = round12(entry.den_mean_baseline);
        }
        ledger.push_back(row);
    }
    return ledger;
}

}  // namespace

Json effect_to_json(const EffectEstimate& est, double significance_alpha) {
    Json out;
    out["metric"] = est.metric;
    out["point"] = round12(est.point);
    out["se"] = round12(est.se);
    out["ci"] = Json::array({round12(est.ci_lo), round12(est.ci_hi)});
    out["p_value"] = round12(est.p_value);
    out["significant"] = est.p_value < significance_alpha;
    out["variance_method"] = est.method == VarianceMethod::Analytic ? "analytic" : "jackknife";
    out["ledger"] = ledger_to_json(est);
    if (!est.notes.empty()) out["notes"] = est.notes;
    return out;
}

Json diagnostic_to_json(const DiagnosticResult& dr) {
    Json out;
    out["source"] = dr.source_id;
    switch (dr.verdict) {
        case Verdict::Pass: out["verdict"] = "PASS"; break;
        case Verdict::Flag: out["verdict"] = "FLAG"; break;
        case Verdict::Skipped: out["verdict"] = "SKIPPED"; break;
    }
    if (dr.verdict == Verdict::Skipped) {
        out["skip_reason"] = dr.skip_reason;
        return out;
    }
    out["chi2"] = round12(dr.chi2);
    out["dof"] = dr.dof;
    out["p_value"] = round12(dr.p_value);
    out["cramers_v"] = round12(dr.cramers_v);
    out["bonferroni_alpha"] = round12(dr.bonferroni_alpha_used);
    out["low_expected_count"] = dr.low_expected_count;
    Json rows = Json::array();
    for (const auto& bar : export_bar_chart_data(dr)) {
        Json r;
        r["source_variant"] = bar.source_variant;
        r["column"] = bar.column_label;
        r["proportion"] = round12(bar.proportion);
        r["is_nan_column"] = bar.is_nan_column;
        rows.push_back(r);
    }
    out["bar_chart"] = rows;
    return out;
}

Json build_analysis_report(const UnitTable& table, const RegionPartition& partition,
                           const AnalyzeFlags& flags) {
    const AnalysisConfig& cfg = table.config();
    EstimatorOptions options;
    options.method = flags.variance;
    options.allow_drop_empty_regions = flags.allow_drop_empty_regions;

    Json report;
    report["tool"] = "mea";
    report["seed"] = flags.seed;
    report["config"] = config_to_json(cfg);
    report["overlap"] = overlap_to_json(partition);

    std::vector<std::string> warnings = validate_config(cfg);

    Json metrics = Json::array();
    for (const auto& metric : cfg.metrics) {
        Json section;
        section["metric"] = metric.name;
        section["kind"] = metric.kind == MetricKind::Mean ? "mean" : "ratio";

        const CombinationReport combos =
            all_combinations(partition, cfg, metric, metric, options);
        Json combo_json;
        combo_json["baseline"] = combo_names(cfg, baseline_combo(cfg));
        combo_json["count"] = combos.combination_count;
        combo_json["alpha"] = round12(combos.alpha);
        combo_json["bonferroni_alpha"] = round12(combos.bonferroni_alpha);
        Json results = Json::array();
        for (const auto& entry : combos.results) {
            Json r;
            r["combination"] = combo_names(cfg, entry.combo);
            r.update(effect_to_json(entry.estimate, combos.bonferroni_alpha));
            results.push_back(r);
        }
        combo_json["results"] = results;
        if (!combos.skipped.empty()) {
            Json skipped = Json::array();
            for (const auto& [combo, reason] : combos.skipped) {
                Json s;
                s["combination"] = combo_names(cfg, combo);
                s["reason"] = reason;
                skipped.push_back(s);
                warnings.push_back("metric " + metric.name + ": skipped combination: " + reason);
            }
            combo_json["skipped"] = skipped;
        }
        if (combos.optimal) combo_json["optimal"] = combo_names(cfg, *combos.optimal);
        section["combinations"] = combo_json;

        Json scenario_json = Json::array();
        for (const auto& sc : cfg.scenarios) {
            const int eoi = cfg.experiment_index(sc.of_interest);
            std::map<int, int> fix;
            for (const auto& [id, variant] : sc.fix) {
                const int j = cfg.experiment_index(id);
                fix[j] = cfg.experiments[j].variant_index(variant);
            }
            const int target = cfg.experiments[eoi].variant_index(sc.target);
            const std::string baseline_name = sc.baseline.value_or(cfg.experiments[eoi].baseline);
            const int baseline = cfg.experiments[eoi].variant_index(baseline_name);
            Json s;
            s["fix"] = sc.fix;
            s["of_interest"] = sc.of_interest;
            s["target"] = sc.target;
            s["baseline"] = baseline_name;
            try {
                const EffectEstimate est =
                    scenario_effect(partition, cfg, fix, eoi, target, baseline, metric, options);
                s["estimate"] = effect_to_json(est, round12(options.alpha.value_or(cfg.alpha)));
            } catch (const Error& e) {
                s["error"] = e.what();
                warnings.push_back("metric " + metric.name + ": scenario failed: " + e.what());
            }
            scenario_json.push_back(s);
        }
        if (!scenario_json.empty()) section["scenarios"] = scenario_json;

        // Eq.-(4)-style decomposition for the optimal combination: how much
        // variance the fixed-weight formula ignores.
        if (metric.kind == MetricKind::Mean && combos.optimal) {
            try {
                const WeightUncertainty wu = weight_uncertainty_decomposition(
                    partition, cfg, *combos.optimal, baseline_combo(cfg), metric);
                Json w;
                w["combination"] = combo_names(cfg, *combos.optimal);
                w["fixed_weight_term"] = round12(wu.fixed_weight_term);
                w["weight_variance_term"] = round12(wu.weight_variance_term);
                w["cross_term"] = round12(wu.cross_term);
                w["total"] = round12(wu.total());
                section["weight_uncertainty"] = w;
            } catch (const Error&) {
                // purely informational; ignore failures
            }
        }
        metrics.push_back(section);
    }
    report["metrics"] = metrics;

    Json diagnostics = Json::array();
    for (const auto& dr : invariance_check(table)) {
        diagnostics.push_back(diagnostic_to_json(dr));
        if (dr.low_expected_count) {
            warnings.push_back("diagnostics: source " + dr.source_id +
                               " has expected cell counts below 5");
        }
    }
    report["diagnostics"] = diagnostics;
    report["warnings"] = warnings;
    return report;
}

Json build_diagnostics_report(const UnitTable& table) {
    Json report;
    report["tool"] = "mea";
    report["config"] = config_to_json(table.config());
    Json diagnostics = Json::array();
    for (const auto& dr : invariance_check(table)) diagnostics.push_back(diagnostic_to_json(dr));
    report["diagnostics"] = diagnostics;
    return report;
}

namespace {

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[40];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string join_combo(const Json& names) {
    std::string s = "(";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) s += ", ";
        s += names[i].get<std::string>();
    }
    s += ")";
    return s;
}

void render_metric_section(std::ostringstream& os, const Json& section) {
    os << "## Metric `" << section.at("metric").get<std::string>() << "` ("
       << section.at("kind").get<std::string>() << ")\n\n";
    const Json& combos = section.at("combinations");
    os << "Baseline " << join_combo(combos.at("baseline")) << ", "
       << combos.at("count").get<long long>() << " combinations, Bonferroni alpha "
       << fmt(combos.at("bonferroni_alpha").get<double>()) << ".\n\n";
    os << "| Combination | Delta | 95% CI | p-value | Significant |\n";
    os << "|---|---|---|---|---|\n";
    for (const auto& r : combos.at("results")) {
        os << "| " << join_combo(r.at("combination")) << " | "
           << fmt(r.at("point").get<double>()) << " | ["
           << fmt(r.at("ci")[0].get<double>()) << ", " << fmt(r.at("ci")[1].get<double>())
           << "] | " << fmt(r.at("p_value").get<double>()) << " | "
           << (r.at("significant").get<bool>() ? "yes" : "no") << " |\n";
    }
    if (combos.contains("optimal")) {
        os << "\nOptimal combination: **" << join_combo(combos.at("optimal")) << "**\n";
    }
    if (section.contains("scenarios")) {
        os << "\n### Scenario effects\n\n";
        os << "| Scenario | Of interest | Target vs baseline | Delta | 95% CI | p-value |\n";
        os << "|---|---|---|---|---|---|\n";
        for (const auto& s : section.at("scenarios")) {
            std::string fixes;
            for (const auto& [id, variant] : s.at("fix").items()) {
                if (!fixes.empty()) fixes += ", ";
                fixes += id + "=" + variant.get<std::string>();
            }
            os << "| " << fixes << " | " << s.at("of_interest").get<std::string>() << " | "
               << s.at("target").get<std::string>() << " vs "
               << s.at("baseline").get<std::string>() << " | ";
            if (s.contains("estimate")) {
                const Json& est = s.at("estimate");
                os << fmt(est.at("point").get<double>()) << " | ["
                   << fmt(est.at("ci")[0].get<double>()) << ", "
                   << fmt(est.at("ci")[1].get<double>()) << "] | "
                   << fmt(est.at("p_value").get<double>()) << " |\n";
            } else {
                os << "error: " << s.at("error").get<std::string>() << " | | |\n";
            }
        }
    }
    os << "\n";
}

}  // namespace

std::string render_markdown(const Json& report) {
    std::ostringstream os;
    os << "# MEA analysis report\n\n";

    if (report.contains("overlap")) {
        const Json& overlap = report.at("overlap");
        os << "## Overlap diagnostics\n\n";
        os << overlap.at("total_units").get<long long>() << " units, "
           << overlap.at("total_triggered").get<long long>() << " triggered at least one experiment.\n\n";
        os << "| Trigger state | Count | Share of triggered |\n|---|---|---|\n";
        for (const auto& r : overlap.at("regions")) {
            os << "| " << r.at("region").get<std::string>() << " | " << r.at("count").get<long long>()
               << " | ";
            if (r.contains("proportion_triggered")) {
                os << fmt(100.0 * r.at("proportion_triggered").get<double>(), "%.1f") << "% |\n";
            } else {
                os << "- |\n";
            }
        }
        os << "\n";
    }

    if (report.contains("metrics")) {
        for (const auto& section : report.at("metrics")) render_metric_section(os, section);
    }

    if (report.contains("diagnostics")) {
        os << "## Arm-trigger invariance\n\n";
        os << "| Source | chi2 | dof | p-value | Cramer's V | Verdict |\n|---|---|---|---|---|---|\n";
        for (const auto& d : report.at("diagnostics")) {
            os << "| " << d.at("source").get<std::string>() << " | ";
            if (d.at("verdict").get<std::string>() == "SKIPPED") {
                os << "- | - | - | - | SKIPPED |\n";
            } else {
                os << fmt(d.at("chi2").get<double>()) << " | " << d.at("dof").get<int>() << " | "
                   << fmt(d.at("p_value").get<double>()) << " | "
                   << fmt(d.at("cramers_v").get<double>()) << " | "
                   << d.at("verdict").get<std::string>() << " |\n";
            }
        }
        os << "\n";
    }

    if (report.contains("warnings") && !report.at("warnings").empty()) {
        os << "## Warnings\n\n";
        for (const auto& w : report.at("warnings")) {
            os << "- " << w.get<std::string>() << "\n";
        }
    }
    return os.str();
}

std::string dump_report(const Json& report) {
    return report.dump(2) + "\n";
}

}  // namespace mea
