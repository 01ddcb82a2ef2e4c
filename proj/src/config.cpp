#include "mea/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mea/errors.hpp"

namespace mea {

int ExperimentSpec::variant_index(const std::string& name) const {
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (variants[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int ExperimentSpec::baseline_index() const { return variant_index(baseline); }

int AnalysisConfig::experiment_index(const std::string& id) const {
    for (std::size_t i = 0; i < experiments.size(); ++i) {
        if (experiments[i].id == id) return static_cast<int>(i);
    }
    return -1;
}

std::vector<std::string> AnalysisConfig::metric_columns() const {
    std::vector<std::string> cols;
    auto add = [&cols](const std::string& c) {
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    };
    for (const auto& m : metrics) {
        add(m.numerator_column);
        if (m.kind == MetricKind::Ratio) add(m.denominator_column);
    }
    return cols;
}

std::vector<std::pair<int, int>> AnalysisConfig::ratio_column_pairs() const {
    const auto cols = metric_columns();
    auto index_of = [&cols](const std::string& c) {
        return static_cast<int>(std::find(cols.begin(), cols.end(), c) - cols.begin());
    };
    std::vector<std::pair<int, int>> pairs;
    for (const auto& m : metrics) {
        if (m.kind != MetricKind::Ratio) continue;
        std::pair<int, int> p{index_of(m.numerator_column), index_of(m.denominator_column)};
        if (std::find(pairs.begin(), pairs.end(), p) == pairs.end()) pairs.push_back(p);
    }
    return pairs;
}

long long AnalysisConfig::combination_count() const {
    long long n = 1;
    for (const auto& e : experiments) {
        n *= static_cast<long long>(e.variants.size());
        if (n < 0 || n > (1LL << 40)) return -1;  // overflow guard
    }
    return n - 1;
}

std::vector<std::string> validate_config(const AnalysisConfig& config) {
    if (config.experiments.empty()) {
        throw ConfigError("config: at least one experiment is required");
    }
    std::set<std::string> ids;
    for (const auto& e : config.experiments) {
        if (e.id.empty()) throw ConfigError("config: experiment id must be nonempty");
        if (!ids.insert(e.id).second) {
            throw ConfigError("config: duplicate experiment id '" + e.id + "'");
        }
        if (e.variants.empty()) {
            throw ConfigError("config: experiment '" + e.id + "' has no variants");
        }
        std::set<std::string> names;
        for (const auto& v : e.variants) {
            if (v == kNotTriggeredToken) {
                throw ConfigError("config: experiment '" + e.id +
                                  "' uses the reserved non-triggered marker as a variant name");
            }
            if (!names.insert(v).second) {
                throw ConfigError("config: experiment '" + e.id + "' has duplicate variant '" + v + "'");
            }
        }
        if (e.variant_index(e.baseline) < 0) {
            throw ConfigError("config: baseline '" + e.baseline + "' is not a variant of '" + e.id + "'");
        }
    }
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw ConfigError("config: alpha must lie in (0,1)");
    }
    if (config.jackknife_buckets < 2 || config.jackknife_buckets > 10000) {
        throw ConfigError("config: jackknife_buckets must lie in [2, 10000]");
    }
    if (config.cramers_v_threshold < 0.0) {
        throw ConfigError("config: cramers_v_threshold must be nonnegative");
    }
    for (const auto& m : config.metrics) {
        if (m.name.empty()) throw ConfigError("config: metric name must be nonempty");
        if (m.numerator_column.empty()) {
            throw ConfigError("config: metric '" + m.name + "' names no value column");
        }
        if (m.kind == MetricKind::Ratio && m.denominator_column.empty()) {
            throw ConfigError("config: ratio metric '" + m.name + "' needs a denominator column");
        }
    }
    for (const auto& sc : config.scenarios) {
        const int eoi = config.experiment_index(sc.of_interest);
        if (eoi < 0) {
            throw ConfigError("config: scenario of_interest '" + sc.of_interest + "' is not an experiment");
        }
        if (sc.fix.count(sc.of_interest) > 0) {
            throw ConfigError("config: scenario fixes its own experiment of interest");
        }
        for (const auto& [id, variant] : sc.fix) {
            const int j = config.experiment_index(id);
            if (j < 0) throw ConfigError("config: scenario fixes unknown experiment '" + id + "'");
            if (config.experiments[j].variant_index(variant) < 0) {
                throw ConfigError("config: scenario fixes '" + id + "' at unknown variant '" + variant + "'");
            }
        }
        const auto& exp = config.experiments[eoi];
        if (exp.variant_index(sc.target) < 0) {
            throw ConfigError("config: scenario target '" + sc.target + "' is not a variant of '" +
                              sc.of_interest + "'");
        }
        if (sc.baseline && exp.variant_index(*sc.baseline) < 0) {
            throw ConfigError("config: scenario baseline '" + *sc.baseline + "' is not a variant of '" +
                              sc.of_interest + "'");
        }
    }

    std::vector<std::string> warnings;
    const long long combos = config.combination_count();
    if (combos < 0 || combos > config.combination_cap) {
        std::ostringstream os;
        os << "combination count ";
        if (combos < 0) {
            os << "overflows";
        } else {
            os << combos;
        }
        os << " exceeds the cap of " << config.combination_cap
           << "; all_combinations will refuse to enumerate";
        warnings.push_back(os.str());
    }
    return warnings;
}

AnalysisConfig config_from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    AnalysisConfig cfg;
    try {
        for (const auto& e : doc.at("experiments")) {
            ExperimentSpec spec;
            spec.id = e.at("id").get<std::string>();
            for (const auto& v : e.at("variants")) spec.variants.push_back(v.get<std::string>());
            spec.baseline = e.at("baseline").get<std::string>();
            cfg.experiments.push_back(std::move(spec));
        }
        for (const auto& m : doc.value("metrics", nlohmann::json::array())) {
            MetricSpec spec;
            spec.name = m.at("name").get<std::string>();
            const std::string kind = m.value("kind", "mean");
            if (kind == "mean") {
                spec.kind = MetricKind::Mean;
            } else if (kind == "ratio") {
                spec.kind = MetricKind::Ratio;
            } else {
                throw ConfigError("config: metric kind must be 'mean' or 'ratio', got '" + kind + "'");
            }
            // Mean metrics may name their column via "numerator" or default
            // to the metric name itself.
            spec.numerator_column = m.value("numerator", spec.name);
            if (spec.kind == MetricKind::Ratio) {
                spec.denominator_column = m.value("denominator", "");
            }
            cfg.metrics.push_back(std::move(spec));
        }
        cfg.alpha = doc.value("alpha", 0.05);
        cfg.jackknife_buckets = doc.value("jackknife_buckets", 20);
        cfg.cramers_v_threshold = doc.value("cramers_v_threshold", 0.01);
        cfg.combination_cap = doc.value("combination_cap", 50);
        const std::string vm = doc.value("variance_method", "jackknife");
        if (vm == "analytic") {
            cfg.variance_method = VarianceMethod::Analytic;
        } else if (vm == "jackknife") {
            cfg.variance_method = VarianceMethod::Jackknife;
        } else {
            throw ConfigError("config: variance_method must be 'analytic' or 'jackknife'");
        }
        for (const auto& s : doc.value("scenarios", nlohmann::json::array())) {
            AnalysisConfig::Scenario sc;
            for (const auto& [key, value] : s.at("fix").items()) {
                sc.fix[key] = value.get<std::string>();
            }
            sc.of_interest = s.at("of_interest").get<std::string>();
            sc.target = s.at("target").get<std::string>();
            if (s.contains("baseline")) sc.baseline = s.at("baseline").get<std::string>();
            cfg.scenarios.push_back(std::move(sc));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate_config(cfg);
    return cfg;
}

}  // namespace mea
