#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mea {

// Reserved CSV encoding for "unit did not trigger this experiment".
// In memory the marker is a distinct sentinel (variant index -1), never a
// variant name.
inline constexpr const char* kNotTriggeredToken = "";
inline constexpr int kNotTriggered = -1;

struct ExperimentSpec {
    std::string id;
    std::vector<std::string> variants;  // ordered; order breaks ties
    std::string baseline;               // must be one of variants

    int variant_index(const std::string& name) const;
    int baseline_index() const;
};

enum class MetricKind { Mean, Ratio };

struct MetricSpec {
    std::string name;
    MetricKind kind = MetricKind::Mean;
    std::string numerator_column;       // mean metrics: the single value column
    std::string denominator_column;     // ratio metrics only
};

enum class VarianceMethod { Analytic, Jackknife };

struct AnalysisConfig {
    std::vector<ExperimentSpec> experiments;
    std::vector<MetricSpec> metrics;
    double alpha = 0.05;
    int jackknife_buckets = 20;
    VarianceMethod variance_method = VarianceMethod::Jackknife;
    double cramers_v_threshold = 0.01;
    int combination_cap = 50;

    struct Scenario {
        std::map<std::string, std::string> fix;  // experiment id -> variant
        std::string of_interest;
        std::string target;
        std::optional<std::string> baseline;     // defaults to declared baseline
    };
    std::vector<Scenario> scenarios;

    std::size_t num_experiments() const { return experiments.size(); }
    int experiment_index(const std::string& id) const;  // -1 if absent

    // Distinct data columns referenced by the metrics, in first-use order.
    std::vector<std::string> metric_columns() const;
    // (numerator, denominator) column-index pairs needed by ratio metrics,
    // as indices into metric_columns().
    std::vector<std::pair<int, int>> ratio_column_pairs() const;

    // Number of non-baseline variant combinations: prod(ell_j) - 1.
    long long combination_count() const;
};

// Throws ConfigError on invariant violations; returns human-readable
// warnings (e.g. combination count above the cap) otherwise.
std::vector<std::string> validate_config(const AnalysisConfig& config);

// Parse the declarative JSON config document (shape documented in README).
AnalysisConfig config_from_json(const std::string& json_text);

}  // namespace mea
