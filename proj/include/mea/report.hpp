#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "mea/diagnostics.hpp"
#include "mea/estimator.hpp"
#include "mea/partition.hpp"

namespace mea {

using Json = nlohmann::ordered_json;

// Round to 12 significant digits so serialized reports are diffable and
// byte-identical across runs.
double round12(double v);

struct AnalyzeFlags {
    std::uint64_t seed = 0;
    std::optional<VarianceMethod> variance;
    bool allow_drop_empty_regions = false;
};

// The full analysis report: config echo, overlap proportions, per-metric
// combination and scenario estimates with ledgers, invariance diagnostics
// and warnings. Canonical machine-readable artifact; markdown is a view.
Json build_analysis_report(const UnitTable& table, const RegionPartition& partition,
                           const AnalyzeFlags& flags);

Json build_diagnostics_report(const UnitTable& table);

std::string render_markdown(const Json& report);

Json effect_to_json(const EffectEstimate& estimate, double significance_alpha);

Json diagnostic_to_json(const DiagnosticResult& result);

// Serialize with fixed key order and 2-space indentation, trailing newline.
std::string dump_report(const Json& report);

}  // namespace mea
