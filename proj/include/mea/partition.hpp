#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mea/unit_table.hpp"

namespace mea {

// Which experiments a unit triggered, bit j = experiment j. The all-false
// state is representable but never carries estimation weight.
struct TriggerState {
    std::uint32_t bits = 0;
    int k = 0;

    bool triggered(int j) const { return (bits >> j) & 1u; }
    int degree() const;
    std::string to_string() const;  // "11", "10", ... experiment 0 first

    static TriggerState of_record(const std::vector<std::int32_t>& variant);

    bool operator==(const TriggerState&) const = default;
};

// Variant combination within a region: one label per experiment, variant
// index where triggered and kNotTriggered where not.
using CellLabels = std::vector<std::int32_t>;

// Render a cell as "t1|t2" with empty coordinates for non-triggered slots.
std::string cell_to_string(const CellLabels& labels, const AnalysisConfig& config);

struct ColumnAccum {
    double sum = 0.0;
    double sum_sq = 0.0;
};

// Per-cell summary statistics: unit count, per-column sum / sum of squares
// and per-ratio-pair cross-product sums, each also sharded by jackknife
// bucket. Sums rather than means, so bucket aggregation is exact and
// single-pass.
struct CellStats {
    std::int64_t n = 0;
    std::vector<std::int64_t> bucket_n;
    std::vector<ColumnAccum> col;
    std::vector<std::vector<ColumnAccum>> bucket_col;    // [bucket][column]
    std::vector<double> pair_sum;                        // numerator*denominator
    std::vector<std::vector<double>> bucket_pair;        // [bucket][pair]

    double mean(int column) const { return static_cast<double>(col[column].sum) / n; }
    // Unbiased sample variance; 0 for n < 2.
    double sample_variance(int column) const;
    // Sample covariance of two columns using the cross-product sum for the
    // matching ratio pair; 0 for n < 2.
    double sample_covariance(int pair, int num_column, int den_column) const;
};

struct Region {
    std::int64_t count = 0;
    std::vector<std::int64_t> bucket_count;
    std::map<CellLabels, CellStats> cells;
};

class RegionPartition {
public:
    RegionPartition(int k, int buckets, std::vector<std::string> columns,
                    std::vector<std::pair<int, int>> ratio_pairs)
        : k_(k), buckets_(buckets), columns_(std::move(columns)),
          ratio_pairs_(std::move(ratio_pairs)) {}

    int num_experiments() const { return k_; }
    int num_buckets() const { return buckets_; }
    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::pair<int, int>>& ratio_pairs() const { return ratio_pairs_; }
    int column_index(const std::string& name) const;
    int ratio_pair_index(int num_column, int den_column) const;

    const std::map<std::uint32_t, Region>& regions() const { return regions_; }
    std::int64_t total_triggered() const { return total_triggered_; }
    std::int64_t total_rows() const { return total_rows_; }

    const Region* region(std::uint32_t bits) const;
    const CellStats* cell(std::uint32_t bits, const CellLabels& labels) const;

    // The partition with jackknife bucket b removed; the result carries no
    // bucket shards of its own.
    RegionPartition leave_out_bucket(int b) const;

    void add_row(const UnitTable& table, std::size_t row, int bucket);

private:
    int k_;
    int buckets_;
    std::vector<std::string> columns_;
    std::vector<std::pair<int, int>> ratio_pairs_;
    std::map<std::uint32_t, Region> regions_;
    std::int64_t total_triggered_ = 0;
    std::int64_t total_rows_ = 0;
};

// Deterministic non-cryptographic bucket assignment: fnv1a64(unit_id) mod B.
// Keeps all of a unit's data in a single bucket. Requires B >= 2.
int assign_bucket(std::string_view unit_id, int buckets);

using BucketFn = std::function<int(std::string_view unit_id, int buckets)>;

// Single pass over the table; every record lands in exactly one
// (region, cell). bucket_of defaults to assign_bucket and is overridable
// for tests that need exact bucket layouts (e.g. one unit per bucket).
RegionPartition build_partition(const UnitTable& table, const BucketFn& bucket_of = assign_bucket);

// w_s = N_s / sum over the requested subset; subset must exclude the
// all-false state. Absent regions count as zero. Throws EmptySupportError
// when the subset holds no units.
std::map<std::uint32_t, double> region_weights(const RegionPartition& partition,
                                               const std::vector<std::uint32_t>& subset);

// One row per (region, cell, metric column, bucket): counts as exact
// decimals, sums at 17 significant digits.
void write_partition_csv(const RegionPartition& partition, const AnalysisConfig& config,
                         std::ostream& out);

}  // namespace mea
