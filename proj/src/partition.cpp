#include "mea/partition.hpp"

#include <cstdio>
#include <ostream>

#include "mea/errors.hpp"
#include "mea/hashing.hpp"

namespace mea {

int TriggerState::degree() const {
    int d = 0;
    for (int j = 0; j < k; ++j) d += triggered(j);
    return d;
}

std::string TriggerState::to_string() const {
    std::string s(static_cast<std::size_t>(k), '0');
    for (int j = 0; j < k; ++j) {
        if (triggered(j)) s[j] = '1';
    }
    return s;
}

TriggerState TriggerState::of_record(const std::vector<std::int32_t>& variant) {
    TriggerState st;
    st.k = static_cast<int>(variant.size());
    for (int j = 0; j < st.k; ++j) {
        if (variant[j] != kNotTriggered) st.bits |= (1u << j);
    }
    return st;
}

std::string cell_to_string(const CellLabels& labels, const AnalysisConfig& config) {
    std::string s;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (j > 0) s.push_back('|');
        if (labels[j] != kNotTriggered) s += config.experiments[j].variants[labels[j]];
    }
    return s;
}

double CellStats::sample_variance(int column) const {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double ss = col[column].sum_sq - col[column].sum * col[column].sum / nn;
    return ss > 0.0 ? ss / (nn - 1.0) : 0.0;
}

double CellStats::sample_covariance(int pair, int num_column, int den_column) const {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double cross = pair_sum[pair] - col[num_column].sum * col[den_column].sum / nn;
    return cross / (nn - 1.0);
}

int RegionPartition::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

int RegionPartition::ratio_pair_index(int num_column, int den_column) const {
    for (std::size_t i = 0; i < ratio_pairs_.size(); ++i) {
        if (ratio_pairs_[i].first == num_column && ratio_pairs_[i].second == den_column) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

const Region* RegionPartition::region(std::uint32_t bits) const {
    const auto it = regions_.find(bits);
    return it == regions_.end() ? nullptr : &it->second;
}

const CellStats* RegionPartition::cell(std::uint32_t bits, const CellLabels& labels) const {
    const Region* r = region(bits);
    if (r == nullptr) return nullptr;
    const auto it = r->cells.find(labels);
    return it == r->cells.end() ? nullptr : &it->second;
}

void RegionPartition::add_row(const UnitTable& table, std::size_t row, int bucket) {
    std::uint32_t bits = 0;
    CellLabels labels(static_cast<std::size_t>(k_));
    for (int j = 0; j < k_; ++j) {
        const std::int32_t v = table.variant(j, row);
        labels[j] = v;
        if (v != kNotTriggered) bits |= (1u << j);
    }

    Region& region = regions_[bits];
    if (region.bucket_count.empty()) region.bucket_count.assign(buckets_, 0);
    region.count += 1;
    region.bucket_count[bucket] += 1;
    total_rows_ += 1;
    if (bits != 0) total_triggered_ += 1;

    CellStats& cs = region.cells[labels];
    if (cs.col.empty()) {
        cs.bucket_n.assign(buckets_, 0);
        cs.col.assign(columns_.size(), {});
        cs.bucket_col.assign(buckets_, std::vector<ColumnAccum>(columns_.size()));
        cs.pair_sum.assign(ratio_pairs_.size(), 0.0);
        cs.bucket_pair.assign(buckets_, std::vector<double>(ratio_pairs_.size(), 0.0));
    }
    cs.n += 1;
    cs.bucket_n[bucket] += 1;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        const double v = table.value(c, row);
        cs.col[c].sum += v;
        cs.col[c].sum_sq += v * v;
        cs.bucket_col[bucket][c].sum += v;
        cs.bucket_col[bucket][c].sum_sq += v * v;
    }
    for (std::size_t p = 0; p < ratio_pairs_.size(); ++p) {
        const double prod =
            table.value(ratio_pairs_[p].first, row) * table.value(ratio_pairs_[p].second, row);
        cs.pair_sum[p] += prod;
        cs.bucket_pair[bucket][p] += prod;
    }
}

RegionPartition RegionPartition::leave_out_bucket(int b) const {
    RegionPartition out(k_, 0, columns_, ratio_pairs_);
    for (const auto& [bits, region] : regions_) {
        const std::int64_t count = region.count - region.bucket_count[b];
        if (count == 0) continue;
        Region reduced;
        reduced.count = count;
        for (const auto& [labels, cs] : region.cells) {
            const std::int64_t n = cs.n - cs.bucket_n[b];
            if (n == 0) continue;
            CellStats rc;
            rc.n = n;
            rc.col.resize(cs.col.size());
            for (std::size_t c = 0; c < cs.col.size(); ++c) {
                rc.col[c].sum = cs.col[c].sum - cs.bucket_col[b][c].sum;
                rc.col[c].sum_sq = cs.col[c].sum_sq - cs.bucket_col[b][c].sum_sq;
            }
            rc.pair_sum.resize(cs.pair_sum.size());
            for (std::size_t p = 0; p < cs.pair_sum.size(); ++p) {
                rc.pair_sum[p] = cs.pair_sum[p] - cs.bucket_pair[b][p];
            }
            reduced.cells.emplace(labels, std::move(rc));
        }
        out.regions_.emplace(bits, std::move(reduced));
        out.total_rows_ += count;
        if (bits != 0) out.total_triggered_ += count;
    }
    return out;
}

int assign_bucket(std::string_view unit_id, int buckets) {
    if (buckets < 2) throw ConfigError("assign_bucket: bucket count must be >= 2");
    return static_cast<int>(fnv1a64(unit_id) % static_cast<std::uint64_t>(buckets));
}

RegionPartition build_partition(const UnitTable& table, const BucketFn& bucket_of) {
    const AnalysisConfig& cfg = table.config();
    if (cfg.num_experiments() > 32) {
        throw ConfigError("build_partition: at most 32 experiments supported");
    }
    RegionPartition partition(static_cast<int>(cfg.num_experiments()), cfg.jackknife_buckets,
                              table.columns(), cfg.ratio_column_pairs());
    for (std::size_t row = 0; row < table.size(); ++row) {
        const int b = bucket_of(table.unit_id(row), cfg.jackknife_buckets);
        if (b < 0 || b >= cfg.jackknife_buckets) {
            throw ConfigError("build_partition: bucket function returned out-of-range index");
        }
        partition.add_row(table, row, b);
    }
    return partition;
}

std::map<std::uint32_t, double> region_weights(const RegionPartition& partition,
                                               const std::vector<std::uint32_t>& subset) {
    double total = 0.0;
    for (const std::uint32_t bits : subset) {
        if (bits == 0) {
            throw ConfigError("region_weights: the all-false state carries no estimation weight");
        }
        const Region* r = partition.region(bits);
        if (r != nullptr) total += static_cast<double>(r->count);
    }
    if (total == 0.0) {
        throw EmptySupportError("region_weights: requested regions hold no units");
    }
    std::map<std::uint32_t, double> weights;
    for (const std::uint32_t bits : subset) {
        const Region* r = partition.region(bits);
        weights[bits] = r == nullptr ? 0.0 : static_cast<double>(r->count) / total;
    }
    return weights;
}

void write_partition_csv(const RegionPartition& partition, const AnalysisConfig& config,
                         std::ostream& out) {
    out << "region,cell,column,bucket,count,sum,sum_of_squares\n";
    char num[40];
    const int b_count = partition.num_buckets();
    for (const auto& [bits, region] : partition.regions()) {
        TriggerState st{bits, partition.num_experiments()};
        const std::string region_str = st.to_string();
        for (const auto& [labels, cs] : region.cells) {
            const std::string cell_str = cell_to_string(labels, config);
            for (std::size_t c = 0; c < partition.columns().size(); ++c) {
                for (int b = 0; b < b_count; ++b) {
                    out << region_str << ',' << cell_str << ',' << partition.columns()[c] << ','
                        << b << ',' << cs.bucket_n[b] << ',';
                    std::snprintf(num, sizeof(num), "%.17g", cs.bucket_col[b][c].sum);
                    out << num << ',';
                    std::snprintf(num, sizeof(num), "%.17g", cs.bucket_col[b][c].sum_sq);
                    out << num << '\n';
                }
            }
        }
    }
}

}  // namespace mea
