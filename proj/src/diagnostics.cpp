#include "mea/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "mea/errors.hpp"
#include "mea/stats.hpp"

namespace mea {

std::int64_t ContingencyTable::row_sum(std::size_t i) const {
    std::int64_t s = 0;
    for (const auto v : counts[i]) s += v;
    return s;
}

std::int64_t ContingencyTable::col_sum(std::size_t j) const {
    std::int64_t s = 0;
    for (const auto& row : counts) s += row[j];
    return s;
}

namespace {

std::string joint_label(const std::vector<std::int32_t>& labels, const AnalysisConfig& config,
                        int source) {
    std::string s;
    bool first = true;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (static_cast<int>(j) == source) continue;
        if (!first) s.push_back('|');
        first = false;
        if (labels[j] == kNotTriggered) {
            s += "nan";
        } else {
            s += config.experiments[j].variants[labels[j]];
        }
    }
    return s;
}

// Cross tabulate source variant (restricted per include_nan_row) against
// the joint combination of all other experiments.
ContingencyTable cross_tabulate(const UnitTable& table, const std::string& source_id,
                                bool include_nan_row) {
    const AnalysisConfig& cfg = table.config();
    const int source = cfg.experiment_index(source_id);
    if (source < 0) throw ConfigError("unknown source experiment '" + source_id + "'");
    const std::size_t k = cfg.num_experiments();

    // joint key over the other experiments, kNotTriggered included
    std::map<std::vector<std::int32_t>, std::size_t> column_of;
    std::map<std::int32_t, std::size_t> row_of;  // variant index, kNotTriggered last
    std::vector<std::vector<std::int64_t>> counts;

    std::vector<std::int32_t> key(k - 1);
    for (std::size_t row = 0; row < table.size(); ++row) {
        const std::int32_t v = table.variant(source, row);
        if (v == kNotTriggered && !include_nan_row) continue;
        std::size_t pos = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (static_cast<int>(j) == source) continue;
            key[pos++] = table.variant(j, row);
        }
        auto [cit, cin] = column_of.try_emplace(key, column_of.size());
        auto [rit, rin] = row_of.try_emplace(v, row_of.size());
        if (rin) counts.emplace_back();
        for (auto& r : counts) r.resize(column_of.size(), 0);
        counts[rit->second][cit->second] += 1;
    }

    ContingencyTable ct;
    ct.source_id = source_id;

    // deterministic ordering: variants in declared order (nan last),
    // columns lexicographic with nan coordinates last
    std::vector<std::pair<std::int32_t, std::size_t>> rows(row_of.begin(), row_of.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        const bool a_nan = a.first == kNotTriggered;
        const bool b_nan = b.first == kNotTriggered;
        if (a_nan != b_nan) return b_nan;
        return a.first < b.first;
    });
    std::vector<std::pair<std::vector<std::int32_t>, std::size_t>> cols(column_of.begin(),
                                                                        column_of.end());
    std::sort(cols.begin(), cols.end(), [](const auto& a, const auto& b) {
        for (std::size_t i = 0; i < a.first.size(); ++i) {
            const bool a_nan = a.first[i] == kNotTriggered;
            const bool b_nan = b.first[i] == kNotTriggered;
            if (a_nan != b_nan) return b_nan;
            if (a.first[i] != b.first[i]) return a.first[i] < b.first[i];
        }
        return false;
    });

    for (const auto& [variant, _] : rows) {
        ct.row_labels.push_back(variant == kNotTriggered
                                    ? "nan"
                                    : cfg.experiments[source].variants[variant]);
    }
    for (const auto& [labels, _] : cols) {
        std::vector<std::int32_t> full(k, 0);
        std::size_t pos = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (static_cast<int>(j) == source) continue;
            full[j] = labels[pos++];
        }
        ct.column_labels.push_back(joint_label(full, cfg, source));
        ct.column_has_nan.push_back(std::find(labels.begin(), labels.end(),
                                              static_cast<std::int32_t>(kNotTriggered)) !=
                                    labels.end());
    }
    ct.counts.assign(rows.size(), std::vector<std::int64_t>(cols.size(), 0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            ct.counts[i][j] = counts[rows[i].second][cols[j].second];
            ct.total += ct.counts[i][j];
        }
    }
    return ct;
}

}  // namespace

ContingencyTable source_contingency_table(const UnitTable& table, const std::string& source_id) {
    ContingencyTable ct = cross_tabulate(table, source_id, /*include_nan_row=*/false);
    if (ct.rows() < 2 || ct.cols() < 2) {
        throw InsufficientDataError("source '" + source_id + "': contingency table is " +
                                    std::to_string(ct.rows()) + "x" + std::to_string(ct.cols()) +
                                    "; need at least 2x2");
    }
    return ct;
}

ContingencyTable joint_contingency_table(const UnitTable& table, const std::string& source_id) {
    ContingencyTable ct = cross_tabulate(table, source_id, /*include_nan_row=*/true);
    if (ct.rows() < 2 || ct.cols() < 2) {
        throw InsufficientDataError("source '" + source_id + "': joint table is " +
                                    std::to_string(ct.rows()) + "x" + std::to_string(ct.cols()));
    }
    return ct;
}

ChiSquaredResult chi_squared_homogeneity(const ContingencyTable& ct) {
    const std::size_t r = ct.rows();
    const std::size_t c = ct.cols();
    std::vector<double> row_sums(r), col_sums(c);
    for (std::size_t i = 0; i < r; ++i) row_sums[i] = static_cast<double>(ct.row_sum(i));
    for (std::size_t j = 0; j < c; ++j) col_sums[j] = static_cast<double>(ct.col_sum(j));
    for (const double s : row_sums) {
        if (s <= 0) throw InsufficientDataError("chi_squared_homogeneity: zero row margin");
    }
    for (const double s : col_sums) {
        if (s <= 0) throw InsufficientDataError("chi_squared_homogeneity: zero column margin");
    }

    const double n = static_cast<double>(ct.total);
    ChiSquaredResult res;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double expected = row_sums[i] * col_sums[j] / n;
            if (expected < 5.0) res.low_expected_count = true;
            const double d = static_cast<double>(ct.counts[i][j]) - expected;
            res.chi2 += d * d / expected;
        }
    }
    res.dof = static_cast<int>((r - 1) * (c - 1));
    res.p_value = chi_squared_survival(res.chi2, res.dof);
    return res;
}

ChiSquaredResult chi_squared_block(const ContingencyTable& ct, std::size_t absent_row,
                                   std::size_t absent_col) {
    const std::size_t r = ct.rows();
    const std::size_t c = ct.cols();
    if (absent_row >= r || absent_col >= c) {
        throw ConfigError("chi_squared_block: absent cell outside the table");
    }
    if (ct.counts[absent_row][absent_col] != 0) {
        throw ConfigError("chi_squared_block: the structurally absent cell holds units");
    }

    // Quasi-independence fit on present cells: E_ij = a_i * b_j, scaled so
    // present-cell row and column sums match the observed margins (IPF).
    std::vector<double> row_sums(r, 0.0), col_sums(c, 0.0);
    for (std::size_t i = 0; i < r; ++i) row_sums[i] = static_cast<double>(ct.row_sum(i));
    for (std::size_t j = 0; j < c; ++j) col_sums[j] = static_cast<double>(ct.col_sum(j));

    std::vector<std::vector<double>> fit(r, std::vector<double>(c, 1.0));
    fit[absent_row][absent_col] = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        double max_rel = 0.0;
        for (std::size_t i = 0; i < r; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) s += fit[i][j];
            if (s <= 0.0) throw InsufficientDataError("chi_squared_block: empty row after fit");
            const double scale = row_sums[i] / s;
            max_rel = std::max(max_rel, std::fabs(scale - 1.0));
            for (std::size_t j = 0; j < c; ++j) fit[i][j] *= scale;
        }
        for (std::size_t j = 0; j < c; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < r; ++i) s += fit[i][j];
            if (s <= 0.0) throw InsufficientDataError("chi_squared_block: empty column after fit");
            const double scale = col_sums[j] / s;
            max_rel = std::max(max_rel, std::fabs(scale - 1.0));
            for (std::size_t i = 0; i < r; ++i) fit[i][j] *= scale;
        }
        if (max_rel < 1e-12) break;
    }

    ChiSquaredResult res;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            if (i == absent_row && j == absent_col) continue;
            const double expected = fit[i][j];
            if (expected < 5.0) res.low_expected_count = true;
            if (expected <= 0.0) continue;
            const double d = static_cast<double>(ct.counts[i][j]) - expected;
            res.chi2 += d * d / expected;
        }
    }
    res.dof = static_cast<int>((r - 1) * (c - 1)) - 1;
    if (res.dof < 1) {
        res.dof = 0;
        res.p_value = 1.0;  // saturated fit
        return res;
    }
    res.p_value = chi_squared_survival(res.chi2, res.dof);
    return res;
}

double cramers_v(double chi2, std::int64_t n, std::size_t n_rows, std::size_t n_cols,
                 CramersVMode mode) {
    if (n <= 0) throw ConfigError("cramers_v: N must be positive");
    const double scale =
        mode == CramersVMode::PaperMinDim
            ? static_cast<double>(std::min(n_rows, n_cols))
            : static_cast<double>(std::min(n_rows, n_cols) - 1);
    if (scale <= 0.0) return 0.0;
    return std::sqrt(chi2 / (static_cast<double>(n) * scale));
}

std::vector<DiagnosticResult> invariance_check(const UnitTable& table) {
    const AnalysisConfig& cfg = table.config();
    const std::size_t k = cfg.num_experiments();
    if (k < 2) throw ConfigError("invariance_check: requires at least 2 experiments");
    const double bonferroni = cfg.alpha / static_cast<double>(k);

    std::vector<DiagnosticResult> results;
    for (const auto& exp : cfg.experiments) {
        DiagnosticResult dr;
        dr.source_id = exp.id;
        dr.bonferroni_alpha_used = bonferroni;
        try {
            dr.table = source_contingency_table(table, exp.id);
            const ChiSquaredResult chi = chi_squared_homogeneity(dr.table);
            dr.chi2 = chi.chi2;
            dr.dof = chi.dof;
            dr.p_value = chi.p_value;
            dr.low_expected_count = chi.low_expected_count;
            dr.cramers_v = cramers_v(chi.chi2, dr.table.total, dr.table.rows(), dr.table.cols());
            dr.verdict = (dr.p_value < bonferroni && dr.cramers_v > cfg.cramers_v_threshold)
                             ? Verdict::Flag
                             : Verdict::Pass;
        } catch (const InsufficientDataError& e) {
            dr.verdict = Verdict::Skipped;
            dr.skip_reason = e.what();
        }
        results.push_back(std::move(dr));
    }
    return results;
}

std::vector<BarChartRow> export_bar_chart_data(const DiagnosticResult& result) {
    std::vector<BarChartRow> rows;
    const ContingencyTable& ct = result.table;
    for (std::size_t i = 0; i < ct.rows(); ++i) {
        const double total = static_cast<double>(ct.row_sum(i));
        for (std::size_t j = 0; j < ct.cols(); ++j) {
            BarChartRow row;
            row.source_variant = ct.row_labels[i];
            row.column_label = ct.column_labels[j];
            row.proportion = total > 0 ? static_cast<double>(ct.counts[i][j]) / total : 0.0;
            row.is_nan_column = ct.column_has_nan[j];
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_bar_chart_csv(const std::vector<BarChartRow>& rows, std::ostream& out) {
    out << "source_variant,column_label,proportion,is_nan_column\n";
    char buf[40];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.12g", row.proportion);
        out << row.source_variant << ',' << row.column_label << ',' << buf << ','
            << (row.is_nan_column ? 1 : 0) << '\n';
    }
}

}  // namespace mea
