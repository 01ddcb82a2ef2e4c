#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mea/unit_table.hpp"

namespace mea {

// Contingency table for one source experiment: rows are the source's
// observed variants (triggered units only), columns the observed joint
// variant combinations of all other experiments with "nan" marking
// non-triggered coordinates. Columns observed zero times never appear.
struct ContingencyTable {
    std::string source_id;
    std::vector<std::string> row_labels;
    std::vector<std::string> column_labels;
    std::vector<bool> column_has_nan;  // column fixes some experiment at non-triggered
    std::vector<std::vector<std::int64_t>> counts;  // [row][column]
    std::int64_t total = 0;

    std::size_t rows() const { return row_labels.size(); }
    std::size_t cols() const { return column_labels.size(); }
    std::int64_t row_sum(std::size_t i) const;
    std::int64_t col_sum(std::size_t j) const;
};

struct ChiSquaredResult {
    double chi2 = 0.0;
    int dof = 0;
    double p_value = 1.0;
    bool low_expected_count = false;  // some expected cell below 5
};

enum class Verdict { Pass, Flag, Skipped };

struct DiagnosticResult {
    std::string source_id;
    Verdict verdict = Verdict::Skipped;
    double chi2 = 0.0;
    int dof = 0;
    double p_value = 1.0;
    double cramers_v = 0.0;
    double bonferroni_alpha_used = 0.0;
    bool low_expected_count = false;
    std::string skip_reason;
    ContingencyTable table;
};

// Restrict to units triggered in the source experiment and cross the
// source variant against the joint state of all other experiments.
// Throws InsufficientDataError with fewer than 2 rows or 2 columns.
ContingencyTable source_contingency_table(const UnitTable& table, const std::string& source_id);

// Classical homogeneity test: E_ij = row_i * col_j / N, dof (r-1)(c-1),
// upper-tail p via the regularized incomplete gamma.
ChiSquaredResult chi_squared_homogeneity(const ContingencyTable& ct);

// The default scaling divides by min(rows, cols), matching the deployed
// convention this library follows. Note the wrinkle: under that scaling a
// perfectly dependent 2x2 table yields V = sqrt(1/2) ~= 0.707, not 1. The
// textbook min(rows-1, cols-1) variant, which does reach 1 there, is
// available as an explicit mode.
enum class CramersVMode {
    PaperMinDim,           // sqrt(chi2 / (N * min(rows, cols)))
    TextbookMinDimMinusOne // sqrt(chi2 / (N * min(rows-1, cols-1)))
};

double cramers_v(double chi2, std::int64_t n, std::size_t n_rows, std::size_t n_cols,
                 CramersVMode mode = CramersVMode::PaperMinDim);

// One chi-squared homogeneity test per source experiment, Bonferroni at
// alpha/k, flag when both p < alpha/k and V exceeds the configured
// threshold. Sources with insufficient data come back as Skipped.
std::vector<DiagnosticResult> invariance_check(const UnitTable& table);

struct BarChartRow {
    std::string source_variant;
    std::string column_label;
    double proportion = 0.0;
    bool is_nan_column = false;
};

// Per source-variant conditional distribution over columns; nan-containing
// columns are tagged so a renderer can grey them out.
std::vector<BarChartRow> export_bar_chart_data(const DiagnosticResult& result);

void write_bar_chart_csv(const std::vector<BarChartRow>& rows, std::ostream& out);

// Joint-table mode: rows are the source's variants plus "nan", over all
// units. The all-non-triggered corner cell is structurally absent; the
// block test fits expected counts by iterative proportional fitting on
// the present cells with one degree of freedom removed.
ContingencyTable joint_contingency_table(const UnitTable& table, const std::string& source_id);
ChiSquaredResult chi_squared_block(const ContingencyTable& ct, std::size_t absent_row,
                                   std::size_t absent_col);

}  // namespace mea
