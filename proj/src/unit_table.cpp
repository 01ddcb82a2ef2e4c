#include "mea/unit_table.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "mea/errors.hpp"

namespace mea {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_metric_value(const std::string& text, const std::string& column, std::size_t line_no) {
    if (text.empty()) {
        throw ValueError("row " + std::to_string(line_no) + ": empty value for metric column '" +
                         column + "'");
    }
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) {
        throw ValueError("row " + std::to_string(line_no) + ": cannot parse '" + text +
                         "' in metric column '" + column + "'");
    }
    if (!std::isfinite(v)) {
        throw ValueError("row " + std::to_string(line_no) + ": non-finite value in metric column '" +
                         column + "'");
    }
    return v;
}

}  // namespace

UnitTable::UnitTable(AnalysisConfig config, std::vector<UnitRecord> records)
    : config_(std::move(config)), columns_(config_.metric_columns()) {
    const std::size_t k = config_.num_experiments();
    const std::size_t n_cols = columns_.size();

    unit_ids_.reserve(records.size());
    variants_.assign(k, {});
    values_.assign(n_cols, {});
    for (auto& col : variants_) col.reserve(records.size());
    for (auto& col : values_) col.reserve(records.size());

    std::unordered_set<std::string> seen;
    seen.reserve(records.size() * 2);
    bool any_triggered = false;
    for (auto& r : records) {
        if (r.variant.size() != k || r.values.size() != n_cols) {
            throw SchemaError("record '" + r.unit_id + "' has mismatched field counts");
        }
        if (!seen.insert(r.unit_id).second) {
            throw DuplicateUnitError("duplicate unit_id '" + r.unit_id + "'");
        }
        for (std::size_t j = 0; j < k; ++j) {
            const std::int32_t v = r.variant[j];
            if (v != kNotTriggered &&
                (v < 0 || v >= static_cast<std::int32_t>(config_.experiments[j].variants.size()))) {
                throw SchemaError("record '" + r.unit_id + "' has out-of-range variant for experiment '" +
                                  config_.experiments[j].id + "'");
            }
            if (v != kNotTriggered) any_triggered = true;
        }
        for (double v : r.values) {
            if (!std::isfinite(v)) {
                throw ValueError("record '" + r.unit_id + "' carries a non-finite metric value");
            }
        }
        unit_ids_.push_back(std::move(r.unit_id));
        for (std::size_t j = 0; j < k; ++j) variants_[j].push_back(r.variant[j]);
        for (std::size_t c = 0; c < n_cols; ++c) values_[c].push_back(r.values[c]);
    }
    if (!unit_ids_.empty() && !any_triggered) {
        throw SchemaError("table has records but no unit triggers any experiment");
    }
}

int UnitTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        if (columns_[i] == name) return static_cast<int>(i);
    }
    return -1;
}

UnitTable ingest_unit_table(std::istream& source, const AnalysisConfig& config) {
    validate_config(config);

    std::string line;
    if (!std::getline(source, line)) throw SchemaError("empty input: missing header row");
    const auto header = split_csv_line(line);

    auto find_column = [&header](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    };

    const int id_col = find_column("unit_id");
    if (id_col < 0) throw SchemaError("missing required column 'unit_id'");

    std::vector<int> experiment_cols;
    for (const auto& e : config.experiments) {
        const int c = find_column(e.id);
        if (c < 0) throw SchemaError("missing experiment column '" + e.id + "'");
        experiment_cols.push_back(c);
    }
    const auto metric_columns = config.metric_columns();
    std::vector<int> value_cols;
    for (const auto& name : metric_columns) {
        const int c = find_column(name);
        if (c < 0) throw SchemaError("missing metric column '" + name + "'");
        value_cols.push_back(c);
    }

    std::vector<UnitRecord> records;
    std::size_t line_no = 1;
    while (std::getline(source, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw SchemaError("row " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        UnitRecord rec;
        rec.unit_id = fields[id_col];
        if (rec.unit_id.empty()) {
            throw SchemaError("row " + std::to_string(line_no) + ": empty unit_id");
        }
        rec.variant.resize(config.num_experiments());
        for (std::size_t j = 0; j < config.num_experiments(); ++j) {
            const std::string& cell = fields[experiment_cols[j]];
            if (cell == kNotTriggeredToken || cell == "NOT_TRIGGERED") {
                rec.variant[j] = kNotTriggered;
            } else {
                const int v = config.experiments[j].variant_index(cell);
                if (v < 0) {
                    throw SchemaError("row " + std::to_string(line_no) + ": unknown variant '" + cell +
                                      "' for experiment '" + config.experiments[j].id + "'");
                }
                rec.variant[j] = v;
            }
        }
        rec.values.reserve(value_cols.size());
        for (std::size_t c = 0; c < value_cols.size(); ++c) {
            rec.values.push_back(parse_metric_value(fields[value_cols[c]], metric_columns[c], line_no));
        }
        records.push_back(std::move(rec));
    }
    return UnitTable(config, std::move(records));
}

void write_unit_table_csv(const UnitTable& table, std::ostream& out) {
    const auto& cfg = table.config();
    out << "unit_id";
    for (const auto& e : cfg.experiments) out << ',' << e.id;
    for (const auto& c : table.columns()) out << ',' << c;
    out << '\n';

    char buf[40];
    for (std::size_t row = 0; row < table.size(); ++row) {
        out << table.unit_id(row);
        for (std::size_t j = 0; j < cfg.num_experiments(); ++j) {
            const std::int32_t v = table.variant(j, row);
            out << ',';
            if (v != kNotTriggered) out << cfg.experiments[j].variants[v];
        }
        for (std::size_t c = 0; c < table.columns().size(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", table.value(c, row));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace mea
