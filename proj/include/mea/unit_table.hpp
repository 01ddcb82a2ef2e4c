#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mea/config.hpp"

namespace mea {

// One ingested row: variant index per experiment (kNotTriggered when the
// unit did not trigger) and one value per metric column.
struct UnitRecord {
    std::string unit_id;
    std::vector<std::int32_t> variant;
    std::vector<double> values;
};

// Immutable columnar unit-level table. Rows carry no meaning beyond
// identity; all estimators consume aggregated views of this table.
class UnitTable {
public:
    UnitTable(AnalysisConfig config, std::vector<UnitRecord> records);

    const AnalysisConfig& config() const { return config_; }
    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t size() const { return unit_ids_.size(); }

    const std::string& unit_id(std::size_t row) const { return unit_ids_[row]; }
    std::int32_t variant(std::size_t experiment, std::size_t row) const {
        return variants_[experiment][row];
    }
    double value(std::size_t column, std::size_t row) const { return values_[column][row]; }

    const std::vector<std::int32_t>& variant_column(std::size_t experiment) const {
        return variants_[experiment];
    }
    const std::vector<double>& value_column(std::size_t column) const { return values_[column]; }

    int column_index(const std::string& name) const;  // -1 if absent

private:
    AnalysisConfig config_;
    std::vector<std::string> columns_;
    std::vector<std::string> unit_ids_;
    std::vector<std::vector<std::int32_t>> variants_;  // [experiment][row]
    std::vector<std::vector<double>> values_;          // [column][row]
};

// Parse and validate the CSV schema described in the README: header with
// unit_id, one column per experiment id (variant name, empty = not
// triggered), one column per metric column. Throws SchemaError,
// ValueError, DuplicateUnitError.
UnitTable ingest_unit_table(std::istream& source, const AnalysisConfig& config);

// Serialize back to the same CSV schema; floats at 17 significant digits
// so ingest(write(t)) == t field-by-field.
void write_unit_table_csv(const UnitTable& table, std::ostream& out);

}  // namespace mea
