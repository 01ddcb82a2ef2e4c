#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "mea/config.hpp"
#include "mea/errors.hpp"
#include "mea/unit_table.hpp"

#include "test_util.hpp"

using namespace mea;

namespace {

AnalysisConfig two_experiment_config() {
    AnalysisConfig cfg;
    cfg.experiments.push_back({"e1", {"c1", "t1"}, "c1"});
    cfg.experiments.push_back({"e2", {"c2", "t2"}, "c2"});
    cfg.metrics.push_back({"m1", MetricKind::Mean, "m1", ""});
    return cfg;
}

}  // namespace

TEST_CASE("not-triggered marker parses from empty cell and literal token") {
    const std::string csv =
        "unit_id,e1,e2,m1\n"
        "u1,t1,,5.0\n"
        "u2,c1,NOT_TRIGGERED,1.5\n"
        "u3,,t2,2.0\n";
    std::istringstream in(csv);
    const UnitTable table = ingest_unit_table(in, two_experiment_config());
    REQUIRE(table.size() == 3);
    CHECK(table.variant(0, 0) == 1);              // t1
    CHECK(table.variant(1, 0) == kNotTriggered);
    CHECK(table.variant(1, 1) == kNotTriggered);
    CHECK(table.variant(0, 2) == kNotTriggered);
    CHECK(table.value(0, 0) == 5.0);
}

TEST_CASE("unknown variant raises SchemaError") {
    const std::string csv = "unit_id,e1,e2,m1\nu1,x9,,1\n";
    std::istringstream in(csv);
    CHECK_THROWS_AS(ingest_unit_table(in, two_experiment_config()), SchemaError);
}

TEST_CASE("missing columns raise SchemaError") {
    std::istringstream no_metric("unit_id,e1,e2\nu1,t1,,\n");
    CHECK_THROWS_AS(ingest_unit_table(no_metric, two_experiment_config()), SchemaError);
    std::istringstream no_unit("id,e1,e2,m1\nu1,t1,,1\n");
    CHECK_THROWS_AS(ingest_unit_table(no_unit, two_experiment_config()), SchemaError);
    std::istringstream no_exp("unit_id,e1,m1\nu1,t1,1\n");
    CHECK_THROWS_AS(ingest_unit_table(no_exp, two_experiment_config()), SchemaError);
}

TEST_CASE("duplicate unit ids rejected") {
    const std::string csv = "unit_id,e1,e2,m1\nu1,t1,,1\nu1,c1,,2\n";
    std::istringstream in(csv);
    CHECK_THROWS_AS(ingest_unit_table(in, two_experiment_config()), DuplicateUnitError);
}

TEST_CASE("non-finite metric values rejected") {
    std::istringstream nan_in("unit_id,e1,e2,m1\nu1,t1,,nan\n");
    CHECK_THROWS_AS(ingest_unit_table(nan_in, two_experiment_config()), ValueError);
    std::istringstream inf_in("unit_id,e1,e2,m1\nu1,t1,,inf\n");
    CHECK_THROWS_AS(ingest_unit_table(inf_in, two_experiment_config()), ValueError);
    std::istringstream junk("unit_id,e1,e2,m1\nu1,t1,,12x\n");
    CHECK_THROWS_AS(ingest_unit_table(junk, two_experiment_config()), ValueError);
    std::istringstream empty("unit_id,e1,e2,m1\nu1,t1,,\n");
    CHECK_THROWS_AS(ingest_unit_table(empty, two_experiment_config()), ValueError);
}

TEST_CASE("HandEx fixture ingests with 20 records, 2 experiments, 1 metric") {
    const UnitTable table = mea_test::load_handex();
    CHECK(table.size() == 20);
    CHECK(table.config().num_experiments() == 2);
    CHECK(table.columns().size() == 1);
    // every variant value is either the marker or a declared variant
    for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t row = 0; row < table.size(); ++row) {
            const auto v = table.variant(j, row);
            const bool declared =
                v == kNotTriggered ||
                (v >= 0 &&
                 v < static_cast<std::int32_t>(table.config().experiments[j].variants.size()));
            CHECK(declared);
        }
    }
}

TEST_CASE("CSV round-trip reproduces the table field by field") {
    // awkward floats on purpose
    AnalysisConfig cfg = two_experiment_config();
    cfg.metrics.push_back({"ctr", MetricKind::Ratio, "clicks", "views"});
    std::ostringstream src;
    src << "unit_id,e1,e2,m1,clicks,views\n";
    src << "a,t1,t2,0.1,1,3\n";
    src << "b,c1,,0.3333333333333333,0,7\n";
    src << "c,,t2,-1e-17,2.5,9.25\n";
    src << "d,t1,c2,123456.78901234567,3,3\n";
    std::istringstream in(src.str());
    const UnitTable t1 = ingest_unit_table(in, cfg);

    std::ostringstream out;
    write_unit_table_csv(t1, out);
    std::istringstream in2(out.str());
    const UnitTable t2 = ingest_unit_table(in2, cfg);

    REQUIRE(t2.size() == t1.size());
    for (std::size_t row = 0; row < t1.size(); ++row) {
        CHECK(t1.unit_id(row) == t2.unit_id(row));
        for (std::size_t j = 0; j < cfg.num_experiments(); ++j) {
            CHECK(t1.variant(j, row) == t2.variant(j, row));
        }
        for (std::size_t c = 0; c < t1.columns().size(); ++c) {
            CHECK(t1.value(c, row) == t2.value(c, row));
        }
    }
}

TEST_CASE("validate_config counts combinations and applies the cap") {
    AnalysisConfig cfg;
    cfg.experiments.push_back({"e1", {"c", "v1", "v2", "v3", "v4"}, "c"});
    cfg.experiments.push_back({"e2", {"c", "v1", "v2"}, "c"});
    cfg.metrics.push_back({"m", MetricKind::Mean, "m", ""});
    CHECK(cfg.combination_count() == 14);
    CHECK(validate_config(cfg).empty());

    AnalysisConfig three;
    for (const char* id : {"a", "b", "c"}) {
        three.experiments.push_back({id, {"c", "t"}, "c"});
    }
    three.metrics.push_back({"m", MetricKind::Mean, "m", ""});
    CHECK(three.combination_count() == 7);
    CHECK(validate_config(three).empty());

    AnalysisConfig big;
    big.experiments.push_back({"e1", {"a", "b", "c", "d", "e", "f", "g", "h"}, "a"});
    big.experiments.push_back({"e2", {"a", "b", "c", "d", "e", "f", "g", "h"}, "a"});
    big.metrics.push_back({"m", MetricKind::Mean, "m", ""});
    CHECK(big.combination_count() == 63);
    CHECK(validate_config(big).size() == 1);  // above the default cap of 50
}

TEST_CASE("config invariant violations raise ConfigError") {
    AnalysisConfig cfg = two_experiment_config();
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);

    cfg = two_experiment_config();
    cfg.jackknife_buckets = 1;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);

    cfg = two_experiment_config();
    cfg.experiments[1].id = "e1";  // duplicate id
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);

    cfg = two_experiment_config();
    cfg.experiments[0].baseline = "zz";
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);

    cfg = two_experiment_config();
    cfg.experiments[0].variants = {"c1", "c1"};
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);

    cfg = two_experiment_config();
    cfg.experiments[0].variants.push_back("");  // reserved marker
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("config JSON parsing") {
    const AnalysisConfig cfg = mea_test::handex_config();
    CHECK(cfg.experiments.size() == 2);
    CHECK(cfg.experiments[0].baseline == "c1");
    CHECK(cfg.metrics.size() == 1);
    CHECK(cfg.metrics[0].numerator_column == "m1");  // mean metric falls back to name
    CHECK(cfg.variance_method == VarianceMethod::Analytic);
    CHECK(cfg.scenarios.size() == 2);
    CHECK(cfg.scenarios[0].fix.at("e1") == "t1");

    CHECK_THROWS_AS(config_from_json("{"), ConfigError);
    CHECK_THROWS_AS(config_from_json("{\"experiments\":[]}"), ConfigError);
}

TEST_CASE("a nonempty table must trigger something") {
    const std::string csv = "unit_id,e1,e2,m1\nu1,,,1\nu2,,,2\n";
    std::istringstream in(csv);
    CHECK_THROWS_AS(ingest_unit_table(in, two_experiment_config()), SchemaError);
    // but an empty table is fine
    std::istringstream empty("unit_id,e1,e2,m1\n");
    const UnitTable t = ingest_unit_table(empty, two_experiment_config());
    CHECK(t.size() == 0);
}
