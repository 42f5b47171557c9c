#include "chiralhom/config.hpp"
#include "chiralhom/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>

#include <unistd.h>

using namespace chiralhom;
namespace fs = std::filesystem;

namespace {

json minimal() {
    return json::parse(R"({
      "schema_version": 1,
      "experiment": "helix",
      "phases": [
        {"a": 1.0, "kappa": 1.0, "probability": 0.5},
        {"a": 2.0, "kappa": -1.0, "probability": 0.5}
      ]
    })");
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("chiralhom_test_" + std::to_string(::getpid())) / name;
    return p;
}

}  // namespace

TEST(BinaryGrid, RoundTripIsBitExact) {
    const Magnetization m = Magnetization::random({3, 2, 5}, 0.37, 11);
    const fs::path p = scratch("m.chmg");
    write_grid(p, m);
    const Magnetization back = read_grid(p);
    EXPECT_EQ(back.dims(), m.dims());
    EXPECT_EQ(back.h(), m.h());
    EXPECT_EQ(back.values(), m.values());
    EXPECT_EQ(fs::file_size(p), 4u + 4u + 24u + 8u + 30u * 24u);
}

TEST(BinaryGrid, RejectsCorruptFiles) {
    std::string bytes = encode_grid(Magnetization({1, 1, 2}, 1.0));
    EXPECT_THROW(decode_grid(bytes.substr(0, bytes.size() - 3)), ConfigError);
    std::string bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(decode_grid(bad), ConfigError);
}

TEST(Csv, TraceAndColumn) {
    MinimizeTrace t;
    t.rows = {{0, -1.5, 0.25, 0.0}, {1, -2.0, 0.125, 0.5}};
    EXPECT_EQ(trace_csv(t), "iter,energy,grad_norm,step\n0,-1.5,0.25,0\n1,-2,0.125,0.5\n");
    const std::string col = column_csv(Magnetization({1, 1, 2}, 0.5, Vec3::UnitY()));
    EXPECT_EQ(col, "z,m1,m2,m3\n0.25,0,1,0\n0.75,0,1,0\n");
}

TEST(Format, RoundTripsDoubles) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) EXPECT_EQ(std::stod(fmt(v)), v);
}

TEST(Config, MinimalDefaults) {
    const RunConfig cfg = parse_config(minimal());
    EXPECT_EQ(cfg.experiment, "helix");
    EXPECT_EQ(cfg.laminate.table.size(), 2u);
    EXPECT_EQ(cfg.cells, 512u);
    EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{1});
    EXPECT_EQ(cfg.windows.size(), 4u);
    EXPECT_EQ(cfg.quantities.size(), 7u);
}

TEST(Config, EpsLevels) {
    json j = minimal();
    j["grid"] = {{"length", 64.0}};
    j["eps_levels"] = {3, 4, 7};
    const RunConfig cfg = parse_config(j);
    ASSERT_EQ(cfg.epsilons.size(), 3u);
    EXPECT_EQ(cfg.epsilons[0], 8.0);
    EXPECT_EQ(cfg.epsilons[2], 0.5);
    j.erase("eps_levels");
    j["epsilons"] = {1.0, 2.0};
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, SchemaViolations) {
    json j = minimal();
    j["phases"][1]["probability"] = 0.4;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = minimal();
    j["unknown_key"] = 1;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = minimal();
    j["schema_version"] = 2;
    EXPECT_THROW(parse_config(j), ConfigError);
    j = minimal();
    j["seeds"] = json::array();
    EXPECT_THROW(parse_config(j), ConfigError);
    j = minimal();
    j["phases"][0]["width"] = {{"law", "gamma"}, {"mean", 1.0}};
    EXPECT_THROW(parse_config(j), ConfigError);
    j = minimal();
    j["cells_per_layer"] = 2;
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, LoadErrorsAreConfigErrors) {
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
    const fs::path p = scratch("broken.json");
    write_atomic(p, "{ not json");
    EXPECT_THROW(load_config(p), ConfigError);
    write_atomic(p, R"({"schema_version": 1, "experiment": "helix", "phases": [{"a": "one", "probability": 1}]})");
    EXPECT_THROW(load_config(p), ConfigError);
}
