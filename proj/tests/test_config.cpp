#include <catch2/catch_amalgamated.hpp>

#include "plotyield/config.hpp"

using namespace plotyield;

TEST_CASE("config parses sections, scalars, strings and arrays") {
    Config cfg = Config::parse(R"(
# pipeline config
[camera]
fx = 410
fy = 410.0
k1 = -0.01

[rank]
thresholds = [0.1, 0.2, 0.3]
use_adjusted = true
report = "report.json"
)");
    CHECK(cfg.get_int("camera", "fx", 0) == 410);
    CHECK(cfg.get_double("camera", "fy", 0) == 410.0);
    CHECK(cfg.get_double("camera", "k1", 0) == -0.01);
    CHECK(cfg.get_double("camera", "fx", 0) == 410.0);  // ints read as doubles too
    CHECK(cfg.get_bool("rank", "use_adjusted", false));
    CHECK(cfg.get_string("rank", "report", "") == "report.json");
    auto t = cfg.get_array("rank", "thresholds", {});
    REQUIRE(t == std::vector<double>{0.1, 0.2, 0.3});
}

TEST_CASE("config strips trailing comments outside quotes") {
    Config cfg = Config::parse("[a]\nx = 3.5 # trailing note\nname = \"has # inside\"\n");
    CHECK(cfg.get_double("a", "x", 0) == 3.5);
    CHECK(cfg.get_string("a", "name", "") == "has # inside");
}

TEST_CASE("config falls back to defaults for missing keys") {
    Config cfg = Config::parse("[a]\nx = 1\n");
    CHECK(cfg.get_int("a", "y", 7) == 7);
    CHECK(cfg.get_double("b", "x", 2.5) == 2.5);
    CHECK_FALSE(cfg.has("b", "x"));
    CHECK(cfg.has("a", "x"));
}

TEST_CASE("config reports parse and type errors") {
    CHECK_THROWS_AS(Config::parse("[a\n"), Error);
    CHECK_THROWS_AS(Config::parse("x 1\n"), Error);
    CHECK_THROWS_AS(Config::parse("[a]\nx = \"open\n"), Error);
    Config cfg = Config::parse("[a]\nx = \"str\"\n");
    CHECK_THROWS_AS(cfg.get_int("a", "x", 0), Error);
}
