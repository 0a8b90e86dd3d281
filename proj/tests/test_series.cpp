#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fegp/series.hpp"

using namespace fegp;
namespace fs = std::filesystem;

namespace {
std::string temp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}
void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}
}  // namespace

TEST_CASE("rfc3339 parse and format round trip") {
    CHECK(parse_rfc3339("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_rfc3339("2024-01-01T00:00:00Z") == 1704067200);
    CHECK(parse_rfc3339("2024-01-01T01:00:00+01:00") == 1704067200);
    CHECK(format_rfc3339(1704067200) == "2024-01-01T00:00:00Z");
    for (std::int64_t t : {0LL, 1704067200LL, 1704068100LL, 999999999LL})
        CHECK(parse_rfc3339(format_rfc3339(t)) == t);
    CHECK_THROWS(parse_rfc3339("not-a-timestamp"));
}

TEST_CASE("ingest_csv passes through contiguous rows") {
    const std::string p = temp_path("fegp_ingest_basic.csv");
    write_file(p,
               "timestamp,value\n"
               "2024-01-01T00:00:00Z,1\n"
               "2024-01-01T00:15:00Z,2\n"
               "2024-01-01T00:30:00Z,3\n"
               "2024-01-01T00:45:00Z,4\n");
    const TrafficSeries s = ingest_csv(p, 900);
    REQUIRE(s.size() == 4);
    CHECK(s.values == std::vector<double>{1, 2, 3, 4});
    CHECK(s.start_epoch == 1704067200);
}

TEST_CASE("ingest_csv accepts epoch-second timestamps") {
    const std::string p = temp_path("fegp_ingest_epoch.csv");
    write_file(p, "timestamp,value\n1704067200,5\n1704068100,6\n");
    const TrafficSeries s = ingest_csv(p, 900);
    REQUIRE(s.size() == 2);
    CHECK(s.values[1] == 6.0);
}

TEST_CASE("ingest_csv rejects a gap and names the missing slot") {
    const std::string p = temp_path("fegp_ingest_gap.csv");
    write_file(p,
               "timestamp,value\n"
               "2024-01-01T00:00:00Z,1\n"
               "2024-01-01T00:45:00Z,2\n");
    CHECK_THROWS_WITH(ingest_csv(p, 900),
                      Catch::Matchers::ContainsSubstring("2024-01-01T00:15:00Z"));
}

TEST_CASE("ingest_csv rejects negative and malformed values") {
    const std::string neg = temp_path("fegp_ingest_neg.csv");
    write_file(neg, "timestamp,value\n1704067200,-1\n");
    CHECK_THROWS_WITH(ingest_csv(neg, 900), Catch::Matchers::ContainsSubstring("negative"));

    const std::string bad = temp_path("fegp_ingest_bad.csv");
    write_file(bad, "timestamp,value\n1704067200,1\n1704068100,oops\n");
    CHECK_THROWS_WITH(ingest_csv(bad, 900), Catch::Matchers::ContainsSubstring("row 3"));
}

TEST_CASE("two-week synthetic series round trips through CSV") {
    SyntheticSpec spec;
    spec.seed = 7;
    spec.days = 14;
    spec.noise_std = 3.0;
    spec.spike_rate = 2.0;
    const TrafficSeries s = synthesize(spec);
    REQUIRE(s.size() == 1344);

    const std::string p = temp_path("fegp_roundtrip.csv");
    write_csv(s, p);
    const TrafficSeries back = ingest_csv(p, 900);
    REQUIRE(back.size() == 1344);
    CHECK(back.start_epoch == s.start_epoch);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(back.values[i] == Catch::Approx(s.values[i]).epsilon(1e-9));
}

TEST_CASE("decompose constant series") {
    TrafficSeries s;
    s.values.assign(96 * 2, 42.0);
    const Decomposition d = decompose(s);
    REQUIRE(d.baseline.size() == 96);
    for (double b : d.baseline) CHECK(b == Catch::Approx(42.0));
    for (double r : d.residual.values) CHECK(std::abs(r) < 1e-12);
}

TEST_CASE("decompose exact periodic series over 3 days") {
    TrafficSeries s;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::vector<double> profile(96);
    for (auto& v : profile) v = u(rng);
    for (int day = 0; day < 3; ++day)
        s.values.insert(s.values.end(), profile.begin(), profile.end());
    const Decomposition d = decompose(s);
    for (std::size_t j = 0; j < 96; ++j) CHECK(d.baseline[j] == Catch::Approx(profile[j]));
    for (double r : d.residual.values) CHECK(std::abs(r) < 1e-9);
}

TEST_CASE("decompose spreads an injected spike across the per-slot mean") {
    const int D = 4;
    const std::size_t k = 17;
    const double h = 50.0;
    TrafficSeries s;
    s.values.assign(96 * D, 10.0);
    s.values[96 * 1 + k] += h;  // spike at slot k of day 2
    const Decomposition d = decompose(s);
    CHECK(d.residual.values[96 * 1 + k] == Catch::Approx(h * (D - 1) / double(D)));
    for (int day : {0, 2, 3})
        CHECK(d.residual.values[96 * day + k] == Catch::Approx(-h / double(D)));
}

TEST_CASE("decompose rejects sub-day series") {
    TrafficSeries s;
    s.values.assign(95, 1.0);
    CHECK_THROWS(decompose(s));
}

TEST_CASE("decompose reconstruction invariant on random series") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    TrafficSeries s;
    s.values.resize(96 * 5 + 37);  // incomplete trailing day included
    for (auto& v : s.values) v = u(rng);
    const Decomposition d = decompose(s);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double recon = d.baseline[i % 96] + d.residual.values[i];
        CHECK(recon == Catch::Approx(s.values[i]).epsilon(1e-9));
    }
}

TEST_CASE("decomposing a residual yields a near-zero baseline") {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1000.0);
    TrafficSeries s;
    s.values.resize(96 * 4);
    for (auto& v : s.values) v = u(rng);
    const Decomposition d = decompose(s);
    const Decomposition d2 = decompose(d.residual);
    for (double b : d2.baseline) CHECK(std::abs(b) < 1e-9 * 1000.0);
}

TEST_CASE("synthesize degenerate spec tiles the diurnal profile exactly") {
    SyntheticSpec spec;
    spec.seed = 1;
    spec.days = 3;
    spec.noise_std = 0;
    spec.spike_rate = 0;
    spec.trough_rate = 0;
    const TrafficSeries s = synthesize(spec);
    REQUIRE(s.size() == 96 * 3);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(s.values[i] == Catch::Approx(s.values[i % 96]));
    const Decomposition d = decompose(s);
    for (double r : d.residual.values) CHECK(std::abs(r) < 1e-9);
}

TEST_CASE("synthesize is deterministic under the seed") {
    SyntheticSpec spec;
    spec.seed = 99;
    spec.days = 7;
    spec.noise_std = 4.0;
    spec.spike_rate = 2.0;
    spec.trough_rate = 1.0;
    const TrafficSeries a = synthesize(spec);
    const TrafficSeries b = synthesize(spec);
    CHECK(a.values == b.values);

    spec.seed = 100;
    const TrafficSeries c = synthesize(spec);
    CHECK(a.values != c.values);
}

TEST_CASE("synthesize event log accounts for the exceedances") {
    SyntheticSpec spec;
    spec.seed = 3;
    spec.days = 7;
    spec.noise_std = 2.0;
    spec.spike_rate = 2.0;
    spec.event_scale = 80.0;
    const SyntheticResult res = synthesize_with_log(spec);
    REQUIRE(!res.events.empty());

    std::size_t exceed = 0;
    for (std::size_t i = 0; i < res.series.size(); ++i) {
        const double phase = 2.0 * M_PI * double(i % 96) / 96.0;
        const double base = spec.base_level + spec.base_amplitude * std::sin(phase - spec.base_phase);
        if (res.series.values[i] > base + 5.0 * spec.noise_std) ++exceed;
    }
    std::size_t onsets = 0;
    for (const auto& e : res.events)
        if (!e.trough) ++onsets;
    CHECK(exceed >= onsets);
}

TEST_CASE("synthesize clamps at zero") {
    SyntheticSpec spec;
    spec.seed = 12;
    spec.days = 2;
    spec.base_level = 5.0;
    spec.base_amplitude = 0.0;
    spec.trough_rate = 5.0;
    spec.event_scale = 100.0;
    const TrafficSeries s = synthesize(spec);
    for (double v : s.values) CHECK(v >= 0.0);
}

TEST_CASE("synthesize validates the spec") {
    SyntheticSpec spec;
    spec.days = 0;
    CHECK_THROWS(synthesize(spec));
    spec.days = 1;
    spec.noise_std = -1;
    CHECK_THROWS(synthesize(spec));
}
