#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "logidist/trace.hpp"

using namespace logidist;

namespace {

Trace make_trace(std::string id, std::vector<Sample> samples) {
    Trace t{std::move(id), std::move(samples)};
    validate_trace(t);
    return t;
}

}  // namespace

TEST_CASE("csv parse accepts comments, blank lines and CRLF") {
    std::string body =
        "# speed log\r\n"
        "time,value\r\n"
        "0,0.5\r\n"
        "\r\n"
        "0.5,0.75\r\n"
        "1,0.25\r\n";
    Trace t = parse_trace_csv(body, "demo");
    REQUIRE(t.samples.size() == 3);
    CHECK(t.samples[0] == Sample{0.0, 0.5});
    CHECK(t.samples[1] == Sample{0.5, 0.75});
    CHECK(t.samples[2] == Sample{1.0, 0.25});
}

TEST_CASE("csv parse errors name the offending line") {
    CHECK_THROWS_WITH(parse_trace_csv("time,value\n0,abc\n", "t"),
                      Catch::Matchers::ContainsSubstring("line 2"));
    CHECK_THROWS_WITH(parse_trace_csv("bad,header\n0,1\n", "t"),
                      Catch::Matchers::ContainsSubstring("header"));
    CHECK_THROWS_WITH(parse_trace_csv("time,value\n0,1\n0,2\n", "t"),
                      Catch::Matchers::ContainsSubstring("strictly increasing"));
    CHECK_THROWS_WITH(parse_trace_csv("time,value\n0,1,2\n", "t"),
                      Catch::Matchers::ContainsSubstring("2 fields"));
    CHECK_THROWS_AS(parse_trace_csv("time,value\n", "t"), input_error);
    CHECK_THROWS_AS(parse_trace_csv("", "t"), input_error);
}

TEST_CASE("csv round trip is identity") {
    Trace t = make_trace("rt", {{0.0, 0.123456789012345}, {1.0 / 3.0, -2.5}, {0.7, 1e-17}, {2.0, 3.0}});
    Trace back = parse_trace_csv(trace_to_csv(t), "rt");
    CHECK(back == t);
}

TEST_CASE("file save/load round trip through temp dir") {
    auto dir = std::filesystem::temp_directory_path() / "logidist_trace_test";
    std::filesystem::create_directories(dir);
    Trace t = make_trace("disk", {{0.0, 0.25}, {1.0, 0.5}});
    save_trace_csv(t, dir / "disk.csv");
    Trace back = load_trace_csv(dir / "disk.csv");
    CHECK(back == t);
    CHECK(back.id == "disk");
    CHECK_THROWS_AS(load_trace_csv(dir / "missing.csv"), input_error);
}

TEST_CASE("value_at holds the previous sample value") {
    Trace t = make_trace("step", {{0.0, 1.0}, {0.5, 2.0}, {1.0, 3.0}});
    CHECK(value_at(t, 0.0) == 1.0);
    CHECK(value_at(t, 0.49) == 1.0);
    CHECK(value_at(t, 0.5) == 2.0);
    CHECK(value_at(t, 0.99) == 2.0);
    CHECK(value_at(t, 1.0) == 3.0);
    CHECK_THROWS_AS(value_at(t, -0.01), input_error);
    CHECK_THROWS_AS(value_at(t, 1.01), input_error);
    CHECK(value_at_clamped(t, -5.0) == 1.0);
    CHECK(value_at_clamped(t, 5.0) == 3.0);
}

TEST_CASE("rescale composes within 1e-12") {
    Trace t = make_trace("r", {{0.0, 70.0}, {30.0, 35.0}, {90.0, 7.0}});
    Rescaling a{0.5, 1.0 / 70.0};
    Rescaling b{2.0 / 90.0, 0.5};
    Trace lhs = rescale(rescale(t, a), b);
    Trace rhs = rescale(t, {a.time_scale * b.time_scale, a.value_scale * b.value_scale});
    REQUIRE(lhs.samples.size() == rhs.samples.size());
    for (std::size_t i = 0; i < lhs.samples.size(); ++i) {
        CHECK(lhs.samples[i].time == Catch::Approx(rhs.samples[i].time).margin(1e-12));
        CHECK(lhs.samples[i].value == Catch::Approx(rhs.samples[i].value).margin(1e-12));
    }
    CHECK_THROWS_AS(rescale(t, {0.0, 1.0}), input_error);
    CHECK_THROWS_AS(rescale(t, {1.0, -2.0}), input_error);
}

TEST_CASE("augment_noise is deterministic under a fixed seed") {
    Trace base = make_trace("b", {{0.0, 1.0}, {0.5, 2.0}, {1.0, 0.5}});
    auto a = augment_noise({base}, 5, 1.0, 0.3, 42);
    auto b = augment_noise({base}, 5, 1.0, 0.3, 42);
    auto c = augment_noise({base}, 5, 1.0, 0.3, 43);
    REQUIRE(a.size() == 5);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(a[0].id == "b_n0");
    CHECK(a[4].id == "b_n4");
    for (const Trace& v : a) {
        REQUIRE(v.samples.size() == base.samples.size());
        for (std::size_t i = 0; i < v.samples.size(); ++i)
            CHECK(v.samples[i].time == base.samples[i].time);
    }
}

TEST_CASE("augment_noise with zero stddev multiplies by the mean") {
    Trace base = make_trace("z", {{0.0, 2.0}, {1.0, 4.0}});
    auto out = augment_noise({base}, 2, 0.5, 0.0, 7);
    REQUIRE(out.size() == 2);
    for (const Trace& v : out) {
        CHECK(v.samples[0].value == Catch::Approx(1.0));
        CHECK(v.samples[1].value == Catch::Approx(2.0));
    }
}

TEST_CASE("noise sample means concentrate near the base value") {
    Trace base = make_trace("m", {{0.0, 1.0}});
    auto out = augment_noise({base}, 2000, 1.0, 0.3, 11);
    double sum = 0.0;
    for (const Trace& v : out) sum += v.samples[0].value;
    CHECK(sum / 2000.0 == Catch::Approx(1.0).margin(0.03));
}
