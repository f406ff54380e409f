#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "logidist/project.hpp"
#include "logidist/specdsl.hpp"
#include "oracle.hpp"

using namespace logidist;
using testing::constant_trace;

namespace {

const double kHalfPi = 1.5707963267948966;

ParametricSpec peak_spec() {
    return parse_spec(
        "param a in [0,1];\n"
        "param c in [0,2];\n"
        "spec F[a,1] (x > c)\n",
        "peak");
}

}  // namespace

TEST_CASE("line_from_angle scales the largest component to one") {
    CHECK(line_from_angle(0.0).dir == Point{1.0, 0.0});
    CHECK(line_from_angle(kHalfPi).dir == Point{0.0, 1.0});
    const LineProjection diag = line_from_angle(kHalfPi / 2.0);
    CHECK(diag.dir[0] == Catch::Approx(1.0));
    CHECK(diag.dir[1] == Catch::Approx(1.0));
    const LineProjection steep = line_from_angle(1.36);
    CHECK(steep.dir[1] == 1.0);
    CHECK(steep.dir[0] == Catch::Approx(std::cos(1.36) / std::sin(1.36)));
    CHECK_THROWS_AS(line_from_angle(-0.1), input_error);
    CHECK_THROWS_AS(line_from_angle(1.6), input_error);
    CHECK_THROWS_AS(line_from_angle(std::nan("")), input_error);
}

TEST_CASE("ray parameter distance equals point distance") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int it = 0; it < 100; ++it) {
        const LineProjection line = line_from_angle(unit(rng) * kHalfPi);
        const double t1 = unit(rng), t2 = unit(rng);
        const Point p1 = line.at(t1), p2 = line.at(t2);
        CHECK(testing::dist_inf(p1, p2) == std::abs(t1 - t2));
    }
}

TEST_CASE("project_boundary bisects the crossing on the ray") {
    const ParametricSpec spec = phi_ex();
    const Trace tr = constant_trace("flat", 0.5);
    const LineProjection diag = line_from_angle(kHalfPi / 2.0);

    const auto cr = project_boundary(spec, tr, diag, 1e-4);
    REQUIRE(cr.has_value());
    // On the diagonal the flip sits where the threshold meets the level.
    CHECK(cr->t == Catch::Approx(0.5).margin(1e-4));
    CHECK(cr->point[0] == Catch::Approx(cr->t));
    CHECK(cr->point[1] == Catch::Approx(cr->t));

    CHECK_THROWS_AS(project_boundary(spec, tr, diag, 0.0), input_error);
}

TEST_CASE("project_boundary is absent when the ray does not cross") {
    const LineProjection diag = line_from_angle(kHalfPi / 2.0);
    // Spec holds everywhere: both ray endpoints are inside the domain.
    CHECK_FALSE(project_boundary(phi_ex(), constant_trace("low", -1.0), diag).has_value());
    // Spec holds nowhere.
    CHECK_FALSE(project_boundary(peak_spec(), constant_trace("neg", -1.0), diag).has_value());
    // One-parameter specs have no 2-D ray to project onto.
    const ParametricSpec one = parse_spec("param c in [0,1];\nspec x < c\n", "one");
    CHECK_THROWS_AS(project_boundary(one, constant_trace("flat", 0.5), diag), input_error);
}

TEST_CASE("bounding boxes and box separation") {
    const Rect box = bounding_box_of({{0.2, 0.8}, {0.5, 0.1}, {0.3, 0.4}});
    CHECK(box == Rect{{0.2, 0.1}, {0.5, 0.8}});
    CHECK_THROWS_AS(bounding_box_of({}), internal_error);

    const Rect a{{0.0, 0.0}, {0.2, 0.2}};
    CHECK(box_separation_inf(a, Rect{{0.5, 0.1}, {0.7, 0.3}}) == Catch::Approx(0.3));
    CHECK(box_separation_inf(a, Rect{{0.5, 0.6}, {0.7, 0.7}}) == Catch::Approx(0.4));
    CHECK(box_separation_inf(a, Rect{{0.1, 0.1}, {0.3, 0.3}}) == 0.0);  // overlap
    CHECK(box_separation_inf(a, Rect{{0.2, 0.0}, {0.4, 0.2}}) == 0.0);  // touching
    // Symmetric.
    const Rect b{{0.5, 0.1}, {0.7, 0.3}};
    CHECK(box_separation_inf(a, b) == box_separation_inf(b, a));
}

TEST_CASE("box separation equals the closest point pair for separated labels") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> lo_side(0.0, 0.4);
    std::uniform_real_distribution<double> hi_side(0.6, 1.0);
    std::uniform_int_distribution<int> count(1, 8);
    for (int it = 0; it < 50; ++it) {
        std::vector<Point> a, b;
        for (int i = count(rng); i > 0; --i) a.push_back({lo_side(rng)});
        for (int i = count(rng); i > 0; --i) b.push_back({hi_side(rng)});
        double closest = std::numeric_limits<double>::infinity();
        for (const Point& p : a)
            for (const Point& q : b) closest = std::min(closest, std::abs(p[0] - q[0]));
        CHECK(box_separation_inf(bounding_box_of(a), bounding_box_of(b)) == closest);
    }
    // Interleaved labels break the identity: the boxes overlap even
    // though no two points coincide.
    const std::vector<Point> a = {{0.0}, {1.0}};
    const std::vector<Point> b = {{0.5}};
    CHECK(box_separation_inf(bounding_box_of(a), bounding_box_of(b)) == 0.0);
}

TEST_CASE("optimize_projection separates constant-level families") {
    const ParametricSpec spec = phi_ex();
    const std::vector<Trace> traces = {constant_trace("a", 0.2), constant_trace("b", 0.25),
                                       constant_trace("c", 0.75), constant_trace("d", 0.8)};
    const Labeling lab{2, {0, 0, 1, 1}};

    const ProjectionResult res = optimize_projection(spec, traces, lab);
    REQUIRE(res.lines.size() == 1);
    CHECK(res.score > 0.5);

    // Recompute the score at the chosen ray: it must match exactly.
    std::vector<std::vector<Point>> by_label(2);
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto cr = project_boundary(spec, traces[i], res.lines[0]);
        REQUIRE(cr.has_value());
        by_label[lab.labels[i]].push_back(Point{cr->t});
    }
    CHECK(res.score ==
          box_separation_inf(bounding_box_of(by_label[0]), bounding_box_of(by_label[1])));

    // Greedy second ray can only improve on the first ray's separation.
    ProjectionOptions two;
    two.lines = 2;
    const ProjectionResult res2 = optimize_projection(spec, traces, lab, two);
    REQUIRE(res2.lines.size() == 2);
    CHECK(res2.lines[0].angle == res.lines[0].angle);
    CHECK(res2.score >= res.score - 1e-12);
}

TEST_CASE("optimize_projection ties keep the smallest angle") {
    // Identical traces in both labels: every ray scores zero.
    const ParametricSpec spec = phi_ex();
    const std::vector<Trace> traces = {constant_trace("a", 0.5), constant_trace("b", 0.5)};
    const Labeling lab{2, {0, 1}};
    const ProjectionResult res = optimize_projection(spec, traces, lab);
    CHECK(res.score == 0.0);
    CHECK(res.lines[0].angle == Catch::Approx(0.5 * kHalfPi / 90.0));
}

TEST_CASE("optimize_projection reports labels without crossings") {
    const ParametricSpec spec = phi_ex();
    // The second trace satisfies the spec everywhere: no ray ever
    // crosses its boundary, so label 1 can never be scored.
    const std::vector<Trace> traces = {constant_trace("a", 0.5), constant_trace("b", -1.0)};
    const Labeling lab{2, {0, 1}};
    CHECK_THROWS_WITH(optimize_projection(spec, traces, lab),
                      Catch::Matchers::ContainsSubstring("labels without crossings: 1"));
}

TEST_CASE("optimize_projection validates its inputs") {
    const ParametricSpec spec = phi_ex();
    const std::vector<Trace> traces = {constant_trace("a", 0.3), constant_trace("b", 0.7)};
    CHECK_THROWS_AS(optimize_projection(spec, traces, Labeling{2, {0}}), input_error);
    CHECK_THROWS_AS(optimize_projection(spec, traces, Labeling{1, {0, 0}}), input_error);
    ProjectionOptions bad;
    bad.angle_steps = 0;
    CHECK_THROWS_AS(optimize_projection(spec, traces, Labeling{2, {0, 1}}, bad), input_error);
    bad = {};
    bad.lines = 3;
    CHECK_THROWS_AS(optimize_projection(spec, traces, Labeling{2, {0, 1}}, bad), input_error);
}

TEST_CASE("normalized boxes map to raw parameter ranges") {
    // Both parameters increasing over [0,1]: the identity.
    const Rect same = normalized_box_to_raw(phi_ex(), Rect{{0.25, 0.5}, {0.3, 0.51}});
    CHECK(same == Rect{{0.25, 0.5}, {0.3, 0.51}});

    // Decreasing parameters flip, and ranges rescale.
    const Rect raw = normalized_box_to_raw(peak_spec(), Rect{{0.2, 0.3}, {0.4, 0.6}});
    CHECK(raw.bot[0] == Catch::Approx(0.6));
    CHECK(raw.top[0] == Catch::Approx(0.8));
    CHECK(raw.bot[1] == Catch::Approx(0.8));
    CHECK(raw.top[1] == Catch::Approx(1.4));
}

TEST_CASE("extract_label_spec renders the base and raised corners") {
    const ParametricSpec spec = phi_ex();

    SECTION("narrow box near the threshold flat") {
        const LabelSpec ls = extract_label_spec(spec, Rect{{0.25, 0.5}, {0.3, 0.51}});
        CHECK(ls.text ==
              "spec (G[0.25,1] (x < 0.5)) and (not (G[0.25,1] (x < 0.51))) and "
              "(not (G[0.3,1] (x < 0.5)))\n");
        CHECK(ls.warning.empty());
        // The rendered text is valid DSL input again.
        const ParametricSpec back = parse_spec(ls.text, "label0");
        CHECK(back.params.empty());
        CHECK(evaluate(back, constant_trace("flat", 0.5), {}) == false);
    }
    SECTION("wider tau raise goes before the wider threshold raise") {
        const LabelSpec ls = extract_label_spec(spec, Rect{{0.27, 0.55}, {0.38, 0.76}});
        CHECK(ls.text ==
              "spec (G[0.27,1] (x < 0.55)) and (not (G[0.38,1] (x < 0.55))) and "
              "(not (G[0.27,1] (x < 0.76)))\n");
    }
    SECTION("threshold raise smaller than tau raise goes first") {
        const LabelSpec ls = extract_label_spec(spec, Rect{{0.35, 0.17}, {0.62, 0.31}});
        CHECK(ls.text ==
              "spec (G[0.35,1] (x < 0.17)) and (not (G[0.35,1] (x < 0.31))) and "
              "(not (G[0.62,1] (x < 0.17)))\n");
    }
    SECTION("flat boxes carry a warning") {
        const LabelSpec ls = extract_label_spec(spec, Rect{{0.25, 0.5}, {0.25, 0.51}});
        CHECK_FALSE(ls.warning.empty());
        CHECK(ls.warning.find("tau") != std::string::npos);
    }
    SECTION("dimension mismatch and inverted boxes are rejected") {
        CHECK_THROWS_AS(extract_label_spec(spec, Rect{{0.1}, {0.2}}), input_error);
        CHECK_THROWS_AS(extract_label_spec(spec, Rect{{0.3, 0.5}, {0.2, 0.6}}), input_error);
    }
}

TEST_CASE("dimred histograms ray crossings and counts misses") {
    const ParametricSpec spec = phi_ex();
    const std::vector<Trace> traces = {constant_trace("a", 0.22), constant_trace("b", 0.53),
                                       constant_trace("c", 0.81), constant_trace("d", -1.0)};
    const LineProjection diag = line_from_angle(kHalfPi / 2.0);
    const DimredResult res = dimred(spec, traces, diag, 20);

    REQUIRE(res.tstars.size() == 4);
    CHECK(res.tstars[0].value() == Catch::Approx(0.22).margin(1e-3));
    CHECK(res.tstars[1].value() == Catch::Approx(0.53).margin(1e-3));
    CHECK(res.tstars[2].value() == Catch::Approx(0.81).margin(1e-3));
    CHECK_FALSE(res.tstars[3].has_value());
    CHECK(res.absent == 1);

    REQUIRE(res.histogram.size() == 20);
    CHECK(res.histogram[4] == 1);   // 0.22 in [0.2, 0.25)
    CHECK(res.histogram[10] == 1);  // 0.53 in [0.5, 0.55)
    CHECK(res.histogram[16] == 1);  // 0.81 in [0.8, 0.85)
    std::size_t total = 0;
    for (std::size_t c : res.histogram) total += c;
    CHECK(total == 3);

    const std::string csv = dimred_to_csv(res, {"a", "b", "c", "d"});
    const auto lines = split(csv, '\n');
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "id,t_star");
    CHECK(lines[1] == "a," + format_double(*res.tstars[0]));
    CHECK(lines[4] == "d,");

    const std::string hist = histogram_to_csv(res);
    const auto hlines = split(hist, '\n');
    REQUIRE(hlines.size() == 22);
    CHECK(hlines[0] == "bin_lo,bin_hi,count");
    CHECK(hlines[2] == "0.05,0.1,0");
    CHECK(hlines[5] == "0.2,0.25,1");

    CHECK_THROWS_AS(dimred(spec, traces, diag, 0), input_error);
    CHECK_THROWS_AS(dimred_to_csv(res, {"a"}), internal_error);
}
