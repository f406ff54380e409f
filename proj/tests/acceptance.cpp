// Acceptance gate: eight end-to-end checks, one pass/fail line each,
// nonzero exit if any fails.  Tolerances are fixed here, not tuned at
// run time:
//   1. certified distance intervals bracket a 512x512 grid oracle
//      (slack 2/512 for band discretization) on 45 random pairs, < 60 s
//   2. metric axioms on the same intervals (identity, exact symmetry,
//      relaxed triangle inequality)
//   3. cover max edge at least halves on every one of 10 refinements
//   4. the six bundled traces cluster as {0,1}, {2,3,4}, {5} and the
//      slow-down pair's interval lies strictly below every interval
//      involving the jam trace
//   5. 600 noisy variants project to three 1-D modes: 3-means
//      silhouette > 0.5 and mode gaps > 2x the largest within-mode
//      standard deviation, < 120 s
//   6. the box [0.25,0.3]x[0.5,0.51] renders to an exact formula whose
//      truth on the bundled traces matches box crossing exactly
//   7. evaluation is monotone in normalized parameters (1000 random
//      pairs per bundled spec) and printing round-trips 50 generated
//      formulas structurally
//   8. the seed-0 synthetic case study classifies the idealized
//      slow-down with the slow-downs and refines to 0 false negatives
//      and 0 false positives at threshold 0.3

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "logidist/pipeline.hpp"
#include "oracle.hpp"

using namespace logidist;
namespace oracle = logidist::testing;

namespace {

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point start) {
    return std::chrono::duration<double>(clock_t_::now() - start).count();
}

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
};

int g_failures = 0;

void report(int index, const std::string& name, const Outcome& o) {
    if (!o.ok) ++g_failures;
    std::printf("criterion %d %s: %s%s%s\n", index, name.c_str(), o.ok ? "PASS" : "FAIL",
                o.detail.empty() ? "" : " ", o.detail.c_str());
    std::fflush(stdout);
}

std::filesystem::path spec_dir() { return std::filesystem::path(LOGIDIST_SPEC_DIR); }

// Shared state between criteria 1 and 2.
struct OracleRun {
    std::vector<Trace> traces;
    std::vector<std::vector<Point>> bands;
    DistanceMatrix matrix;
    DistanceOptions opts;
};

// --- criterion 1: interval brackets vs a dense grid oracle ---------------

OracleRun criterion1(const ParametricSpec& spec) {
    const auto start = clock_t_::now();
    OracleRun run;
    run.opts.delta = 0.02;
    run.opts.eta = 1e-4;
    run.opts.max_depth = 20;
    run.opts.use_scan_pruning = true;

    constexpr int kGrid = 512;
    const double slack = 2.0 / kGrid;
    for (int i = 0; i < 10; ++i)
        run.traces.push_back(oracle::random_step_trace("c1_" + std::to_string(i), 1000 + i));
    for (const Trace& t : run.traces)
        run.bands.push_back(oracle::boundary_band(oracle::make_grid(spec, t, kGrid)));

    BoundaryCache cache;
    run.matrix = distance_matrix(spec, run.traces, run.opts, &cache);

    Outcome o;
    double worst_margin = 1e9;
    for (std::size_t i = 0; i < run.traces.size(); ++i) {
        for (std::size_t j = i + 1; j < run.traces.size(); ++j) {
            const double truth = oracle::hausdorff_points(run.bands[i], run.bands[j]);
            const DistanceResult& r = run.matrix.at(i, j);
            const double lo_margin = truth - (r.lo - slack);
            const double hi_margin = (r.hi + slack) - truth;
            worst_margin = std::min(worst_margin, std::min(lo_margin, hi_margin));
            if (lo_margin < 0.0 || hi_margin < 0.0)
                o.fail("(pair " + std::to_string(i) + "," + std::to_string(j) + ": oracle " +
                       format_double(truth) + " outside [" + format_double(r.lo - slack) + ", " +
                       format_double(r.hi + slack) + "])");
        }
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 60.0) o.fail("(took " + format_double(elapsed) + " s, limit 60 s)");
    if (o.ok)
        o.detail = "(45 pairs bracketed with slack " + format_double(2.0 / kGrid) +
                   ", worst margin " + format_double(worst_margin) + ", " +
                   format_double(elapsed) + " s)";
    report(1, "certified intervals bracket the grid oracle", o);
    return run;
}

// --- criterion 2: metric axioms on the computed intervals ----------------

void criterion2(const ParametricSpec& spec, const OracleRun& run) {
    Outcome o;
    BoundaryCache cache;
    for (std::size_t i = 0; i < run.traces.size(); ++i) {
        const DistanceResult self = approx_dist(spec, run.traces[i], run.traces[i], run.opts, &cache);
        if (self.lo != 0.0)
            o.fail("(identity: lo(x,x) = " + format_double(self.lo) + " for trace " +
                   std::to_string(i) + ")");
        if (self.hi > run.opts.delta)
            o.fail("(identity: hi(x,x) = " + format_double(self.hi) + " > delta for trace " +
                   std::to_string(i) + ")");
    }
    for (std::size_t i = 0; i < run.traces.size() && o.ok; ++i)
        for (std::size_t j = i + 1; j < run.traces.size(); ++j) {
            const DistanceResult ab = approx_dist(spec, run.traces[i], run.traces[j], run.opts);
            const DistanceResult ba = approx_dist(spec, run.traces[j], run.traces[i], run.opts);
            if (ab.lo != ba.lo || ab.hi != ba.hi) {
                o.fail("(symmetry broken on pair " + std::to_string(i) + "," + std::to_string(j) + ")");
                break;
            }
        }
    const std::size_t n = run.traces.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) {
                if (i == j || j == k || i == k) continue;
                const double lhs = run.matrix.at(i, k).lo;
                const double rhs = run.matrix.at(i, j).hi + run.matrix.at(j, k).hi;
                if (lhs > rhs + 1e-12)
                    o.fail("(triangle: lo(" + std::to_string(i) + "," + std::to_string(k) +
                           ") = " + format_double(lhs) + " > " + format_double(rhs) + ")");
            }
    if (o.ok)
        o.detail = "(identity, exact symmetry, relaxed triangle over " + std::to_string(n) +
                   " traces)";
    report(2, "interval metric axioms", o);
}

// --- criterion 3: refinement halves the max edge -------------------------

void criterion3(const ParametricSpec& spec) {
    Outcome o;
    double worst_ratio = 0.0;
    for (int s = 0; s < 5; ++s) {
        const Trace t = oracle::random_step_trace("c3_" + std::to_string(s), 2000 + s);
        BoundaryApprox b = approx_init(spec, t);
        for (int step = 0; step < 10; ++step) {
            const double before = max_edge(b.rects);
            b = refine(spec, t, b);
            const double after = max_edge(b.rects);
            worst_ratio = std::max(worst_ratio, after / before);
            if (after > 0.5 * before + 1e-12)
                o.fail("(trace " + std::to_string(s) + " step " + std::to_string(step) +
                       ": edge " + format_double(before) + " -> " + format_double(after) + ")");
        }
    }
    if (o.ok)
        o.detail = "(50 refinement steps, worst shrink ratio " + format_double(worst_ratio) + ")";
    report(3, "max edge halves on every refinement", o);
}

// --- criterion 4: bundled traces cluster as described --------------------

DistanceMatrix criterion4(const ParametricSpec& spec) {
    Outcome o;
    const std::vector<Trace> traces = intro_traces();
    DistanceOptions opts;
    opts.use_scan_pruning = true;
    const DistanceMatrix m = distance_matrix(spec, traces, opts);
    const Labeling lab = agglomerative(m, 3, Linkage::Complete);
    const std::vector<int> expected = {0, 0, 1, 1, 1, 2};
    if (lab.labels != expected) {
        std::string got;
        for (int l : lab.labels) got += std::to_string(l);
        o.fail("(labels " + got + ", expected 001112)");
    }
    const double pair_hi = m.at(0, 1).hi;
    double min_jam_lo = 1e9;
    for (std::size_t i = 0; i < 5; ++i) min_jam_lo = std::min(min_jam_lo, m.at(i, 5).lo);
    if (!(pair_hi < min_jam_lo))
        o.fail("(slow-down pair hi " + format_double(pair_hi) +
               " not below smallest jam-pair lo " + format_double(min_jam_lo) + ")");
    if (o.ok)
        o.detail = "(clusters {0,1},{2,3,4},{5}; d(0,1).hi " + format_double(pair_hi) +
                   " < min d(.,5).lo " + format_double(min_jam_lo) + ")";
    report(4, "bundled traces cluster into the three described groups", o);
    return m;
}

// --- criterion 5: three 1-D modes after noisy projection -----------------

void criterion5(const ParametricSpec& spec) {
    const auto start = clock_t_::now();
    Outcome o;
    const std::vector<Trace> noisy = augment_noise(intro_traces(), 100, 1.0, 0.3, 5);
    const DimredResult dr = dimred(spec, noisy, line_from_angle(0.7853981633974483), 20);
    if (dr.absent != 0) o.fail("(" + std::to_string(dr.absent) + " traces missed the ray)");

    std::vector<Point> pts;
    for (const auto& t : dr.tstars)
        if (t) pts.push_back(Point{*t});
    const KMeansResult km = kmeans(pts, 3, 0);
    const double sil = silhouette(pts, km.labels, 3);
    if (!(sil > 0.5)) o.fail("(silhouette " + format_double(sil) + " <= 0.5)");

    std::vector<double> mean(3, 0.0), sd(3, 0.0);
    std::vector<int> count(3, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        mean[static_cast<std::size_t>(km.labels[i])] += pts[i][0];
        ++count[static_cast<std::size_t>(km.labels[i])];
    }
    for (int c = 0; c < 3; ++c) {
        if (count[c] == 0) {
            o.fail("(mode " + std::to_string(c) + " is empty)");
            report(5, "noisy projection separates into three modes", o);
            return;
        }
        mean[static_cast<std::size_t>(c)] /= count[static_cast<std::size_t>(c)];
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto c = static_cast<std::size_t>(km.labels[i]);
        sd[c] += (pts[i][0] - mean[c]) * (pts[i][0] - mean[c]);
    }
    double max_sd = 0.0;
    for (int c = 0; c < 3; ++c) {
        sd[static_cast<std::size_t>(c)] =
            std::sqrt(sd[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)]);
        max_sd = std::max(max_sd, sd[static_cast<std::size_t>(c)]);
    }
    std::vector<double> centers = mean;
    std::sort(centers.begin(), centers.end());
    double min_gap = 1e9;
    for (int c = 0; c + 1 < 3; ++c)
        min_gap = std::min(min_gap, centers[static_cast<std::size_t>(c) + 1] -
                                        centers[static_cast<std::size_t>(c)]);
    if (!(min_gap > 2.0 * max_sd))
        o.fail("(mode gap " + format_double(min_gap) + " <= 2 x stddev " + format_double(max_sd) +
               ")");
    const double elapsed = seconds_since(start);
    if (elapsed >= 120.0) o.fail("(took " + format_double(elapsed) + " s, limit 120 s)");
    if (o.ok)
        o.detail = "(600 crossings, silhouette " + format_double(sil) + ", min mode gap " +
                   format_double(min_gap) + " > 2 x " + format_double(max_sd) + ", " +
                   format_double(elapsed) + " s)";
    report(5, "noisy projection separates into three modes", o);
}

// --- criterion 6: exact extraction formula and crossing equivalence ------

void criterion6(const ParametricSpec& spec) {
    Outcome o;
    const Rect box{Point{0.25, 0.5}, Point{0.3, 0.51}};
    const LabelSpec ls = extract_label_spec(spec, box);
    const std::string expected =
        "spec (G[0.25,1] (x < 0.5)) and (not (G[0.25,1] (x < 0.51))) and "
        "(not (G[0.3,1] (x < 0.5)))\n";
    if (ls.text != expected) o.fail("(rendered \"" + ls.text + "\")");

    const ParametricSpec learned = parse_spec(ls.text, "learned");
    int crossers = 0;
    for (const Trace& t : intro_traces()) {
        const bool says_true = evaluate(learned, t, {});
        const bool crosses = classify_box(spec, t, box) == BoxClass::Mixed;
        crossers += crosses ? 1 : 0;
        if (says_true != crosses)
            o.fail("(trace " + t.id + ": formula " + (says_true ? "true" : "false") +
                   " but box crossing " + (crosses ? "true" : "false") + ")");
    }
    if (o.ok)
        o.detail = "(exact text match; truth matches crossing on all 6 traces, " +
                   std::to_string(crossers) + " crossers)";
    report(6, "box extraction renders exactly and matches box crossing", o);
}

// --- criterion 7: monotone evaluation + structural round-trips -----------

/// Random formula text: parameters appear at most once each so their
/// polarity is always consistent.
struct FormulaGen {
    rng_t rng;
    std::uniform_real_distribution<double> unit{0.0, 1.0};
    std::string decls;
    int next_param = 0;

    explicit FormulaGen(std::uint64_t seed) : rng(seed) {}

    std::string threshold() {
        if (unit(rng) < 0.3) {
            const std::string name = "p" + std::to_string(next_param++);
            decls += "param " + name + " in [0," + format_double(0.5 + unit(rng)) + "];\n";
            return name;
        }
        return format_double(1.5 * unit(rng));
    }

    std::string atom() {
        return std::string("(x ") + (unit(rng) < 0.5 ? "<" : ">") + " " + threshold() + ")";
    }

    std::string node(int depth) {
        const double r = unit(rng);
        if (depth == 0 || r < 0.25) return atom();
        if (r < 0.4) return "(not " + node(depth - 1) + ")";
        if (r < 0.55) return "(" + node(depth - 1) + " and " + node(depth - 1) + ")";
        if (r < 0.7) return "(" + node(depth - 1) + " or " + node(depth - 1) + ")";
        double a = unit(rng), b = unit(rng);
        if (a > b) std::swap(a, b);
        return std::string(unit(rng) < 0.5 ? "G" : "F") + "[" + format_double(a) + "," +
               format_double(b) + "] " + node(depth - 1);
    }

    std::string formula() {
        decls.clear();
        next_param = 0;
        const std::string body = node(3);
        return decls + "spec " + body + "\n";
    }
};

void criterion7() {
    Outcome o;
    const char* names[] = {"phi_ex.psl",        "eventually_peak.psl", "band_escape.psl",
                           "nested_window.psl", "negated_atom.psl",    "calm_tail.psl"};
    rng_t rng(77);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    long checked = 0;
    for (const char* name : names) {
        const ParametricSpec s = load_spec(spec_dir() / name);
        for (int trial = 0; trial < 1000 && o.ok; ++trial) {
            const Trace t = oracle::random_step_trace("c7", 3000 + static_cast<std::uint64_t>(trial) * 7 + checked);
            std::vector<double> a(s.dims()), b(s.dims());
            for (std::size_t d = 0; d < s.dims(); ++d) {
                const double u = unit(rng), v = unit(rng);
                a[d] = std::min(u, v);
                b[d] = std::max(u, v);
            }
            if (evaluate(s, t, a) && !evaluate(s, t, b))
                o.fail(std::string("(") + name + ": true at the lower point, false above)");
            ++checked;
        }
    }

    FormulaGen gen(99);
    int round_trips = 0;
    for (int i = 0; i < 50 && o.ok; ++i) {
        const std::string text = gen.formula();
        ParametricSpec s;
        try {
            s = parse_spec(text, "gen");
        } catch (const input_error& e) {
            o.fail("(generated formula rejected: " + std::string(e.what()) + ")");
            break;
        }
        const ParametricSpec back = parse_spec(pretty_print(s), "gen");
        if (!same_structure(s, back) || pretty_print(back) != pretty_print(s))
            o.fail("(round trip changed: " + text + ")");
        else
            ++round_trips;
    }
    if (o.ok)
        o.detail = "(" + std::to_string(checked) + " ordered pairs monotone; " +
                   std::to_string(round_trips) + "/50 formulas round-trip)";
    report(7, "evaluation monotone in parameters and printing round-trips", o);
}

// --- criterion 8: synthetic case study at seed 0 -------------------------

void criterion8(const ParametricSpec& spec) {
    const auto start = clock_t_::now();
    Outcome o;
    const CaseStudyConfig cfg;  // 25 per family, 10 decoys, k=4, threshold 0.3
    const CaseStudyData data = casestudy_synthetic_data(cfg, 0);
    const CaseStudyReport rep = run_casestudy(spec, data, cfg, 0);

    const int ref_comp = gmm_predict(rep.gmm, Point{rep.reference_feature[0],
                                                    rep.reference_feature[1]});
    std::vector<int> family_comp_count(rep.gmm.comps.size(), 0);
    for (const CaseStudyVerdict& v : rep.verdicts)
        if (v.family == "slow_down" && v.component >= 0)
            ++family_comp_count[static_cast<std::size_t>(v.component)];
    int majority = 0;
    for (std::size_t c = 1; c < family_comp_count.size(); ++c)
        if (family_comp_count[c] > family_comp_count[static_cast<std::size_t>(majority)])
            majority = static_cast<int>(c);
    if (ref_comp != majority)
        o.fail("(idealized slow-down in component " + std::to_string(ref_comp) +
               " but the slow-downs are in " + std::to_string(majority) + ")");
    bool ref_candidate = false;
    for (int c : rep.candidate_components) ref_candidate |= c == ref_comp;
    if (!ref_candidate)
        o.fail("(the idealized slow-down's component is not a candidate)");
    if (rep.false_negatives != 0)
        o.fail("(" + std::to_string(rep.false_negatives) + " false negatives)");
    if (rep.false_positives != 0)
        o.fail("(" + std::to_string(rep.false_positives) + " false positives)");
    if (rep.extracted_spec.empty()) o.fail("(no spec extracted for the confirmed cluster)");
    const double elapsed = seconds_since(start);
    if (o.ok)
        o.detail = "(110 traces, 0 false negatives, 0 false positives at threshold 0.3, " +
                   format_double(elapsed) + " s)";
    report(8, "seed-0 case study refines to zero mislabels", o);
}

}  // namespace

int main() {
    try {
        const ParametricSpec spec = load_spec(spec_dir() / "phi_ex.psl");
        const OracleRun run = criterion1(spec);
        criterion2(spec, run);
        criterion3(spec);
        criterion4(spec);
        criterion5(spec);
        criterion6(spec);
        criterion7();
        criterion8(spec);
    } catch (const std::exception& e) {
        std::printf("acceptance run aborted: %s\n", e.what());
        return 1;
    }
    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all 8 criteria passed\n");
    return 0;
}
