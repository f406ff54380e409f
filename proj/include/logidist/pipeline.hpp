#pragma once

// End-to-end analysis pipeline: bundled trace families, JSON
// configuration, and the synthetic case study (generate labeled step
// traces, extract ray-crossing features, fit a mixture, then confirm
// slow-down candidates by certified boundary distance to an idealized
// reference).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "logidist/boundary.hpp"
#include "logidist/common.hpp"
#include "logidist/distance.hpp"
#include "logidist/learn.hpp"
#include "logidist/project.hpp"
#include "logidist/specdsl.hpp"
#include "logidist/trace.hpp"

namespace logidist {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ClusteringConfig {
    int k = 3;
    std::string linkage = "complete";
};

struct ProjectionConfig {
    int angle_steps = 90;
    double tol = 1e-4;
    int lines = 1;
};

struct DimredConfig {
    int bins = 20;
    double angle = 0.7853981633974483;  // pi/4
};

struct RescaleConfig {
    double time_scale = 1.0;
    double value_scale = 1.0;
};

struct CaseStudyConfig {
    int per_family = 25;
    int decoys = 10;
    int gmm_k = 4;
    double threshold = 0.3;         // certified-distance cut for confirming a candidate
    double candidate_radius = 0.5;  // feature-space radius for candidate components
    std::array<double, 2> filter_angles{0.46, 1.36};
};

struct PipelineConfig {
    std::string spec_path;
    std::string trace_dir;
    std::string out_dir = "out";
    double delta = 0.01;
    double eta = 1e-4;
    int max_depth = 20;
    std::uint64_t seed = 0;
    ClusteringConfig clustering;
    ProjectionConfig projection;
    DimredConfig dimred;
    RescaleConfig rescale;
    CaseStudyConfig casestudy;
};

namespace detail {

template <typename T>
void take(nlohmann::json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) {
        out = it->get<T>();
        obj.erase(it);
    }
}

inline void expect_empty(const nlohmann::json& obj, const std::string& where) {
    if (!obj.empty()) {
        std::string keys;
        for (auto it = obj.begin(); it != obj.end(); ++it)
            keys += (keys.empty() ? "" : ", ") + it.key();
        throw input_error("config: unknown key(s) in " + where + ": " + keys);
    }
}

}  // namespace detail

/// Parses a JSON config; every field is optional and defaults apply.
/// Unknown keys are rejected so typos do not silently fall back.
inline PipelineConfig config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw input_error("config: top level must be an object");
    PipelineConfig cfg;
    try {
        detail::take(j, "spec_path", cfg.spec_path);
        detail::take(j, "trace_dir", cfg.trace_dir);
        detail::take(j, "out_dir", cfg.out_dir);
        detail::take(j, "delta", cfg.delta);
        detail::take(j, "eta", cfg.eta);
        detail::take(j, "max_depth", cfg.max_depth);
        detail::take(j, "seed", cfg.seed);
        if (auto it = j.find("clustering"); it != j.end()) {
            nlohmann::json sub = *it;
            j.erase(it);
            detail::take(sub, "k", cfg.clustering.k);
            detail::take(sub, "linkage", cfg.clustering.linkage);
            detail::expect_empty(sub, "clustering");
        }
        if (auto it = j.find("projection"); it != j.end()) {
            nlohmann::json sub = *it;
            j.erase(it);
            detail::take(sub, "angle_steps", cfg.projection.angle_steps);
            detail::take(sub, "tol", cfg.projection.tol);
            detail::take(sub, "lines", cfg.projection.lines);
            detail::expect_empty(sub, "projection");
        }
        if (auto it = j.find("dimred"); it != j.end()) {
            nlohmann::json sub = *it;
            j.erase(it);
            detail::take(sub, "bins", cfg.dimred.bins);
            detail::take(sub, "angle", cfg.dimred.angle);
            detail::expect_empty(sub, "dimred");
        }
        if (auto it = j.find("rescale"); it != j.end()) {
            nlohmann::json sub = *it;
            j.erase(it);
            detail::take(sub, "time_scale", cfg.rescale.time_scale);
            detail::take(sub, "value_scale", cfg.rescale.value_scale);
            detail::expect_empty(sub, "rescale");
        }
        if (auto it = j.find("casestudy"); it != j.end()) {
            nlohmann::json sub = *it;
            j.erase(it);
            detail::take(sub, "per_family", cfg.casestudy.per_family);
            detail::take(sub, "decoys", cfg.casestudy.decoys);
            detail::take(sub, "gmm_k", cfg.casestudy.gmm_k);
            detail::take(sub, "threshold", cfg.casestudy.threshold);
            detail::take(sub, "candidate_radius", cfg.casestudy.candidate_radius);
            detail::take(sub, "filter_angles", cfg.casestudy.filter_angles);
            detail::expect_empty(sub, "casestudy");
        }
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("config: bad field type: ") + e.what());
    }
    detail::expect_empty(j, "top level");
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    return config_from_json(read_file(path));
}

// ---------------------------------------------------------------------------
// Trace loading
// ---------------------------------------------------------------------------

/// Loads every .csv in a directory (sorted by filename), applying the
/// configured rescaling.
inline std::vector<Trace> load_trace_dir(const std::string& dir,
                                         const RescaleConfig& rs = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw input_error("trace directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw input_error("no .csv traces in directory: " + dir);
    std::vector<Trace> traces;
    for (const auto& f : files) {
        Trace t = load_trace_csv(f.string());
        if (rs.time_scale != 1.0 || rs.value_scale != 1.0)
            t = rescale(t, Rescaling{rs.time_scale, rs.value_scale});
        traces.push_back(std::move(t));
    }
    return traces;
}

// ---------------------------------------------------------------------------
// Bundled trace families
// ---------------------------------------------------------------------------

/// Piecewise-constant trace on a uniform grid: each (start, value)
/// segment holds from its start time onward.
inline Trace make_step_trace(const std::string& id,
                             const std::vector<std::pair<double, double>>& segments,
                             double step = 0.02, double t_end = 1.0) {
    if (segments.empty() || segments.front().first != 0.0)
        throw input_error("make_step_trace: segments must start at time 0");
    Trace t;
    t.id = id;
    const int n = static_cast<int>(std::llround(t_end / step));
    for (int i = 0; i <= n; ++i) {
        const double time = i * step;
        double value = segments.front().second;
        for (const auto& [start, v] : segments)
            if (time >= start) value = v;
        t.samples.push_back(Sample{time, value});
    }
    return t;
}

/// Six canonical traces: two slow-downs with nearby drop points, a
/// speed-up, a dip that recovers, a constant high and a constant low.
/// Their boundary distances cluster them as {slow-downs}, {high-enders},
/// {low} and none of their boundaries enters the demonstration box
/// [0.25, 0.3] x [0.5, 0.51].
inline std::vector<Trace> intro_traces() {
    return {
        make_step_trace("slow_down_a", {{0.0, 0.8}, {0.34, 0.08}}),
        make_step_trace("slow_down_b", {{0.0, 0.82}, {0.38, 0.1}}),
        make_step_trace("speed_up", {{0.0, 0.15}, {0.5, 0.85}}),
        make_step_trace("dip_recover", {{0.0, 0.85}, {0.4, 0.3}, {0.56, 0.85}}),
        make_step_trace("free_flow", {{0.0, 0.9}}),
        make_step_trace("jam", {{0.0, 0.05}}),
    };
}

// ---------------------------------------------------------------------------
// Synthetic case study
// ---------------------------------------------------------------------------

struct CaseStudyData {
    std::vector<Trace> traces;
    std::vector<std::string> families;  // parallel to traces
    Trace reference;                    // idealized slow-down, noise free
};

namespace detail {

inline Trace noisy_step(const std::string& id,
                        const std::vector<std::pair<double, double>>& segments, rng_t& rng) {
    Trace t = make_step_trace(id, segments);
    std::normal_distribution<double> noise(1.0, 0.04);
    // Speeds saturate below 1 so the steep filter ray always crosses.
    for (Sample& s : t.samples) s.value = std::min(0.98, s.value * noise(rng));
    return t;
}

}  // namespace detail

/// Seeded generator: four genuine behavior families plus late-drop
/// decoys, whose ray features mimic slow-downs loosely but whose full
/// boundaries sit far from the slow-down reference.
inline CaseStudyData casestudy_synthetic_data(const CaseStudyConfig& cfg, std::uint64_t seed) {
    if (cfg.per_family < 1) throw input_error("casestudy: per_family must be positive");
    if (cfg.decoys < 0) throw input_error("casestudy: decoys must be nonnegative");
    rng_t rng(seed);
    auto uni = [&](double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    };
    CaseStudyData data;
    auto add = [&](const std::string& family, int index,
                   const std::vector<std::pair<double, double>>& segments) {
        data.traces.push_back(
            detail::noisy_step(family + "_" + std::to_string(index), segments, rng));
        data.families.push_back(family);
    };
    for (int i = 0; i < cfg.per_family; ++i)
        add("slow_down", i, {{0.0, uni(0.8, 0.9)}, {uni(0.3, 0.42), uni(0.07, 0.13)}});
    for (int i = 0; i < cfg.per_family; ++i)
        add("speed_up", i, {{0.0, uni(0.1, 0.2)}, {uni(0.4, 0.6), uni(0.8, 0.93)}});
    for (int i = 0; i < cfg.per_family; ++i) add("free_flow", i, {{0.0, uni(0.85, 0.95)}});
    for (int i = 0; i < cfg.per_family; ++i) add("jam", i, {{0.0, uni(0.03, 0.1)}});
    for (int i = 0; i < cfg.decoys; ++i)
        add("late_drop", i, {{0.0, uni(0.8, 0.9)}, {uni(0.72, 0.82), uni(0.07, 0.13)}});
    data.reference = make_step_trace("reference_slow_down", {{0.0, 0.85}, {0.35, 0.1}});
    return data;
}

struct CaseStudyVerdict {
    std::string id;
    std::string family;
    std::optional<std::array<double, 2>> feature;  // absent if a filter ray missed
    int component = -1;                            // -1 when excluded
    bool candidate = false;
    std::optional<double> refine_dist;  // interval midpoint to the reference
    bool predicted = false;
    bool truth = false;
};

struct CaseStudyReport {
    std::vector<CaseStudyVerdict> verdicts;
    GmmModel gmm;
    std::array<double, 2> reference_feature{};
    std::vector<int> candidate_components;
    std::size_t excluded = 0;
    int false_negatives = 0;
    int false_positives = 0;
    std::optional<Rect> extracted_box;  // normalized box over confirmed crossing points
    std::string extracted_spec;         // rendered label spec, empty when nothing was confirmed
    std::string extract_warning;
};

/// Runs the detection pipeline on labeled data:
///  1. crossing features on the two filter rays (traces missing either
///     ray are excluded),
///  2. Gaussian mixture over the features,
///  3. candidate components: mixture means within candidate_radius of
///     the reference's feature point (infinity norm),
///  4. members of candidate components are confirmed as slow-downs
///     when the certified boundary-distance midpoint to the reference
///     is at most threshold,
///  5. the confirmed traces' crossing points on both rays are boxed
///     and rendered as a parameter-free label spec.
inline CaseStudyReport run_casestudy(const ParametricSpec& spec, const CaseStudyData& data,
                                     const CaseStudyConfig& cfg, std::uint64_t seed,
                                     double delta = 0.02, double eta = 1e-4) {
    const LineProjection ray1 = line_from_angle(cfg.filter_angles[0]);
    const LineProjection ray2 = line_from_angle(cfg.filter_angles[1]);

    CaseStudyReport rep;
    std::vector<Point> feats;
    std::vector<std::size_t> feat_index;  // trace index per feature row
    std::vector<std::array<Point, 2>> cross;  // crossing points per feature row
    for (std::size_t i = 0; i < data.traces.size(); ++i) {
        CaseStudyVerdict v;
        v.id = data.traces[i].id;
        v.family = data.families[i];
        v.truth = data.families[i] == "slow_down";
        const auto c1 = project_boundary(spec, data.traces[i], ray1);
        const auto c2 = project_boundary(spec, data.traces[i], ray2);
        if (c1 && c2) {
            v.feature = {c1->t, c2->t};
            feats.push_back({c1->t, c2->t});
            feat_index.push_back(i);
            cross.push_back({c1->point, c2->point});
        } else {
            ++rep.excluded;
        }
        rep.verdicts.push_back(std::move(v));
    }
    if (feats.empty()) throw input_error("casestudy: every trace was excluded by the filter rays");

    const auto r1 = project_boundary(spec, data.reference, ray1);
    const auto r2 = project_boundary(spec, data.reference, ray2);
    if (!r1 || !r2)
        throw internal_error("casestudy: reference trace missing a filter-ray crossing");
    rep.reference_feature = {r1->t, r2->t};

    const int k = std::min<int>(cfg.gmm_k, static_cast<int>(feats.size()));
    rep.gmm = gmm_fit(feats, k, seed);
    for (std::size_t f = 0; f < feats.size(); ++f)
        rep.verdicts[feat_index[f]].component = gmm_predict(rep.gmm, feats[f]);

    for (std::size_t c = 0; c < rep.gmm.comps.size(); ++c) {
        const double d = std::max(std::abs(rep.gmm.comps[c].mean[0] - rep.reference_feature[0]),
                                  std::abs(rep.gmm.comps[c].mean[1] - rep.reference_feature[1]));
        if (d <= cfg.candidate_radius) rep.candidate_components.push_back(static_cast<int>(c));
    }

    DistanceOptions opts;
    opts.delta = delta;
    opts.eta = eta;
    opts.use_scan_pruning = true;
    BoundaryCache cache;
    for (std::size_t i = 0; i < rep.verdicts.size(); ++i) {
        CaseStudyVerdict& v = rep.verdicts[i];
        v.candidate =
            v.component >= 0 && std::find(rep.candidate_components.begin(),
                                          rep.candidate_components.end(),
                                          v.component) != rep.candidate_components.end();
        if (v.candidate) {
            const DistanceResult d =
                approx_dist(spec, data.traces[i], data.reference, opts, &cache);
            v.refine_dist = 0.5 * (d.lo + d.hi);
            v.predicted = *v.refine_dist <= cfg.threshold;
        }
        if (v.truth && !v.predicted) ++rep.false_negatives;
        if (!v.truth && v.predicted) ++rep.false_positives;
    }

    std::vector<Point> confirmed_points;
    for (std::size_t f = 0; f < feat_index.size(); ++f) {
        if (!rep.verdicts[feat_index[f]].predicted) continue;
        confirmed_points.push_back(cross[f][0]);
        confirmed_points.push_back(cross[f][1]);
    }
    if (!confirmed_points.empty()) {
        rep.extracted_box = bounding_box_of(confirmed_points);
        const LabelSpec ls =
            extract_label_spec(spec, normalized_box_to_raw(spec, *rep.extracted_box));
        rep.extracted_spec = ls.text;
        rep.extract_warning = ls.warning;
    }
    return rep;
}

/// Line-oriented report; one verdict line per trace.
inline std::string casestudy_report_to_text(const CaseStudyReport& rep) {
    std::string s = "# casestudy report v1\n";
    s += "traces " + std::to_string(rep.verdicts.size()) + "\n";
    s += "excluded " + std::to_string(rep.excluded) + "\n";
    s += "reference_feature " + format_double(rep.reference_feature[0]) + "," +
         format_double(rep.reference_feature[1]) + "\n";
    s += "candidate_components";
    for (int c : rep.candidate_components) s += " " + std::to_string(c);
    s += "\n";
    s += "false_negatives " + std::to_string(rep.false_negatives) + "\n";
    s += "false_positives " + std::to_string(rep.false_positives) + "\n";
    if (!rep.extracted_spec.empty()) s += "extracted " + rep.extracted_spec;
    if (!rep.extract_warning.empty()) s += "warning " + rep.extract_warning + "\n";
    for (const CaseStudyVerdict& v : rep.verdicts) {
        s += "trace " + v.id + " family=" + v.family;
        s += " feature=";
        if (v.feature)
            s += format_double((*v.feature)[0]) + "," + format_double((*v.feature)[1]);
        s += " comp=" + std::to_string(v.component);
        s += " dist=";
        if (v.refine_dist) s += format_double(*v.refine_dist);
        s += std::string(" predicted=") + (v.predicted ? "1" : "0");
        s += std::string(" truth=") + (v.truth ? "1" : "0");
        s += "\n";
    }
    return s;
}

/// CSV of the 2-D features with component assignments: header
/// `id,t_star_1,t_star_2,component`; excluded traces leave all three
/// fields empty except the id.
inline std::string casestudy_features_to_csv(const CaseStudyReport& rep) {
    std::string s = "id,t_star_1,t_star_2,component\n";
    for (const CaseStudyVerdict& v : rep.verdicts) {
        s += v.id + ",";
        if (v.feature) {
            s += format_double((*v.feature)[0]) + "," + format_double((*v.feature)[1]) + "," +
                 std::to_string(v.component);
        } else {
            s += ",,";
        }
        s += "\n";
    }
    return s;
}

}  // namespace logidist
