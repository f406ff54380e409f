// Command-line pipeline over the logidist library: boundary covers,
// certified distance matrices, clustering, ray projection, label-spec
// extraction, 1-D feature histograms, and a seeded synthetic case
// study.  Stages communicate through documented text artifacts, every
// command is deterministic under a fixed config and seed, and all
// outputs are written atomically.
//
// Exit codes: 0 success (warnings go to stderr), 2 input error,
// 3 internal invariant violation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "logidist/pipeline.hpp"

namespace fs = std::filesystem;
using namespace logidist;

namespace {

constexpr const char* kDefaultCaseStudySpec =
    "# After time tau the signal stays below h.\n"
    "param tau in [0,1];\n"
    "param h in [0,1];\n"
    "spec G[tau,1] (x < h)\n";

struct GlobalArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<double> delta;
    std::optional<double> eta;
};

void validate_config(const PipelineConfig& cfg) {
    if (!(cfg.delta > 0.0)) throw input_error("config: delta must be positive");
    if (!(cfg.eta > 0.0)) throw input_error("config: eta must be positive");
    if (cfg.max_depth < 0) throw input_error("config: max_depth must be nonnegative");
    if (cfg.clustering.k < 1) throw input_error("config: clustering.k must be positive");
    if (cfg.projection.angle_steps < 1)
        throw input_error("config: projection.angle_steps must be positive");
    if (!(cfg.projection.tol > 0.0)) throw input_error("config: projection.tol must be positive");
    if (cfg.projection.lines != 1 && cfg.projection.lines != 2)
        throw input_error("config: projection.lines must be 1 or 2");
    if (cfg.dimred.bins < 1) throw input_error("config: dimred.bins must be positive");
    if (!(cfg.rescale.time_scale > 0.0) || !(cfg.rescale.value_scale > 0.0))
        throw input_error("config: rescale factors must be positive");
    if (cfg.casestudy.per_family < 1)
        throw input_error("config: casestudy.per_family must be positive");
    if (cfg.casestudy.decoys < 0) throw input_error("config: casestudy.decoys must be nonnegative");
    if (cfg.casestudy.gmm_k < 1) throw input_error("config: casestudy.gmm_k must be positive");
    if (!(cfg.casestudy.threshold >= 0.0))
        throw input_error("config: casestudy.threshold must be nonnegative");
    if (!(cfg.casestudy.candidate_radius >= 0.0))
        throw input_error("config: casestudy.candidate_radius must be nonnegative");
}

PipelineConfig make_config(const GlobalArgs& g) {
    PipelineConfig cfg;
    if (!g.config_path.empty()) cfg = load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.out_dir) cfg.out_dir = *g.out_dir;
    if (g.delta) cfg.delta = *g.delta;
    if (g.eta) cfg.eta = *g.eta;
    validate_config(cfg);
    return cfg;
}

ParametricSpec resolve_spec(const std::string& flag_path, const PipelineConfig& cfg,
                            const char* fallback_text = nullptr) {
    if (!flag_path.empty()) return load_spec(flag_path);
    if (!cfg.spec_path.empty()) return load_spec(cfg.spec_path);
    if (fallback_text) return parse_spec(fallback_text, "builtin");
    throw input_error("no spec given: pass --spec or set spec_path in the config");
}

std::string resolve_trace_dir(const std::string& flag_dir, const PipelineConfig& cfg) {
    if (!flag_dir.empty()) return flag_dir;
    if (!cfg.trace_dir.empty()) return cfg.trace_dir;
    throw input_error("no trace directory given: pass --trace-dir or set trace_dir in the config");
}

std::string out_path(const PipelineConfig& cfg, const std::string& flag_path,
                     const std::string& default_name) {
    if (!flag_path.empty()) return flag_path;
    fs::create_directories(cfg.out_dir);
    return (fs::path(cfg.out_dir) / default_name).string();
}

void warn(const std::string& msg) {
    if (!msg.empty()) std::cerr << "warning: " << msg << "\n";
}

DistanceOptions distance_options(const PipelineConfig& cfg) {
    DistanceOptions opts;
    opts.delta = cfg.delta;
    opts.eta = cfg.eta;
    opts.max_depth = cfg.max_depth;
    opts.use_scan_pruning = true;
    return opts;
}

std::vector<std::string> ids_of(const std::vector<Trace>& traces) {
    std::vector<std::string> ids;
    for (const Trace& t : traces) ids.push_back(t.id);
    return ids;
}

// --- projection artifact -------------------------------------------------
//
//   # projection v1
//   lines <count>
//   angle <radians>            (one line per ray)
//   score <separation>
//   label <k> box <bot...> <top...>

struct ProjectionArtifact {
    std::vector<double> angles;
    double score = 0.0;
    std::vector<std::pair<int, Rect>> boxes;
};

std::string projection_to_text(const ProjectionArtifact& art) {
    std::string s = "# projection v1\n";
    s += "lines " + std::to_string(art.angles.size()) + "\n";
    for (double a : art.angles) s += "angle " + format_double(a) + "\n";
    s += "score " + format_double(art.score) + "\n";
    for (const auto& [label, box] : art.boxes) {
        s += "label " + std::to_string(label) + " box";
        for (double v : box.bot) s += " " + format_double(v);
        for (double v : box.top) s += " " + format_double(v);
        s += "\n";
    }
    return s;
}

ProjectionArtifact projection_from_text(const std::string& text, const std::string& where) {
    auto fail = [&](const std::string& why) -> void {
        throw input_error("projection file " + where + ": " + why);
    };
    auto num = [&](const std::string& field) -> double {
        double v = 0.0;
        if (!parse_double(field, v)) fail("bad number '" + field + "'");
        return v;
    };
    std::vector<std::string> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || strip_cr(lines.front()) != "# projection v1")
        fail("missing '# projection v1' header");
    ProjectionArtifact art;
    bool have_score = false;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string line(strip_cr(lines[i]));
        if (line.empty()) continue;
        const auto fields = split(line, ' ');
        if (fields[0] == "lines" && fields.size() == 2) {
            continue;  // informational; the angle lines are authoritative
        } else if (fields[0] == "angle" && fields.size() == 2) {
            art.angles.push_back(num(fields[1]));
        } else if (fields[0] == "score" && fields.size() == 2) {
            art.score = num(fields[1]);
            have_score = true;
        } else if (fields[0] == "label" && fields.size() >= 4 && fields[2] == "box") {
            const std::size_t coords = fields.size() - 3;
            if (coords % 2 != 0) fail("label box needs an even coordinate count");
            const std::size_t n = coords / 2;
            Rect box;
            for (std::size_t d = 0; d < n; ++d) box.bot.push_back(num(fields[3 + d]));
            for (std::size_t d = 0; d < n; ++d) box.top.push_back(num(fields[3 + n + d]));
            int label = 0;
            try {
                label = std::stoi(fields[1]);
            } catch (const std::exception&) {
                fail("bad label '" + fields[1] + "'");
            }
            art.boxes.emplace_back(label, std::move(box));
        } else {
            fail("unrecognized line '" + line + "'");
        }
    }
    if (art.angles.empty()) fail("no angle lines");
    if (!have_score) fail("no score line");
    if (art.boxes.empty()) fail("no label box lines");
    return art;
}

// Normalized bounding box of each label's crossing points across all
// chosen rays; traces that miss any ray contribute nothing.
std::vector<std::pair<int, Rect>> label_boxes(const ParametricSpec& spec,
                                              const std::vector<Trace>& traces,
                                              const Labeling& lab,
                                              const std::vector<LineProjection>& rays,
                                              double tol) {
    std::vector<std::vector<Point>> by_label(static_cast<std::size_t>(lab.k));
    for (std::size_t i = 0; i < traces.size(); ++i) {
        std::vector<Point> pts;
        bool all = true;
        for (const LineProjection& ray : rays) {
            const auto cr = project_boundary(spec, traces[i], ray, tol);
            if (!cr) {
                all = false;
                break;
            }
            pts.push_back(cr->point);
        }
        if (!all) continue;
        auto& bucket = by_label[static_cast<std::size_t>(lab.labels[i])];
        bucket.insert(bucket.end(), pts.begin(), pts.end());
    }
    std::vector<std::pair<int, Rect>> boxes;
    for (int l = 0; l < lab.k; ++l) {
        const auto& pts = by_label[static_cast<std::size_t>(l)];
        if (pts.empty())
            throw input_error("label " + std::to_string(l) +
                              " has no crossings on the chosen rays");
        boxes.emplace_back(l, bounding_box_of(pts));
    }
    return boxes;
}

int dispatch(const CLI::App& app, const std::vector<std::function<int()>>& runners,
             const std::vector<const CLI::App*>& subs) {
    for (std::size_t i = 0; i < subs.size(); ++i)
        if (subs[i]->parsed()) return runners[i]();
    std::cerr << "error: no subcommand given (try --help)\n";
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Validity-domain boundary toolkit for monotonic parametric specs"};
    app.require_subcommand(0, 1);

    GlobalArgs g;
    app.add_option("--config", g.config_path, "JSON config file (defaults apply without it)");
    app.add_option("--seed", g.seed, "override the config seed");
    app.add_option("--out-dir", g.out_dir, "override the config output directory");
    app.add_option("--delta", g.delta, "override the target distance-interval width");
    app.add_option("--eta", g.eta, "override the crossing bisection tolerance");

    std::vector<std::function<int()>> runners;
    std::vector<const CLI::App*> subs;

    // boundary ------------------------------------------------------------
    {
        auto* sub = app.add_subcommand(
            "boundary", "approximate one trace's validity-domain boundary by rectangles");
        sub->fallthrough();
        auto spec_path = std::make_shared<std::string>();
        auto trace_path = std::make_shared<std::string>();
        auto precision = std::make_shared<double>(0.02);
        auto out = std::make_shared<std::string>();
        sub->add_option("--spec", *spec_path, ".psl spec file");
        sub->add_option("--trace", *trace_path, "trace .csv file")->required();
        sub->add_option("--precision", *precision, "target max rectangle edge (default 0.02)");
        sub->add_option("--out", *out, "output file (default <out-dir>/boundary_<trace>.txt)");
        subs.push_back(sub);
        runners.push_back([=, &g]() {
            const PipelineConfig cfg = make_config(g);
            if (!(*precision > 0.0)) throw input_error("boundary: precision must be positive");
            const ParametricSpec spec = resolve_spec(*spec_path, cfg);
            Trace trace = load_trace_csv(*trace_path);
            if (cfg.rescale.time_scale != 1.0 || cfg.rescale.value_scale != 1.0)
                trace = rescale(trace, Rescaling{cfg.rescale.time_scale, cfg.rescale.value_scale});
            BoundaryApprox b = approx_init(spec, trace, cfg.eta);
            while (b.domain == DomainKind::Regular && b.depth < cfg.max_depth &&
                   max_edge(b.rects) > *precision)
                b = refine(spec, trace, b);
            warn(b.warning);
            const std::string path = out_path(cfg, *out, "boundary_" + trace.id + ".txt");
            save_boundary(b, path);
            std::cout << path << "\n";
            return 0;
        });
    }

    // distmat -------------------------------------------------------------
    {
        auto* sub = app.add_subcommand(
            "distmat", "pairwise certified distance intervals between all traces");
        sub->fallthrough();
        auto spec_path = std::make_shared<std::string>();
        auto trace_dir = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--spec", *spec_path, ".psl spec file");
        sub->add_option("--trace-dir", *trace_dir, "directory of trace .csv files");
        sub->add_option("--out", *out, "output csv (default <out-dir>/distmat.csv)");
        subs.push_back(sub);
        runners.push_back([=, &g]() {
            const PipelineConfig cfg = make_config(g);
            const ParametricSpec spec = resolve_spec(*spec_path, cfg);
            const std::vector<Trace> traces =
                load_trace_dir(resolve_trace_dir(*trace_dir, cfg), cfg.rescale);
            const DistanceMatrix m = distance_matrix(spec, traces, distance_options(cfg));
            for (const DistanceResult& r : m.entries) warn(r.warning);
            std::size_t unconverged = 0;
            for (const DistanceResult& r : m.entries)
                if (!r.converged) ++unconverged;
            if (unconverged > 0)
                warn(std::to_string(unconverged) + " pair(s) did not reach the target width");
            const std::string path = out_path(cfg, *out, "distmat.csv");
            save_distance_matrix(m, path);
            std::cout << path << "\n";
            return 0;
        });
    }

    // cluster -------------------------------------------------------------
    {
        auto* sub = app.add_subcommand(
            "cluster", "agglomerative clustering of traces by boundary distance");
        sub->fallthrough();
        auto spec_path = std::make_shared<std::string>();
        auto trace_dir = std::make_shared<std::string>();
        auto k = std::make_shared<int>(0);
        auto linkage = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--spec", *spec_path, ".psl spec file");
        sub->add_option("--trace-dir", *trace_dir, "directory of trace .csv files");
        sub->add_option("--k", *k, "cluster count (default from config)");
        sub->add_option("--linkage", *linkage, "single | complete | average");
        sub->add_option("--out", *out, "labeling csv (default <out-dir>/labels.csv)");
        subs.push_back(sub);
        runners.push_back([=, &g]() {
            const PipelineConfig cfg = make_config(g);
            const ParametricSpec spec = resolve_spec(*spec_path, cfg);
            const std::vector<Trace> traces =
                load_trace_dir(resolve_trace_dir(*trace_dir, cfg), cfg.rescale);
            const DistanceMatrix m = distance_matrix(spec, traces, distance_options(cfg));
            const int kk = *k > 0 ? *k : cfg.clustering.k;
            const std::string ln = linkage->empty() ? cfg.clustering.linkage : *linkage;
            const Labeling lab = agglomerative(m, kk, linkage_from_name(ln));
            const std::string path = out_path(cfg, *out, "labels.csv");
            save_labeling(lab, ids_of(traces), path);
            std::cout << path << "\n";
            return 0;
        });
    }

    // project -------------------------------------------------------------
    {
        auto* sub = app.add_subcommand(
            "project", "choose the ray(s) separating the labeled boundaries best");
        sub->fallthrough();
        auto spec_path = std::make_shared<std::string>();
        auto trace_dir = std::make_shared<std::string>();
        auto labels_path = std::make_shared<std::string>();
        auto angle_steps = std::make_shared<int>(0);
        auto lines = std::make_shared<int>(0);
        auto tol = std::make_shared<double>(0.0);
        auto out = std::make_shared<std::string>();
        sub->add_option("--spec", *spec_path, ".psl spec file");
        sub->add_option("--trace-dir", *trace_dir, "directory of trace .csv files");
        sub->add_option("--labels", *labels_path, "labeling csv from `cluster`")->required();
        sub->add_option("--angle-steps", *angle_steps, "candidate rays per quarter turn");
        sub->add_option("--lines", *lines, "1 or 2 rays");
        sub->add_option("--tol", *tol, "crossing bisection tolerance");
        sub->add_option("--out", *out, "projection file (default <out-dir>/projection.txt)");
        subs.push_back(sub);
        runners.push_back([=, &g]() {
            const PipelineConfig cfg = make_config(g);
            const ParametricSpec spec = resolve_spec(*spec_path, cfg);
            const std::vector<Trace> traces =
                load_trace_dir(resolve_trace_dir(*trace_dir, cfg), cfg.rescale);
            const Labeling lab = labeling_from_csv(read_file(*labels_path), ids_of(traces));
            ProjectionOptions opts;
            opts.angle_steps = *angle_steps > 0 ? *angle_steps : cfg.projection.angle_steps;
            opts.tol = *tol > 0.0 ? *tol : cfg.projection.tol;
            opts.lines = *lines > 0 ? *lines : cfg.projection.lines;
            const ProjectionResult res = optimize_projection(spec, traces, lab, opts);
            ProjectionArtifact art;
            for (const LineProjection& ray : res.lines) art.angles.push_back(ray.angle);
            art.score = res.score;
            art.boxes = label_boxes(spec, traces, lab, res.lines, opts.tol);
            const std::string path = out_path(cfg, *out, "projection.txt");
            write_file_atomic(path, projection_to_text(art));
            std::cout << path << "\n";
            return 0;
        });
    }

    // extract -------------------------------------------------------------
    {
        auto* sub = app.add_subcommand(
            "extract", "render each label's box as a parameter-free spec");
        sub->fallthrough();
        auto spec_path = std::make_shared<std::string>();
        auto proj_path = std::make_shared<std::string>();
        sub->add_option("--spec", *spec_path, ".psl spec file");
        sub->add_option("--projection", *proj_path, "projection file from `project`")->required();
        subs.push_back(sub);
        runners.push_back([=, &g]() {
            const PipelineConfig cfg = make_config(g);
            const ParametricSpec spec = resolve_spec(*spec_path, cfg);
            const ProjectionArtifact art =
                projection_from_text(read_file(*proj_path), *proj_path);
            fs::create_directories(cfg.out_dir);
            for (const auto& [label, box] : art.boxes) {
                if (box.dims() != spec.dims())
                    throw input_error("projection file " + *proj_path + ": label " +
                                      std::to_string(label) + " box has " +
                                      std::to_string(box.dims()) + " dims but the spec has " +
                                      std::to_string(spec.dims()));
                const LabelSpec ls =
                    extract_label_spec(spec, normalized_box_to_raw(spec, box), label);
                warn(ls.warning);
                const std::string path =
                    (fs::path(cfg.out_dir) / ("label_" + std::to_string(label) + ".psl"))
                        .string();
                write_file_atomic(path, ls.text);
                std::cout << path << "\n";
            }
            return 0;
        });
    }

    // dimred --------------------------------------------------------------
    {
        auto* sub = app.add_subcommand(
            "dimred", "1-D crossing features and histogram along one ray");
        sub->fallthrough();
        auto spec_path = std::make_shared<std::string>();
        auto trace_dir = std::make_shared<std::string>();
        auto angle = std::make_shared<double>(-1.0);
        auto bins = std::make_shared<int>(0);
        auto tol = std::make_shared<double>(0.0);
        auto out = std::make_shared<std::string>();
        auto hist_out = std::make_shared<std::string>();
        sub->add_option("--spec", *spec_path, ".psl spec file");
        sub->add_option("--trace-dir", *trace_dir, "directory of trace .csv files");
        sub->add_option("--angle", *angle, "ray angle in radians (default from config)");
        sub->add_option("--bins", *bins, "histogram bin count");
        sub->add_option("--tol", *tol, "crossing bisection tolerance");
        sub->add_option("--out", *out, "crossing csv (default <out-dir>/tstars.csv)");
        sub->add_option("--hist-out", *hist_out, "histogram csv (default <out-dir>/histogram.csv)");
        subs.push_back(sub);
        runners.push_back([=, &g]() {
            const PipelineConfig cfg = make_config(g);
            const ParametricSpec spec = resolve_spec(*spec_path, cfg);
            const std::vector<Trace> traces =
                load_trace_dir(resolve_trace_dir(*trace_dir, cfg), cfg.rescale);
            const double a = *angle >= 0.0 ? *angle : cfg.dimred.angle;
            const int b = *bins > 0 ? *bins : cfg.dimred.bins;
            const double t = *tol > 0.0 ? *tol : cfg.projection.tol;
            const DimredResult res = dimred(spec, traces, line_from_angle(a), b, t);
            if (res.absent > 0)
                warn(std::to_string(res.absent) + " trace(s) have no crossing on the ray");
            const std::string path = out_path(cfg, *out, "tstars.csv");
            write_file_atomic(path, dimred_to_csv(res, ids_of(traces)));
            const std::string hpath = out_path(cfg, *hist_out, "histogram.csv");
            write_file_atomic(hpath, histogram_to_csv(res));
            std::cout << path << "\n" << hpath << "\n";
            return 0;
        });
    }

    // casestudy-synthetic -------------------------------------------------
    {
        auto* sub = app.add_subcommand(
            "casestudy-synthetic",
            "seeded end-to-end run: generate labeled traces, filter by two rays, fit a "
            "mixture, confirm slow-downs by certified distance, extract their spec");
        sub->fallthrough();
        auto spec_path = std::make_shared<std::string>();
        auto write_traces = std::make_shared<bool>(false);
        sub->add_option("--spec", *spec_path,
                        ".psl spec file (default: built-in G[tau,1] (x < h))");
        sub->add_flag("--write-traces", *write_traces, "also dump the generated traces");
        subs.push_back(sub);
        runners.push_back([=, &g]() {
            const PipelineConfig cfg = make_config(g);
            const ParametricSpec spec = resolve_spec(*spec_path, cfg, kDefaultCaseStudySpec);
            const CaseStudyData data = casestudy_synthetic_data(cfg.casestudy, cfg.seed);
            const CaseStudyReport rep =
                run_casestudy(spec, data, cfg.casestudy, cfg.seed, cfg.delta, cfg.eta);
            warn(rep.extract_warning);
            fs::create_directories(cfg.out_dir);
            const fs::path dir(cfg.out_dir);
            write_file_atomic((dir / "report.txt").string(), casestudy_report_to_text(rep));
            write_file_atomic((dir / "features.csv").string(), casestudy_features_to_csv(rep));
            save_gmm(rep.gmm, (dir / "gmm.txt").string());
            if (!rep.extracted_spec.empty())
                write_file_atomic((dir / "label_slow_down.psl").string(), rep.extracted_spec);
            if (*write_traces) {
                fs::create_directories(dir / "traces");
                for (const Trace& t : data.traces)
                    save_trace_csv(t, dir / "traces" / (t.id + ".csv"));
                save_trace_csv(data.reference, dir / "traces" / (data.reference.id + ".csv"));
            }
            std::cout << (dir / "report.txt").string() << "\n";
            std::cout << "false_negatives " << rep.false_negatives << "\n";
            std::cout << "false_positives " << rep.false_positives << "\n";
            return 0;
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        return dispatch(app, runners, subs);
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const internal_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
