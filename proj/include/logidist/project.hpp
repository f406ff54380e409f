#pragma once

// Dimensionality reduction of validity boundaries.
//
// A 2-parameter boundary is summarized by where it crosses a ray from
// the origin.  Rays are scaled so the farthest point of the unit box
// they reach has infinity-norm 1, which makes the 1-D crossing
// parameter t an isometry: |t1 - t2| equals the infinity distance
// between the corresponding points.  Crossing parameters of a trace
// family become 1-D (one ray) or 2-D (two rays) features, cluster
// separation is scored on feature bounding boxes, and a label's
// bounding box in raw parameter space is rendered back into a concrete
// formula characterizing the label.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "logidist/boundary.hpp"
#include "logidist/common.hpp"
#include "logidist/learn.hpp"
#include "logidist/specdsl.hpp"
#include "logidist/trace.hpp"

namespace logidist {

/// Ray through the origin at `angle` radians from the first parameter
/// axis, scaled so the largest direction component is 1.
struct LineProjection {
    double angle = 0.0;
    Point dir;  // 2-D, componentwise in [0,1], max component 1

    Point at(double t) const { return Point{t * dir[0], t * dir[1]}; }
};

inline LineProjection line_from_angle(double angle) {
    constexpr double half_pi = 1.5707963267948966;
    if (!(angle >= 0.0 && angle <= half_pi))
        throw input_error("line_from_angle: angle " + format_double(angle) +
                          " outside [0, pi/2]");
    double ux = std::cos(angle);
    double uy = std::sin(angle);
    const double m = std::max(ux, uy);
    ux /= m;
    uy /= m;
    if (ux < 1e-12) ux = 0.0;
    if (uy < 1e-12) uy = 0.0;
    return LineProjection{angle, {ux, uy}};
}

/// Where the validity boundary meets the ray.
struct ProjectedCrossing {
    double t = 0.0;
    Point point;
};

/// Bisects phi along the ray.  The ray is monotone in both parameters,
/// so satisfaction is monotone in t; if both endpoints agree the
/// boundary does not cross this ray inside the box and the result is
/// absent.  The returned t is within tol of the true crossing.
inline std::optional<ProjectedCrossing> project_boundary(const ParametricSpec& spec,
                                                         const Trace& trace,
                                                         const LineProjection& line,
                                                         double tol = 1e-4) {
    if (tol <= 0.0) throw input_error("project_boundary: tol must be positive");
    if (spec.dims() != 2) throw input_error("project_boundary: spec must have two parameters");
    const bool at0 = evaluate(spec, trace, line.at(0.0));
    const bool at1 = evaluate(spec, trace, line.at(1.0));
    if (at0 == at1) return std::nullopt;
    // at0 false, at1 true by monotonicity.
    double lo = 0.0, hi = 1.0;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (evaluate(spec, trace, line.at(mid)))
            hi = mid;
        else
            lo = mid;
    }
    const double t = 0.5 * (lo + hi);
    return ProjectedCrossing{t, line.at(t)};
}

inline Rect bounding_box_of(const std::vector<Point>& pts) {
    if (pts.empty()) throw internal_error("bounding_box_of: no points");
    Rect r{pts.front(), pts.front()};
    for (const Point& p : pts) {
        if (p.size() != r.bot.size()) throw internal_error("bounding_box_of: mixed dimensions");
        for (std::size_t i = 0; i < p.size(); ++i) {
            r.bot[i] = std::min(r.bot[i], p[i]);
            r.top[i] = std::max(r.top[i], p[i]);
        }
    }
    return r;
}

/// Infinity-norm distance between two boxes: the largest per-axis gap,
/// zero when they overlap or touch on every axis.
inline double box_separation_inf(const Rect& a, const Rect& b) {
    if (a.dims() != b.dims()) throw internal_error("box_separation_inf: mixed dimensions");
    double sep = 0.0;
    for (std::size_t i = 0; i < a.dims(); ++i) {
        const double gap = std::max(a.bot[i] - b.top[i], b.bot[i] - a.top[i]);
        sep = std::max(sep, gap);
    }
    return std::max(sep, 0.0);
}

struct ProjectionOptions {
    int angle_steps = 90;  // candidate rays per quarter turn
    double tol = 1e-4;     // crossing bisection tolerance
    int lines = 1;         // 1 or 2 rays (the second is chosen greedily)
};

struct ProjectionResult {
    std::vector<LineProjection> lines;
    double score = 0.0;  // smallest separation between any two label boxes
};

namespace detail {

inline double candidate_angle(int k, int steps) {
    constexpr double half_pi = 1.5707963267948966;
    return (k + 0.5) * half_pi / steps;
}

/// Smallest pairwise separation of per-label feature bounding boxes,
/// or absent when some label has no features.
inline std::optional<double> separation_score(const std::vector<std::vector<Point>>& by_label,
                                              std::set<int>& missing) {
    bool all_present = true;
    for (std::size_t l = 0; l < by_label.size(); ++l)
        if (by_label[l].empty()) {
            missing.insert(static_cast<int>(l));
            all_present = false;
        }
    if (!all_present) return std::nullopt;
    std::vector<Rect> boxes;
    for (const auto& pts : by_label) boxes.push_back(bounding_box_of(pts));
    double score = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < boxes.size(); ++a)
        for (std::size_t b = a + 1; b < boxes.size(); ++b)
            score = std::min(score, box_separation_inf(boxes[a], boxes[b]));
    return score;
}

}  // namespace detail

/// Sweeps candidate rays and keeps the one separating the labels best:
/// the score of a ray is the smallest gap between the 1-D crossing
/// ranges of any two labels (0 when ranges overlap).  Traces whose
/// boundary misses a ray are excluded from it; a ray leaving some
/// label with no crossings at all is discarded.  Ties keep the
/// smallest angle.  With lines = 2 a second ray is added greedily, now
/// scoring 2-D crossing-pair boxes, excluding traces that miss either
/// ray.  Throws when every candidate is discarded, naming the labels
/// that lost all their crossings.
inline ProjectionResult optimize_projection(const ParametricSpec& spec,
                                            const std::vector<Trace>& traces,
                                            const Labeling& labeling,
                                            const ProjectionOptions& opts = {}) {
    if (traces.size() != labeling.labels.size())
        throw input_error("optimize_projection: trace/label count mismatch");
    if (labeling.k < 2) throw input_error("optimize_projection: need at least two labels");
    if (opts.angle_steps <= 0) throw input_error("optimize_projection: angle_steps must be positive");
    if (opts.lines != 1 && opts.lines != 2)
        throw input_error("optimize_projection: lines must be 1 or 2");

    // Crossing parameter per candidate ray per trace.
    std::vector<std::vector<std::optional<double>>> tstar(opts.angle_steps);
    std::vector<LineProjection> rays(opts.angle_steps);
    for (int k = 0; k < opts.angle_steps; ++k) {
        rays[k] = line_from_angle(detail::candidate_angle(k, opts.angle_steps));
        tstar[k].resize(traces.size());
        for (std::size_t i = 0; i < traces.size(); ++i) {
            const auto cr = project_boundary(spec, traces[i], rays[k], opts.tol);
            if (cr) tstar[k][i] = cr->t;
        }
    }

    auto pick_best = [&](auto&& features_for) -> std::pair<int, double> {
        int best_k = -1;
        double best_score = -1.0;
        std::set<int> missing;
        for (int k = 0; k < opts.angle_steps; ++k) {
            std::vector<std::vector<Point>> by_label(labeling.k);
            features_for(k, by_label);
            const auto score = detail::separation_score(by_label, missing);
            if (score && *score > best_score) {
                best_score = *score;
                best_k = k;
            }
        }
        if (best_k < 0) {
            std::string which;
            for (int l : missing) which += (which.empty() ? "" : ", ") + std::to_string(l);
            throw input_error(
                "optimize_projection: no candidate ray crosses every label's boundary "
                "(labels without crossings: " + which + ")");
        }
        return {best_k, best_score};
    };

    const auto [k1, score1] = pick_best([&](int k, std::vector<std::vector<Point>>& by_label) {
        for (std::size_t i = 0; i < traces.size(); ++i)
            if (tstar[k][i]) by_label[labeling.labels[i]].push_back(Point{*tstar[k][i]});
    });

    ProjectionResult res;
    res.lines.push_back(rays[k1]);
    res.score = score1;
    if (opts.lines == 1) return res;

    const auto [k2, score2] = pick_best([&](int k, std::vector<std::vector<Point>>& by_label) {
        for (std::size_t i = 0; i < traces.size(); ++i)
            if (tstar[k1][i] && tstar[k][i])
                by_label[labeling.labels[i]].push_back(Point{*tstar[k1][i], *tstar[k][i]});
    });
    res.lines.push_back(rays[k2]);
    res.score = score2;
    return res;
}

/// Maps a box in normalized coordinates to raw parameter values,
/// re-sorting each axis (decreasing-polarity parameters flip).
inline Rect normalized_box_to_raw(const ParametricSpec& spec, const Rect& box) {
    const std::vector<double> r1 = raw_params(spec, box.bot);
    const std::vector<double> r2 = raw_params(spec, box.top);
    Rect raw;
    raw.bot.resize(r1.size());
    raw.top.resize(r1.size());
    for (std::size_t i = 0; i < r1.size(); ++i) {
        raw.bot[i] = std::min(r1[i], r2[i]);
        raw.top[i] = std::max(r1[i], r2[i]);
    }
    return raw;
}

/// Concrete formula characterizing one label's box of boundary
/// crossings.
struct LabelSpec {
    int label = 0;
    Rect raw_box;
    std::string text;
    std::string warning;  // nonempty when the box is flat along some axis
};

namespace detail {

inline SpecNode instantiate(const SpecNode& n, const std::vector<double>& raw) {
    SpecNode out = n;
    auto fix = [&](Bound& b) {
        if (b.is_param) b = Bound::constant(raw[b.param_index]);
    };
    fix(out.lo);
    fix(out.hi);
    fix(out.threshold);
    out.children.clear();
    for (const SpecNode& c : n.children) out.children.push_back(instantiate(c, raw));
    return out;
}

}  // namespace detail

/// Renders the box as one parameter-free formula: the spec instantiated
/// at the box's bottom corner, conjoined with the negated instantiation
/// at each corner obtained by raising a single axis to its top value.
/// Negated conjuncts are ordered by ascending raise amount, then axis.
inline LabelSpec extract_label_spec(const ParametricSpec& spec, const Rect& raw_box,
                                    int label = 0) {
    const std::size_t n = spec.dims();
    if (raw_box.dims() != n) throw input_error("extract_label_spec: box/spec dimension mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (raw_box.bot[i] > raw_box.top[i])
            throw input_error("extract_label_spec: box has bot above top");
    }

    LabelSpec ls;
    ls.label = label;
    ls.raw_box = raw_box;

    std::string text = "spec (" + detail::print_node(detail::instantiate(spec.root, raw_box.bot), false) + ")";
    std::vector<std::size_t> axes(n);
    for (std::size_t i = 0; i < n; ++i) axes[i] = i;
    std::stable_sort(axes.begin(), axes.end(), [&](std::size_t a, std::size_t b) {
        return raw_box.top[a] - raw_box.bot[a] < raw_box.top[b] - raw_box.bot[b];
    });
    for (std::size_t axis : axes) {
        std::vector<double> corner = raw_box.bot;
        corner[axis] = raw_box.top[axis];
        text += " and (not (" + detail::print_node(detail::instantiate(spec.root, corner), false) + "))";
        if (raw_box.top[axis] - raw_box.bot[axis] <= 0.0)
            ls.warning = "box is flat along parameter '" + spec.params[axis].name +
                         "'; the negated corner there contradicts the base corner";
    }
    ls.text = text + "\n";
    return ls;
}

/// 1-D feature extraction for a whole trace family: the crossing
/// parameter of each trace on one ray, plus a fixed-width histogram of
/// the crossings over [0,1].  Traces whose boundary misses the ray are
/// only counted as absent.
struct DimredResult {
    LineProjection line;
    int bins = 0;
    std::vector<std::optional<double>> tstars;  // one entry per input trace
    std::vector<std::size_t> histogram;         // crossing counts per bin
    std::size_t absent = 0;
};

inline DimredResult dimred(const ParametricSpec& spec, const std::vector<Trace>& traces,
                           const LineProjection& line, int bins = 20, double tol = 1e-4) {
    if (bins <= 0) throw input_error("dimred: bins must be positive");
    DimredResult res;
    res.line = line;
    res.bins = bins;
    res.histogram.assign(static_cast<std::size_t>(bins), 0);
    for (const Trace& tr : traces) {
        const auto cr = project_boundary(spec, tr, line, tol);
        if (!cr) {
            res.tstars.push_back(std::nullopt);
            ++res.absent;
            continue;
        }
        res.tstars.push_back(cr->t);
        const int b = std::min(bins - 1, static_cast<int>(cr->t * bins));
        ++res.histogram[static_cast<std::size_t>(b)];
    }
    return res;
}

/// CSV with header `id,t_star`; absent crossings leave the field empty.
inline std::string dimred_to_csv(const DimredResult& r, const std::vector<std::string>& ids) {
    if (ids.size() != r.tstars.size()) throw internal_error("dimred_to_csv: id count mismatch");
    std::string s = "id,t_star\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        s += ids[i] + ",";
        if (r.tstars[i]) s += format_double(*r.tstars[i]);
        s += "\n";
    }
    return s;
}

/// CSV with header `bin_lo,bin_hi,count`, one row per histogram bin.
inline std::string histogram_to_csv(const DimredResult& r) {
    std::string s = "bin_lo,bin_hi,count\n";
    for (int b = 0; b < r.bins; ++b) {
        s += format_double(static_cast<double>(b) / r.bins) + "," +
             format_double(static_cast<double>(b + 1) / r.bins) + "," +
             std::to_string(r.histogram[static_cast<std::size_t>(b)]) + "\n";
    }
    return s;
}

}  // namespace logidist
