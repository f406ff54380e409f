#pragma once

// Hausdorff distance between validity-domain boundaries.
//
// Two traces are compared through a fixed parametric spec by measuring
// the infinity-norm Hausdorff distance between the boundaries of their
// validity domains.  Each boundary is known only through a rectangle
// cover, so the computed value carries a certified error interval: the
// cover corners form a point cloud whose Hausdorff distance is within
// eps_pair of the true boundary distance, where eps_pair is the larger
// of the two cover accuracies.  Refining the covers shrinks eps_pair,
// so the interval can be driven below any requested width.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "logidist/boundary.hpp"
#include "logidist/common.hpp"
#include "logidist/specdsl.hpp"
#include "logidist/trace.hpp"

namespace logidist {

/// Corner point cloud of a rectangle cover, deduplicated and sorted
/// lexicographically.  Every cloud point is within the cover's eps/2 of
/// the true boundary and vice versa.
inline std::vector<Point> discretize(const BoundaryApprox& b) {
    if (b.rects.empty()) throw internal_error("discretize: cover has no rectangles");
    std::vector<Point> pts;
    const std::size_t n = b.dims();
    const std::uint64_t combos = std::uint64_t{1} << n;
    for (const Rect& r : b.rects) {
        for (std::uint64_t mask = 0; mask < combos; ++mask) {
            Point p(n);
            for (std::size_t i = 0; i < n; ++i) p[i] = ((mask >> i) & 1u) ? r.top[i] : r.bot[i];
            pts.push_back(std::move(p));
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

namespace detail {

inline double dist_inf(const Point& a, const Point& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/// Directed Hausdorff distance max_{a in A} min_{b in B} |a - b|_inf.
/// With `prune`, the inner scan stops once the running minimum cannot
/// raise the outer maximum; skipped points provably contribute nothing,
/// so the result is bit-identical to the full scan.
inline double directed_hausdorff(const std::vector<Point>& a, const std::vector<Point>& b,
                                 bool prune) {
    double h = 0.0;
    for (const Point& p : a) {
        double best = std::numeric_limits<double>::infinity();
        for (const Point& q : b) {
            best = std::min(best, dist_inf(p, q));
            if (prune && best <= h) break;
        }
        if (best > h) h = best;
    }
    return h;
}

}  // namespace detail

/// Two-sided Hausdorff distance between point clouds in the infinity
/// norm.  Brute force; `use_scan_pruning` enables an early-exit inner
/// scan that returns bit-identical values.
inline double hausdorff_inf(const std::vector<Point>& a, const std::vector<Point>& b,
                            bool use_scan_pruning = false) {
    if (a.empty() || b.empty()) throw internal_error("hausdorff_inf: empty point cloud");
    return std::max(detail::directed_hausdorff(a, b, use_scan_pruning),
                    detail::directed_hausdorff(b, a, use_scan_pruning));
}

/// Certified bracket around a true distance: the estimate plus/minus
/// the combined cover error, clamped to nonnegative values.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const Interval&) const = default;
    double width() const { return hi - lo; }
};

inline Interval error_interval(double estimate, double eps_pair) {
    if (estimate < 0.0 || eps_pair < 0.0)
        throw internal_error("error_interval: negative estimate or eps");
    return Interval{std::max(0.0, estimate - eps_pair), estimate + eps_pair};
}

struct DistanceOptions {
    double delta = 0.01;     // target interval width
    double eta = 1e-4;       // crossing bisection tolerance
    int max_depth = 20;      // refinement cap per boundary
    bool use_scan_pruning = false;
};

struct DistanceResult {
    double lo = 0.0;
    double hi = 0.0;
    double estimate = 0.0;
    bool converged = false;
    int depth = 0;           // cover depth the interval was computed at
    std::string warning;     // nonempty if either domain was degenerate

    Interval interval() const { return Interval{lo, hi}; }
};

/// Brackets the boundary distance between two traces, refining both
/// covers in lockstep until the interval width is at most delta or the
/// depth cap is reached.  `converged` reports which case ended the
/// loop.  A shared cache makes repeated pairings against the same
/// traces reuse their covers.
inline DistanceResult approx_dist(const ParametricSpec& spec, const Trace& x, const Trace& y,
                                  const DistanceOptions& opts = {}, BoundaryCache* cache = nullptr) {
    if (opts.delta < 0.0) throw input_error("approx_dist: delta must be nonnegative");
    if (opts.max_depth < 0) throw input_error("approx_dist: max_depth must be nonnegative");
    BoundaryCache local;
    BoundaryCache& c = cache ? *cache : local;

    DistanceResult res;
    for (int depth = 0;; ++depth) {
        const BoundaryApprox& bx = c.get(spec, x, depth, opts.eta);
        const BoundaryApprox& by = c.get(spec, y, depth, opts.eta);
        const double d_hat = hausdorff_inf(discretize(bx), discretize(by), opts.use_scan_pruning);
        const double eps_pair = std::max(bx.eps, by.eps);
        const Interval iv = error_interval(d_hat, eps_pair);
        res.lo = iv.lo;
        res.hi = iv.hi;
        res.estimate = d_hat;
        res.depth = depth;
        res.warning = !bx.warning.empty() ? bx.warning : by.warning;
        if (iv.width() <= opts.delta) {
            res.converged = true;
            return res;
        }
        if (depth == opts.max_depth) {
            res.converged = false;
            return res;
        }
    }
}

/// Upper-triangle pairwise distances: one entry per pair i < j.
struct DistanceMatrix {
    std::vector<std::string> ids;
    std::vector<DistanceResult> entries;  // row-major over pairs (i, j), i < j

    std::size_t size() const { return ids.size(); }

    const DistanceResult& at(std::size_t i, std::size_t j) const {
        if (i == j) throw internal_error("DistanceMatrix::at: diagonal has no entry");
        if (i > j) std::swap(i, j);
        const std::size_t n = ids.size();
        if (j >= n) throw internal_error("DistanceMatrix::at: index out of range");
        // Pairs before row i: n-1 + n-2 + ... + n-i.
        const std::size_t offset = i * n - i * (i + 1) / 2 + (j - i - 1);
        return entries[offset];
    }
};

inline DistanceMatrix distance_matrix(const ParametricSpec& spec, const std::vector<Trace>& traces,
                                      const DistanceOptions& opts = {},
                                      BoundaryCache* cache = nullptr) {
    if (traces.size() < 2) throw input_error("distance_matrix: need at least two traces");
    BoundaryCache local;
    BoundaryCache& c = cache ? *cache : local;
    DistanceMatrix m;
    for (const Trace& t : traces) m.ids.push_back(t.id);
    for (std::size_t i = 0; i < traces.size(); ++i)
        for (std::size_t j = i + 1; j < traces.size(); ++j)
            m.entries.push_back(approx_dist(spec, traces[i], traces[j], opts, &c));
    return m;
}

/// CSV with header `i,j,lo,hi,converged`, one row per pair i < j in
/// ascending (i, j) order; converged is 0 or 1.
inline std::string distance_matrix_to_csv(const DistanceMatrix& m) {
    std::string s = "i,j,lo,hi,converged\n";
    std::size_t k = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = i + 1; j < m.size(); ++j, ++k) {
            const DistanceResult& r = m.entries[k];
            s += std::to_string(i) + "," + std::to_string(j) + "," + format_double(r.lo) + "," +
                 format_double(r.hi) + "," + (r.converged ? "1" : "0") + "\n";
        }
    }
    return s;
}

inline void save_distance_matrix(const DistanceMatrix& m, const std::string& path) {
    write_file_atomic(path, distance_matrix_to_csv(m));
}

}  // namespace logidist
