#pragma once

// Validity-domain boundary approximation.
//
// For a monotone parametric spec evaluated on a fixed trace, the set of
// normalized parameter points where the spec holds is upward closed in
// [0,1]^n.  Its boundary is covered by a set of axis-aligned rectangles,
// obtained by recursive subdivision of mixed rectangles (false at the
// bottom corner, true at the top corner).  Each refinement level halves
// the maximum rectangle edge, so the cover converges to the boundary.
//
// The accuracy of a cover is summarized by eps = 2*max_edge + 2*eta:
// any boundary point is within eps/2 of some cover rectangle and vice
// versa, where eta is the bisection tolerance used to locate crossings.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include "logidist/common.hpp"
#include "logidist/specdsl.hpp"
#include "logidist/trace.hpp"

namespace logidist {

using Point = std::vector<double>;

/// Axis-aligned rectangle [bot, top] in normalized parameter space.
/// Invariant: bot.size() == top.size() and bot[i] <= top[i].
struct Rect {
    Point bot;
    Point top;

    bool operator==(const Rect&) const = default;

    std::size_t dims() const { return bot.size(); }

    double max_edge() const {
        double m = 0.0;
        for (std::size_t i = 0; i < bot.size(); ++i) m = std::max(m, top[i] - bot[i]);
        return m;
    }

    Point center() const {
        Point c(bot.size());
        for (std::size_t i = 0; i < bot.size(); ++i) c[i] = bot[i] + 0.5 * (top[i] - bot[i]);
        return c;
    }

    bool contains(const Point& p) const {
        for (std::size_t i = 0; i < bot.size(); ++i)
            if (p[i] < bot[i] || p[i] > top[i]) return false;
        return true;
    }
};

inline double max_edge(const std::vector<Rect>& rects) {
    double m = 0.0;
    for (const Rect& r : rects) m = std::max(m, r.max_edge());
    return m;
}

/// Classification of a rectangle against the validity domain.
enum class BoxClass { AllTrue, AllFalse, Mixed };

/// Classifies a rectangle using only its two extreme corners.  By
/// monotonicity, truth at the bottom corner forces truth everywhere in
/// the rectangle, and falsehood at the top corner forces falsehood.
inline BoxClass classify_box(const ParametricSpec& spec, const Trace& trace, const Rect& r) {
    if (evaluate(spec, trace, r.bot)) return BoxClass::AllTrue;
    if (!evaluate(spec, trace, r.top)) return BoxClass::AllFalse;
    return BoxClass::Mixed;
}

/// Result of locating the validity boundary along a rectangle diagonal.
///
/// For a mixed rectangle the map t -> bot + t*(top - bot) is false at
/// t=0 and true at t=1, and monotone in t, so bisection brackets the
/// flip.  p_false/p_true are the bracket endpoints (within eta of each
/// other in the infinity norm).  t_false/t_true are their diagonal
/// parameters.
///
/// If the flip hugs a corner (the bracket never detaches from t=0 or
/// t=1), the rectangle straddles the boundary without the diagonal
/// crossing its interior; `degenerate` is set and both points are the
/// diagonal midpoint, which then serves as the subdivision point.
struct Crossing {
    Point p_false;
    Point p_true;
    double t_false = 0.0;
    double t_true = 1.0;
    bool degenerate = false;
};

namespace detail {

inline Point diag_point(const Rect& r, double t) {
    Point p(r.dims());
    for (std::size_t i = 0; i < r.dims(); ++i) p[i] = r.bot[i] + t * (r.top[i] - r.bot[i]);
    return p;
}

}  // namespace detail

/// Bisects the diagonal of a mixed rectangle until the bracket width is
/// at most eta in the infinity norm.  Precondition: classify_box(r) is
/// Mixed.  If the rectangle's diagonal is already within eta, returns
/// (bot, top) unchanged.
inline Crossing diagonal_crossing(const ParametricSpec& spec, const Trace& trace, const Rect& r,
                                  double eta) {
    if (eta <= 0.0) throw input_error("diagonal_crossing: eta must be positive");
    const double edge = r.max_edge();
    Crossing cr;
    cr.p_false = r.bot;
    cr.p_true = r.top;
    if (edge <= eta) return cr;  // already tight

    double t_lo = 0.0, t_hi = 1.0;
    // Bracket width in the infinity norm is (t_hi - t_lo) * edge.
    int guard = 0;
    while ((t_hi - t_lo) * edge > eta && guard++ < 200) {
        const double t_mid = 0.5 * (t_lo + t_hi);
        if (evaluate(spec, trace, detail::diag_point(r, t_mid)))
            t_hi = t_mid;
        else
            t_lo = t_mid;
    }
    if (t_lo == 0.0 || t_hi == 1.0) {
        // Flip pinned at a corner: treat as degenerate, report midpoint.
        cr.degenerate = true;
        cr.t_false = cr.t_true = 0.5;
        cr.p_false = cr.p_true = detail::diag_point(r, 0.5);
        return cr;
    }
    cr.t_false = t_lo;
    cr.t_true = t_hi;
    cr.p_false = detail::diag_point(r, t_lo);
    cr.p_true = detail::diag_point(r, t_hi);
    return cr;
}

/// Degenerate global cases: the validity domain is all of [0,1]^n or
/// empty, so there is no boundary inside the box.
enum class DomainKind { Regular, AllTrue, AllFalse };

/// A rectangle cover of the validity boundary at a given refinement
/// depth.  `eps` bounds twice the one-sided Hausdorff slack between the
/// cover and the true boundary.
struct BoundaryApprox {
    std::string spec_id;
    std::string trace_id;
    int depth = 0;
    double eta = 1e-4;
    double eps = 0.0;
    DomainKind domain = DomainKind::Regular;
    std::string warning;  // nonempty for degenerate domains
    std::vector<Rect> rects;

    std::size_t dims() const { return rects.empty() ? 0 : rects.front().dims(); }
};

namespace detail {

/// Subdivides one mixed rectangle at a point m strictly inside it and
/// keeps the mixed corner sub-boxes.  All 2^n corner combinations are
/// considered: when m sits exactly on the boundary the all-low and
/// all-high quadrants are uniform, but a boundary flat passing within
/// eta of m can make one of them mixed, and dropping it would lose the
/// flat from the cover.
inline void keep_mixed_children(const ParametricSpec& spec, const Trace& trace, const Rect& r,
                                const Point& m, std::vector<Rect>& out) {
    const std::size_t n = r.dims();
    const std::uint64_t combos = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < combos; ++mask) {
        Rect c;
        c.bot.resize(n);
        c.top.resize(n);
        bool empty = false;
        for (std::size_t i = 0; i < n; ++i) {
            const bool high = (mask >> i) & 1u;
            c.bot[i] = high ? m[i] : r.bot[i];
            c.top[i] = high ? r.top[i] : m[i];
            if (c.top[i] - c.bot[i] <= 0.0) empty = true;
        }
        if (empty) continue;
        if (classify_box(spec, trace, c) == BoxClass::Mixed) out.push_back(c);
    }
}

/// One subdivision step of a mixed rectangle.  Locates the boundary on
/// the diagonal; if the bracket midpoint is central (diagonal fraction
/// in [1/4, 3/4]) splits there and keeps the bracket box, otherwise
/// splits at the rectangle center.  Appends the surviving mixed
/// children to `out`; at least one child always survives.
inline void subdivide_once(const ParametricSpec& spec, const Trace& trace, const Rect& r,
                           double eta, std::vector<Rect>& out) {
    const std::size_t before = out.size();
    const Crossing cr = diagonal_crossing(spec, trace, r, eta);
    const double t_mid = 0.5 * (cr.t_false + cr.t_true);
    if (!cr.degenerate && t_mid >= 0.25 && t_mid <= 0.75) {
        Point m(r.dims());
        for (std::size_t i = 0; i < r.dims(); ++i) m[i] = 0.5 * (cr.p_false[i] + cr.p_true[i]);
        keep_mixed_children(spec, trace, r, m, out);
        Rect bracket{cr.p_false, cr.p_true};
        if (bracket.max_edge() > 1e-12) out.push_back(bracket);
    } else {
        keep_mixed_children(spec, trace, r, r.center(), out);
    }
    if (out.size() == before) {
        // Cannot subdivide further at working precision; keep the
        // boundary location as a point so the cover stays nonempty.
        const Point m = cr.degenerate ? cr.p_false : detail::diag_point(r, t_mid);
        out.push_back(Rect{m, m});
    }
}

}  // namespace detail

inline double cover_eps(double edge, double eta) { return 2.0 * edge + 2.0 * eta; }

/// Depth-0 cover: the unit box if the boundary crosses it, otherwise a
/// sentinel point rectangle at the corner the domain collapses onto.
inline BoundaryApprox approx_init(const ParametricSpec& spec, const Trace& trace,
                                  double eta = 1e-4) {
    if (eta <= 0.0) throw input_error("approx_init: eta must be positive");
    const std::size_t n = spec.dims();
    if (n == 0) throw input_error("approx_init: spec has no parameters");
    BoundaryApprox b;
    b.spec_id = spec.id;
    b.trace_id = trace.id;
    b.eta = eta;
    Rect unit{Point(n, 0.0), Point(n, 1.0)};
    switch (classify_box(spec, trace, unit)) {
    case BoxClass::Mixed:
        b.rects.push_back(unit);
        break;
    case BoxClass::AllTrue:
        b.domain = DomainKind::AllTrue;
        b.warning = "validity domain covers the whole parameter box; boundary pinned at the origin corner";
        b.rects.push_back(Rect{Point(n, 0.0), Point(n, 0.0)});
        break;
    case BoxClass::AllFalse:
        b.domain = DomainKind::AllFalse;
        b.warning = "validity domain is empty in the parameter box; boundary pinned at the all-ones corner";
        b.rects.push_back(Rect{Point(n, 1.0), Point(n, 1.0)});
        break;
    }
    b.eps = cover_eps(max_edge(b.rects), eta);
    return b;
}

/// One refinement level: subdivides rectangles until the maximum edge
/// has at least halved (subdivision points off center can leave a child
/// above the target, so a level may take a few subdivision rounds).
/// Degenerate-domain covers pass through unchanged apart from depth.
inline BoundaryApprox refine(const ParametricSpec& spec, const Trace& trace,
                             const BoundaryApprox& b) {
    BoundaryApprox next = b;
    next.depth = b.depth + 1;
    if (b.domain != DomainKind::Regular) return next;

    const double target = std::max(max_edge(b.rects) * 0.5, b.eta);
    std::vector<Rect> work = b.rects;
    std::vector<Rect> done;
    std::vector<Rect> children;
    while (!work.empty()) {
        Rect r = std::move(work.back());
        work.pop_back();
        if (r.max_edge() <= target) {
            done.push_back(std::move(r));
            continue;
        }
        children.clear();
        detail::subdivide_once(spec, trace, r, b.eta, children);
        for (Rect& c : children) {
            if (c.max_edge() <= target)
                done.push_back(std::move(c));
            else
                work.push_back(std::move(c));
        }
    }
    next.rects = std::move(done);
    next.eps = cover_eps(max_edge(next.rects), b.eta);
    return next;
}

/// Cover at refinement depth i, built by chaining refine from depth 0.
inline BoundaryApprox approx_to_depth(const ParametricSpec& spec, const Trace& trace, int depth,
                                      double eta = 1e-4) {
    if (depth < 0) throw input_error("approx_to_depth: depth must be nonnegative");
    BoundaryApprox b = approx_init(spec, trace, eta);
    for (int i = 0; i < depth; ++i) b = refine(spec, trace, b);
    return b;
}

/// Memoizes covers per (spec id, trace id, eta) so that deepening a
/// cover reuses all shallower levels.  Callers must keep ids unique per
/// spec/trace instance within a run.  Thread safe.
class BoundaryCache {
  public:
    const BoundaryApprox& get(const ParametricSpec& spec, const Trace& trace, int depth,
                              double eta = 1e-4) {
        if (depth < 0) throw input_error("BoundaryCache: depth must be nonnegative");
        const std::string key = make_key(spec.id, trace.id, eta);
        {
            std::shared_lock lock(mutex_);
            auto it = chains_.find(key);
            if (it != chains_.end() && static_cast<int>(it->second->size()) > depth)
                return (*it->second)[depth];
        }
        std::unique_lock lock(mutex_);
        auto& chain = chains_[key];
        if (!chain) chain = std::make_unique<std::vector<BoundaryApprox>>();
        if (chain->empty()) chain->push_back(approx_init(spec, trace, eta));
        while (static_cast<int>(chain->size()) <= depth)
            chain->push_back(refine(spec, trace, chain->back()));
        return (*chain)[depth];
    }

    void clear() {
        std::unique_lock lock(mutex_);
        chains_.clear();
    }

  private:
    static std::string make_key(const std::string& spec_id, const std::string& trace_id,
                                double eta) {
        return spec_id + '\x1f' + trace_id + '\x1f' + format_double(eta);
    }

    std::shared_mutex mutex_;
    // unique_ptr keeps element references stable across rehashing.
    std::map<std::string, std::unique_ptr<std::vector<BoundaryApprox>>> chains_;
};

/// Serializes a cover to a line-oriented text format:
///   # boundary cover v1
///   spec_id <id>
///   trace_id <id>
///   depth <i>
///   eta <v>
///   eps <v>
///   dims <n>
///   domain regular|all_true|all_false
///   warning <text>        (only when nonempty)
///   rects <count>
///   rect <bot...> <top...>
/// Doubles use shortest round-trip formatting.
inline std::string boundary_to_text(const BoundaryApprox& b) {
    std::string s;
    s += "# boundary cover v1\n";
    s += "spec_id " + b.spec_id + "\n";
    s += "trace_id " + b.trace_id + "\n";
    s += "depth " + std::to_string(b.depth) + "\n";
    s += "eta " + format_double(b.eta) + "\n";
    s += "eps " + format_double(b.eps) + "\n";
    s += "dims " + std::to_string(b.dims()) + "\n";
    s += "domain ";
    switch (b.domain) {
    case DomainKind::Regular: s += "regular"; break;
    case DomainKind::AllTrue: s += "all_true"; break;
    case DomainKind::AllFalse: s += "all_false"; break;
    }
    s += "\n";
    if (!b.warning.empty()) s += "warning " + b.warning + "\n";
    s += "rects " + std::to_string(b.rects.size()) + "\n";
    for (const Rect& r : b.rects) {
        s += "rect";
        for (double v : r.bot) s += " " + format_double(v);
        for (double v : r.top) s += " " + format_double(v);
        s += "\n";
    }
    return s;
}

inline void save_boundary(const BoundaryApprox& b, const std::string& path) {
    write_file_atomic(path, boundary_to_text(b));
}

inline BoundaryApprox boundary_from_text(const std::string& text) {
    BoundaryApprox b;
    std::size_t dims = 0;
    std::size_t expected_rects = 0;
    bool have_rects_header = false;
    int lineno = 0;
    std::istringstream in(text);
    std::string raw;
    auto fail = [&](const std::string& what) -> double {
        throw input_error("boundary file line " + std::to_string(lineno) + ": " + what);
    };
    auto num = [&](std::string_view field) {
        double v = 0.0;
        if (!parse_double(field, v)) fail("bad number '" + std::string(field) + "'");
        return v;
    };
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line(strip_cr(raw));
        if (line.empty() || line[0] == '#') continue;
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        const std::string rest = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "spec_id") {
            b.spec_id = rest;
        } else if (key == "trace_id") {
            b.trace_id = rest;
        } else if (key == "depth") {
            b.depth = static_cast<int>(num(rest));
        } else if (key == "eta") {
            b.eta = num(rest);
        } else if (key == "eps") {
            b.eps = num(rest);
        } else if (key == "dims") {
            dims = static_cast<std::size_t>(num(rest));
        } else if (key == "domain") {
            if (rest == "regular")
                b.domain = DomainKind::Regular;
            else if (rest == "all_true")
                b.domain = DomainKind::AllTrue;
            else if (rest == "all_false")
                b.domain = DomainKind::AllFalse;
            else
                fail("unknown domain kind '" + rest + "'");
        } else if (key == "warning") {
            b.warning = rest;
        } else if (key == "rects") {
            expected_rects = static_cast<std::size_t>(num(rest));
            have_rects_header = true;
        } else if (key == "rect") {
            if (dims == 0) fail("rect before dims");
            const auto fields = split(rest, ' ');
            if (fields.size() != 2 * dims) fail("expected " + std::to_string(2 * dims) + " coordinates");
            Rect r;
            r.bot.resize(dims);
            r.top.resize(dims);
            for (std::size_t i = 0; i < dims; ++i) r.bot[i] = num(fields[i]);
            for (std::size_t i = 0; i < dims; ++i) r.top[i] = num(fields[dims + i]);
            for (std::size_t i = 0; i < dims; ++i)
                if (r.bot[i] > r.top[i]) fail("rect has bot above top");
            b.rects.push_back(std::move(r));
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    if (!have_rects_header) throw input_error("boundary file: missing rects header");
    if (b.rects.size() != expected_rects)
        throw input_error("boundary file: rect count mismatch (header " +
                          std::to_string(expected_rects) + ", found " +
                          std::to_string(b.rects.size()) + ")");
    return b;
}

inline BoundaryApprox load_boundary(const std::string& path) {
    return boundary_from_text(read_file(path));
}

}  // namespace logidist
