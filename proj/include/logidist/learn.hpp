#pragma once

// Unsupervised grouping of traces from pairwise boundary distances
// (agglomerative clustering) and of low-dimensional features extracted
// from boundaries (k-means, 2-D Gaussian mixtures).
//
// Every routine is deterministic: ties break toward smallest indices,
// and all randomness flows from an explicit seed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "logidist/common.hpp"
#include "logidist/distance.hpp"

namespace logidist {

enum class Linkage { Single, Complete, Average };

inline Linkage linkage_from_name(const std::string& name) {
    if (name == "single") return Linkage::Single;
    if (name == "complete") return Linkage::Complete;
    if (name == "average") return Linkage::Average;
    throw input_error("unknown linkage '" + name + "' (expected single, complete or average)");
}

/// Cluster assignment: labels[i] in [0, k).  Labels are numbered by
/// the smallest member index of each cluster, so label 0 always
/// contains item 0.
struct Labeling {
    int k = 0;
    std::vector<int> labels;

    bool operator==(const Labeling&) const = default;

    std::vector<std::vector<std::size_t>> groups() const {
        std::vector<std::vector<std::size_t>> g(k);
        for (std::size_t i = 0; i < labels.size(); ++i) g[labels[i]].push_back(i);
        return g;
    }
};

namespace detail {

inline void check_dissimilarity(const std::vector<std::vector<double>>& d) {
    const std::size_t n = d.size();
    for (const auto& row : d)
        if (row.size() != n) throw input_error("dissimilarity matrix is not square");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (d[i][j] < 0.0) throw input_error("dissimilarity matrix has negative entries");
            if (d[i][j] != d[j][i]) throw input_error("dissimilarity matrix is not symmetric");
        }
}

inline double linkage_dist(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b,
                           const std::vector<std::vector<double>>& d, Linkage linkage) {
    double best = linkage == Linkage::Single ? std::numeric_limits<double>::infinity() : 0.0;
    double sum = 0.0;
    for (std::size_t i : a)
        for (std::size_t j : b) {
            const double v = d[i][j];
            if (linkage == Linkage::Single)
                best = std::min(best, v);
            else if (linkage == Linkage::Complete)
                best = std::max(best, v);
            else
                sum += v;
        }
    if (linkage == Linkage::Average) return sum / (static_cast<double>(a.size()) * b.size());
    return best;
}

}  // namespace detail

/// Bottom-up merging until k clusters remain.  Cluster distances are
/// recomputed from the base dissimilarities under the chosen linkage.
/// Equal merge candidates resolve to the pair whose smallest member
/// indices are lexicographically least.
inline Labeling agglomerative(const std::vector<std::vector<double>>& dissim, int k,
                              Linkage linkage = Linkage::Complete) {
    detail::check_dissimilarity(dissim);
    const std::size_t n = dissim.size();
    if (k <= 0) throw input_error("agglomerative: k must be positive");
    if (static_cast<std::size_t>(k) > n)
        throw input_error("agglomerative: k exceeds the number of items");

    // Clusters keep members sorted, so front() is the smallest index.
    std::vector<std::vector<std::size_t>> clusters(n);
    for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};

    while (clusters.size() > static_cast<std::size_t>(k)) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double v = detail::linkage_dist(clusters[i], clusters[j], dissim, linkage);
                // Clusters stay ordered by smallest member, so the first
                // (i, j) attaining the minimum is the lexicographic tie winner.
                if (v < best) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        std::vector<std::size_t> merged;
        std::merge(clusters[bi].begin(), clusters[bi].end(), clusters[bj].begin(),
                   clusters[bj].end(), std::back_inserter(merged));
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
        clusters[bi] = std::move(merged);
        // Keep clusters sorted by smallest member index.
        std::sort(clusters.begin(), clusters.end(),
                  [](const auto& a, const auto& b) { return a.front() < b.front(); });
    }

    Labeling lab;
    lab.k = k;
    lab.labels.assign(n, 0);
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (std::size_t i : clusters[c]) lab.labels[i] = static_cast<int>(c);
    return lab;
}

/// Midpoint scalarization of certified intervals: a pair's
/// dissimilarity is (lo + hi) / 2.
inline std::vector<std::vector<double>> midpoint_dissimilarity(const DistanceMatrix& m) {
    const std::size_t n = m.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const DistanceResult& r = m.at(i, j);
            d[i][j] = d[j][i] = 0.5 * (r.lo + r.hi);
        }
    return d;
}

inline Labeling agglomerative(const DistanceMatrix& m, int k, Linkage linkage = Linkage::Complete) {
    return agglomerative(midpoint_dissimilarity(m), k, linkage);
}

/// CSV with header `id,label`, one row per item.
inline std::string labeling_to_csv(const Labeling& lab, const std::vector<std::string>& ids) {
    if (ids.size() != lab.labels.size())
        throw internal_error("labeling_to_csv: id/label count mismatch");
    std::string s = "id,label\n";
    for (std::size_t i = 0; i < ids.size(); ++i)
        s += ids[i] + "," + std::to_string(lab.labels[i]) + "\n";
    return s;
}

inline void save_labeling(const Labeling& lab, const std::vector<std::string>& ids,
                          const std::string& path) {
    write_file_atomic(path, labeling_to_csv(lab, ids));
}

/// Inverse of labeling_to_csv, reordered to match expected_ids.  Rows
/// may appear in any order but must cover the expected ids exactly.
inline Labeling labeling_from_csv(std::string_view text,
                                  const std::vector<std::string>& expected_ids) {
    auto fail = [](const std::string& why) -> void {
        throw input_error("labeling csv: " + why);
    };
    std::vector<std::string> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty() || strip_cr(lines.front()) != "id,label")
        fail("missing 'id,label' header");
    std::map<std::string, int> by_id;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string line(strip_cr(lines[i]));
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2) fail("row " + std::to_string(i) + " needs two fields");
        int label = -1;
        try {
            label = std::stoi(fields[1]);
        } catch (const std::exception&) {
            fail("row " + std::to_string(i) + " has a non-numeric label");
        }
        if (label < 0) fail("row " + std::to_string(i) + " has a negative label");
        if (!by_id.emplace(fields[0], label).second)
            fail("duplicate id '" + fields[0] + "'");
    }
    Labeling lab;
    for (const std::string& id : expected_ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) fail("no row for id '" + id + "'");
        lab.labels.push_back(it->second);
        lab.k = std::max(lab.k, it->second + 1);
        by_id.erase(it);
    }
    if (!by_id.empty()) fail("unknown id '" + by_id.begin()->first + "'");
    return lab;
}

namespace detail {

inline double sqdist(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline void check_points(const std::vector<Point>& pts) {
    if (pts.empty()) throw input_error("point set is empty");
    for (const Point& p : pts)
        if (p.size() != pts.front().size()) throw input_error("points have mixed dimensions");
}

/// k-means++ seeding: first center uniform, later centers drawn with
/// probability proportional to squared distance from the chosen set.
inline std::vector<Point> kmeanspp_init(const std::vector<Point>& pts, int k, rng_t& rng) {
    std::vector<Point> centers;
    std::uniform_int_distribution<std::size_t> first(0, pts.size() - 1);
    centers.push_back(pts[first(rng)]);
    std::vector<double> d2(pts.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const Point& c : centers) best = std::min(best, sqdist(pts[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double r = unit(rng) * total;
            double acc = 0.0;
            pick = pts.size() - 1;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                acc += d2[i];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pts[pick]);
    }
    return centers;
}

}  // namespace detail

struct KMeansResult {
    std::vector<Point> centroids;  // k centroids
    std::vector<int> labels;       // nearest centroid per point, ties to lowest index
    int iterations = 0;
};

/// Lloyd's algorithm from a k-means++ seeding.  Empty clusters are
/// re-seeded with the point farthest from its assigned centroid.
inline KMeansResult kmeans(const std::vector<Point>& pts, int k, std::uint64_t seed,
                           int max_iter = 100) {
    detail::check_points(pts);
    if (k <= 0) throw input_error("kmeans: k must be positive");
    if (static_cast<std::size_t>(k) > pts.size())
        throw input_error("kmeans: k exceeds the number of points");
    rng_t rng(seed);
    KMeansResult res;
    res.centroids = detail::kmeanspp_init(pts, k, rng);
    res.labels.assign(pts.size(), 0);

    const std::size_t dim = pts.front().size();
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it + 1;
        bool changed = false;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            int best = 0;
            double bd = detail::sqdist(pts[i], res.centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = detail::sqdist(pts[i], res.centroids[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (res.labels[i] != best) {
                res.labels[i] = best;
                changed = true;
            }
        }
        std::vector<Point> sums(k, Point(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            for (std::size_t d = 0; d < dim; ++d) sums[res.labels[i]][d] += pts[i][d];
            ++counts[res.labels[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Deterministic re-seed: farthest point, lowest index on ties.
                std::size_t far = 0;
                double fd = -1.0;
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    const double d = detail::sqdist(pts[i], res.centroids[res.labels[i]]);
                    if (d > fd) {
                        fd = d;
                        far = i;
                    }
                }
                res.centroids[c] = pts[far];
                changed = true;
                continue;
            }
            for (std::size_t d = 0; d < dim; ++d)
                res.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        if (!changed && it > 0) break;
    }
    return res;
}

/// Mean silhouette coefficient under Euclidean distance.  Points in
/// singleton clusters contribute 0.
inline double silhouette(const std::vector<Point>& pts, const std::vector<int>& labels, int k) {
    detail::check_points(pts);
    if (pts.size() != labels.size()) throw input_error("silhouette: point/label count mismatch");
    if (k < 2) throw input_error("silhouette: needs at least two clusters");
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) {
        if (l < 0 || l >= k) throw input_error("silhouette: label out of range");
        ++counts[l];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (counts[labels[i]] <= 1) continue;  // contributes 0
        std::vector<double> mean_dist(k, 0.0);
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i == j) continue;
            mean_dist[labels[j]] += std::sqrt(detail::sqdist(pts[i], pts[j]));
        }
        double a = 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            if (c == labels[i])
                a = mean_dist[c] / static_cast<double>(counts[c] - 1);
            else
                b = std::min(b, mean_dist[c] / static_cast<double>(counts[c]));
        }
        if (!std::isfinite(b)) continue;  // every other cluster empty
        const double m = std::max(a, b);
        if (m > 0.0) total += (b - a) / m;
    }
    return total / static_cast<double>(pts.size());
}

/// One 2-D Gaussian mixture component; cov stores (xx, xy, yy).
struct GmmComponent {
    double weight = 0.0;
    std::array<double, 2> mean{};
    std::array<double, 3> cov{};
};

struct GmmModel {
    std::vector<GmmComponent> comps;
    std::vector<double> loglik_history;  // total log-likelihood per EM iteration
    int iterations = 0;
    bool converged = false;
};

struct GmmOptions {
    int max_iter = 200;
    double tol = 1e-6;   // stop when the log-likelihood gain drops below this
    double reg = 1e-6;   // added to both covariance diagonals every update
};

namespace detail {

inline double gauss_logpdf(const GmmComponent& c, double x, double y) {
    const double det = c.cov[0] * c.cov[2] - c.cov[1] * c.cov[1];
    if (det <= 0.0) throw internal_error("gmm: covariance not positive definite");
    const double dx = x - c.mean[0];
    const double dy = y - c.mean[1];
    const double quad = (c.cov[2] * dx * dx - 2.0 * c.cov[1] * dx * dy + c.cov[0] * dy * dy) / det;
    constexpr double log2pi = 1.8378770664093453;
    return -log2pi - 0.5 * std::log(det) - 0.5 * quad;
}

}  // namespace detail

/// Expectation-maximization for a 2-D Gaussian mixture, seeded with
/// k-means++ means, uniform weights and the global diagonal variance.
inline GmmModel gmm_fit(const std::vector<Point>& pts, int k, std::uint64_t seed,
                        const GmmOptions& opts = {}) {
    detail::check_points(pts);
    if (pts.front().size() != 2) throw input_error("gmm_fit: points must be 2-D");
    if (k <= 0) throw input_error("gmm_fit: k must be positive");
    if (static_cast<std::size_t>(k) > pts.size())
        throw input_error("gmm_fit: k exceeds the number of points");
    const std::size_t n = pts.size();

    rng_t rng(seed);
    const std::vector<Point> seeds = detail::kmeanspp_init(pts, k, rng);

    // Global diagonal variance as the starting spread.
    double mx = 0.0, my = 0.0;
    for (const Point& p : pts) {
        mx += p[0];
        my += p[1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double vx = 0.0, vy = 0.0;
    for (const Point& p : pts) {
        vx += (p[0] - mx) * (p[0] - mx);
        vy += (p[1] - my) * (p[1] - my);
    }
    vx = vx / static_cast<double>(n) + opts.reg;
    vy = vy / static_cast<double>(n) + opts.reg;

    GmmModel model;
    for (int c = 0; c < k; ++c) {
        GmmComponent comp;
        comp.weight = 1.0 / k;
        comp.mean = {seeds[c][0], seeds[c][1]};
        comp.cov = {vx, 0.0, vy};
        model.comps.push_back(comp);
    }

    std::vector<double> resp(n * static_cast<std::size_t>(k));
    for (int it = 0; it < opts.max_iter; ++it) {
        model.iterations = it + 1;
        // E step with log-sum-exp per point.
        double loglik = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double maxl = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double l = std::log(model.comps[c].weight) +
                                 detail::gauss_logpdf(model.comps[c], pts[i][0], pts[i][1]);
                resp[i * k + c] = l;
                maxl = std::max(maxl, l);
            }
            double sum = 0.0;
            for (int c = 0; c < k; ++c) sum += std::exp(resp[i * k + c] - maxl);
            const double lse = maxl + std::log(sum);
            loglik += lse;
            for (int c = 0; c < k; ++c) resp[i * k + c] = std::exp(resp[i * k + c] - lse);
        }
        model.loglik_history.push_back(loglik);

        // M step.
        for (int c = 0; c < k; ++c) {
            double w = 0.0, sx = 0.0, sy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + c];
                w += r;
                sx += r * pts[i][0];
                sy += r * pts[i][1];
            }
            GmmComponent& comp = model.comps[c];
            if (w <= 0.0) {
                comp.weight = std::numeric_limits<double>::min();
                continue;
            }
            comp.weight = w / static_cast<double>(n);
            comp.mean = {sx / w, sy / w};
            double cxx = 0.0, cxy = 0.0, cyy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + c];
                const double dx = pts[i][0] - comp.mean[0];
                const double dy = pts[i][1] - comp.mean[1];
                cxx += r * dx * dx;
                cxy += r * dx * dy;
                cyy += r * dy * dy;
            }
            comp.cov = {cxx / w + opts.reg, cxy / w, cyy / w + opts.reg};
        }

        const std::size_t h = model.loglik_history.size();
        if (h >= 2 && model.loglik_history[h - 1] - model.loglik_history[h - 2] < opts.tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

/// Most probable component for a point: argmax of weighted density,
/// ties to the lowest component index.
inline int gmm_predict(const GmmModel& model, const Point& p) {
    if (model.comps.empty()) throw internal_error("gmm_predict: empty model");
    if (p.size() != 2) throw input_error("gmm_predict: point must be 2-D");
    int best = 0;
    double bl = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.comps.size(); ++c) {
        const double l = std::log(model.comps[c].weight) +
                         detail::gauss_logpdf(model.comps[c], p[0], p[1]);
        if (l > bl) {
            bl = l;
            best = static_cast<int>(c);
        }
    }
    return best;
}

inline double gmm_loglik(const GmmModel& model, const std::vector<Point>& pts) {
    double total = 0.0;
    for (const Point& p : pts) {
        double maxl = -std::numeric_limits<double>::infinity();
        std::vector<double> ls(model.comps.size());
        for (std::size_t c = 0; c < model.comps.size(); ++c) {
            ls[c] = std::log(model.comps[c].weight) +
                    detail::gauss_logpdf(model.comps[c], p[0], p[1]);
            maxl = std::max(maxl, ls[c]);
        }
        double sum = 0.0;
        for (double l : ls) sum += std::exp(l - maxl);
        total += maxl + std::log(sum);
    }
    return total;
}

/// Text form: one header line, then per component
///   comp <weight> <mean_x> <mean_y> <cov_xx> <cov_xy> <cov_yy>
/// with shortest round-trip doubles.
inline std::string gmm_to_text(const GmmModel& model) {
    std::string s = "# gmm v1\ncomponents " + std::to_string(model.comps.size()) + "\n";
    for (const GmmComponent& c : model.comps) {
        s += "comp " + format_double(c.weight) + " " + format_double(c.mean[0]) + " " +
             format_double(c.mean[1]) + " " + format_double(c.cov[0]) + " " +
             format_double(c.cov[1]) + " " + format_double(c.cov[2]) + "\n";
    }
    return s;
}

inline GmmModel gmm_from_text(const std::string& text) {
    GmmModel model;
    std::istringstream in(text);
    std::string raw;
    std::size_t expected = 0;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line(strip_cr(raw));
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split(line, ' ');
        auto num = [&](const std::string& f) {
            double v = 0.0;
            if (!parse_double(f, v))
                throw input_error("gmm file line " + std::to_string(lineno) + ": bad number '" + f + "'");
            return v;
        };
        if (fields[0] == "components" && fields.size() == 2) {
            expected = static_cast<std::size_t>(num(fields[1]));
        } else if (fields[0] == "comp" && fields.size() == 7) {
            GmmComponent c;
            c.weight = num(fields[1]);
            c.mean = {num(fields[2]), num(fields[3])};
            c.cov = {num(fields[4]), num(fields[5]), num(fields[6])};
            model.comps.push_back(c);
        } else {
            throw input_error("gmm file line " + std::to_string(lineno) + ": unrecognized line");
        }
    }
    if (model.comps.size() != expected)
        throw input_error("gmm file: component count mismatch");
    return model;
}

inline void save_gmm(const GmmModel& model, const std::string& path) {
    write_file_atomic(path, gmm_to_text(model));
}

inline GmmModel load_gmm(const std::string& path) { return gmm_from_text(read_file(path)); }

}  // namespace logidist
