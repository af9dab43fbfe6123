#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "hypersurface.hpp"
#include "numeric.hpp"
#include "trees.hpp"

namespace arbor {

struct Sheet {
    std::vector<SamplePoint> points;
    std::string name;
};

struct Arrangement {
    int dim = 0;
    double spacing = 0.1;
    Box box;
    std::vector<Sheet> sheets;
};

inline Arrangement arrangement_from(const ArborealHypersurface& h, double spacing) {
    Arrangement arr;
    arr.dim = h.dim();
    arr.spacing = spacing;
    arr.box = Box::cube(h.dim(), kDefaultBoxHalf);
    for (int i = 0; i < static_cast<int>(h.strata().size()); ++i) {
        Sheet s;
        s.name = "v" + std::to_string(h.strata()[i].owner);
        s.points = sample_stratum(h, i, spacing);
        arr.sheets.push_back(std::move(s));
    }
    return arr;
}

struct CornerReport {
    std::vector<int> codim;       // per point; -1 where the box face hides the structure
    bool inconclusive = false;
};

namespace detail {

/// Spatial index over every sheet of an arrangement.
class SheetIndex {
public:
    explicit SheetIndex(const Arrangement& arr) : arr_(&arr) {
        for (const auto& s : arr.sheets) {
            hashes_.emplace_back(arr.spacing, arr.dim);
            for (int i = 0; i < static_cast<int>(s.points.size()); ++i) hashes_.back().insert(s.points[i].p, i);
        }
    }

    template <class Fn>
    void neighbors(int sheet, const Vec& p, double r, Fn&& fn) const {
        const auto& pts = arr_->sheets[sheet].points;
        hashes_[sheet].visit(p, r, [&](int id) {
            if ((pts[id].p - p).norm() <= r) fn(id);
        });
    }

    /// Nearest sample within r, or -1.
    int nearest(int sheet, const Vec& p, double r) const {
        int best = -1;
        double bd = r;
        neighbors(sheet, p, r, [&](int id) {
            double d = (arr_->sheets[sheet].points[id].p - p).norm();
            if (d <= bd) {
                bd = d;
                best = id;
            }
        });
        return best;
    }

    /// True if p lies on the sheet: a sample within one spacing laterally and within tol along its normal.
    bool on_sheet(int sheet, const Vec& p, double tol, int* witness = nullptr) const {
        const auto& pts = arr_->sheets[sheet].points;
        double h = arr_->spacing;
        bool found = false;
        neighbors(sheet, p, 1.5 * h, [&](int id) {
            Vec d = p - pts[id].p;
            double off = std::abs(d.dot(pts[id].normal));
            if (off <= tol && (d - d.dot(pts[id].normal) * pts[id].normal).norm() <= 1.0 * h && !found) {
                found = true;
                if (witness) *witness = id;
            }
        });
        return found;
    }

private:
    const Arrangement* arr_;
    std::vector<num::SpatialHash> hashes_;
};

inline const std::vector<Vec>& direction_set(int m) {
    static std::map<int, std::vector<Vec>> cache;
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
    std::vector<Vec> dirs;
    if (m == 1) {
        dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    } else if (m == 2) {
        for (int i = 0; i < 360; ++i) {
            Vec d(2);
            d << std::cos(i * num::pi / 180), std::sin(i * num::pi / 180);
            dirs.push_back(d);
        }
    } else {
        std::mt19937 rng(12345u + static_cast<unsigned>(m));
        std::normal_distribution<double> gauss;
        for (int i = 0; i < (m == 3 ? 2000 : 6000); ++i) {
            Vec d(m);
            for (int k = 0; k < m; ++k) d[k] = gauss(rng);
            dirs.push_back(d.normalized());
        }
    }
    return cache.emplace(m, std::move(dirs)).first->second;
}

}  // namespace detail

/**
 * Corner codimension per sample: the dimension of the cone of tangent
 * directions d with every neighbour satisfying u . d >= -0.2 (offsets u in
 * units of the neighbourhood radius). Interior points have an empty cone.
 */
inline CornerReport corner_stratification(const Arrangement& arr, int sheet, double radius_factor = 2.5) {
    detail::SheetIndex index(arr);
    CornerReport rep;
    const auto& pts = arr.sheets.at(sheet).points;
    double r = radius_factor * arr.spacing;
    int m = arr.dim - 1;
    rep.codim.assign(pts.size(), 0);
    if (m <= 0) return rep;
    const auto& dirs = detail::direction_set(m);
    int min_count = m == 1 ? 2 : (m == 2 ? 6 : 12);
    int sparse = 0;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        const Vec& p = pts[i].p;
        bool near_box = false;
        for (int k = 0; k < arr.dim; ++k)
            if (p[k] - arr.box.lo[k] < r || arr.box.hi[k] - p[k] < r) near_box = true;
        if (near_box) {
            rep.codim[i] = -1;
            continue;
        }
        std::vector<Vec> u;
        index.neighbors(sheet, p, r, [&](int id) {
            if (id != i) u.push_back(pts[i].frame.transpose() * (pts[id].p - p) / r);
        });
        if (static_cast<int>(u.size()) < min_count) {
            ++sparse;
            rep.codim[i] = -1;
            continue;
        }
        std::vector<Vec> support;
        for (const auto& d : dirs) {
            double lo = 1e9;
            for (const auto& v : u) lo = std::min(lo, v.dot(d));
            if (lo >= -0.2) support.push_back(d);
        }
        if (support.empty()) continue;
        Mat S(support.size(), m);
        for (int k = 0; k < static_cast<int>(support.size()); ++k) S.row(k) = support[k].transpose();
        Eigen::JacobiSVD<Mat> svd(S);
        auto sv = svd.singularValues();
        int k = 0;
        for (int j = 0; j < sv.size(); ++j)
            if (sv[j] >= 0.35 * sv[0]) ++k;
        rep.codim[i] = k;
    }
    rep.inconclusive = !pts.empty() && sparse * 10 > static_cast<int>(pts.size());
    return rep;
}

struct TangencyResult {
    int order = 0;
    bool inconclusive = false;
    bool degenerate = false;
};

/**
 * Compare cubic height fits of two sheets over the tangent plane of sheet i
 * at `point`: 0 when the fitted slopes differ, otherwise the highest degree
 * through which all fitted coefficients agree (capped at 3).
 */
inline TangencyResult tangency_order(const Arrangement& arr, int sheet_i, int sheet_j, const Vec& point,
                                     double tol = 0.02) {
    TangencyResult res;
    if (sheet_i == sheet_j) {
        res.order = 3;
        res.degenerate = true;
        return res;
    }
    detail::SheetIndex index(arr);
    double r = 6 * arr.spacing;
    int qi = index.nearest(sheet_i, point, 2 * arr.spacing);
    int qj = index.nearest(sheet_j, point, 2 * arr.spacing);
    if (qi < 0 || qj < 0) {
        res.inconclusive = true;
        return res;
    }
    const auto& Pi = arr.sheets[sheet_i].points;
    const auto& Pj = arr.sheets[sheet_j].points;
    Vec n = Pi[qi].normal;
    Mat F = Pi[qi].frame;
    int m = static_cast<int>(F.cols());
    if (m == 0) {
        res.order = std::abs(n.dot(Pj[qj].normal)) > std::cos(tol) ? 3 : 0;
        return res;
    }
    // Monomial exponents of total degree <= 3 in m variables.
    std::vector<std::vector<int>> mono;
    std::function<void(std::vector<int>&, int, int)> gen = [&](std::vector<int>& e, int k, int left) {
        if (k == m) {
            mono.push_back(e);
            return;
        }
        for (int a = 0; a <= left; ++a) {
            e[k] = a;
            gen(e, k + 1, left - a);
        }
    };
    std::vector<int> e(m, 0);
    gen(e, 0, 3);
    auto degree = [](const std::vector<int>& ex) {
        int s = 0;
        for (int a : ex) s += a;
        return s;
    };
    auto fit = [&](const std::vector<SamplePoint>& P, int sheet, Vec& coef) {
        std::vector<Vec> u;
        std::vector<double> h;
        index.neighbors(sheet, point, r, [&](int id) {
            Vec d = P[id].p - point;
            u.push_back(F.transpose() * d / r);
            h.push_back(d.dot(n) / r);
        });
        if (u.size() < mono.size() + 2) return false;
        Mat A(u.size(), mono.size());
        Vec b(u.size());
        for (std::size_t row = 0; row < u.size(); ++row) {
            for (std::size_t c = 0; c < mono.size(); ++c) {
                double v = 1;
                for (int k = 0; k < m; ++k) v *= std::pow(u[row][k], mono[c][k]);
                A(row, c) = v;
            }
            b[row] = h[row];
        }
        Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        auto sv = svd.singularValues();
        if (sv[sv.size() - 1] < 1e-6 * sv[0]) {
            // One-sided neighbourhoods can be rank deficient in cubic terms; keep the
            // minimum-norm solution but note conditioning.
        }
        coef = svd.solve(b);
        return true;
    };
    // Transversality from the normals directly.
    if (std::abs(n.dot(Pj[qj].normal)) < std::cos(tol)) {
        res.order = 0;
        return res;
    }
    Vec ci, cj;
    if (!fit(Pi, sheet_i, ci) || !fit(Pj, sheet_j, cj)) {
        res.order = 1;
        res.inconclusive = true;
        return res;
    }
    int order = 1;
    for (int deg = 2; deg <= 3; ++deg) {
        bool agree = true;
        for (std::size_t c = 0; c < mono.size(); ++c)
            if (degree(mono[c]) == deg && std::abs(ci[c] - cj[c]) > tol) agree = false;
        if (!agree) break;
        order = deg;
    }
    res.order = order;
    return res;
}

enum class Verdict { arboreal, generalized, non_arboreal, inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::arboreal: return "arboreal";
        case Verdict::generalized: return "generalized";
        case Verdict::non_arboreal: return "non_arboreal";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

struct GermReport {
    Verdict verdict = Verdict::inconclusive;
    std::optional<SignedRootedTree> tree;
    std::set<int> marked;             // tree vertices standing for omitted strata
    std::string failed_condition;     // "1", "2", "unique_interior" or empty
    std::string reason;
    std::vector<Vec> witness_points;
    std::vector<int> sheet_vertex;    // tree vertex id of each sheet
};

struct ClassifierOptions {
    double on_sheet_tol = 0;          // 0 selects 0.05 * spacing
    double tangent_angle = 0.02;      // radians
    double duplicate_fraction = 0.5;
};

/**
 * Decide whether sampled sheets form a (generalized) arboreal hypersurface
 * and recover the signed rooted tree. Sheets become tree vertices; sheets
 * whose boundary rests tangentially on another sheet hang below it, with the
 * sign read off from the side of the co-oriented lower sheet they occupy.
 */
inline GermReport check_arboreal(const Arrangement& arr, const ClassifierOptions& opt = {}) {
    GermReport rep;
    const int ns = static_cast<int>(arr.sheets.size());
    const double h = arr.spacing;
    const double tol = opt.on_sheet_tol > 0 ? opt.on_sheet_tol : 0.05 * h;
    const double cos_tan = std::cos(opt.tangent_angle);
    detail::SheetIndex index(arr);

    for (const auto& s : arr.sheets)
        if (s.points.empty()) {
            rep.reason = "sheet '" + s.name + "' has no samples";
            return rep;
        }

    std::vector<CornerReport> corners;
    for (int j = 0; j < ns; ++j) {
        corners.push_back(corner_stratification(arr, j));
        if (corners.back().inconclusive) {
            rep.reason = "insufficient sample density on sheet '" + arr.sheets[j].name + "'";
            return rep;
        }
    }

    // Unique interiors: no sheet may coincide with another on an open set.
    for (int j = 0; j < ns; ++j) {
        for (int i = 0; i < ns; ++i) {
            if (i == j) continue;
            int interior = 0, shared = 0;
            const auto& P = arr.sheets[j].points;
            for (int k = 0; k < static_cast<int>(P.size()); ++k) {
                if (corners[j].codim[k] != 0) continue;
                ++interior;
                int w = -1;
                if (index.on_sheet(i, P[k].p, tol, &w) &&
                    std::abs(arr.sheets[i].points[w].normal.dot(P[k].normal)) >= cos_tan)
                    ++shared;
            }
            if (interior > 0 && shared > opt.duplicate_fraction * interior) {
                rep.verdict = Verdict::non_arboreal;
                rep.failed_condition = "unique_interior";
                rep.reason = "sheets '" + arr.sheets[i].name + "' and '" + arr.sheets[j].name + "' coincide";
                return rep;
            }
        }
    }

    // Tangent supports of boundary points.
    struct BoundaryPoint {
        int sheet, index;
        std::vector<int> support;
    };
    std::vector<std::vector<BoundaryPoint>> boundary(ns);
    for (int j = 0; j < ns; ++j) {
        const auto& P = arr.sheets[j].points;
        for (int k = 0; k < static_cast<int>(P.size()); ++k) {
            if (corners[j].codim[k] < 1) continue;
            BoundaryPoint bp{j, k, {}};
            for (int i = 0; i < ns; ++i) {
                if (i == j) continue;
                int w = -1;
                if (index.on_sheet(i, P[k].p, tol, &w) &&
                    std::abs(arr.sheets[i].points[w].normal.dot(P[k].normal)) >= cos_tan &&
                    corners[i].codim[w] < corners[j].codim[k])
                    bp.support.push_back(i);
            }
            boundary[j].push_back(std::move(bp));
        }
    }

    // Supporting sheets of each boundary; the boundary of a sheet rests on all of its ancestors.
    std::vector<std::vector<int>> supports(ns);
    std::vector<bool> free_boundary(ns, false);
    std::vector<std::map<int, double>> fraction(ns);
    for (int j = 0; j < ns; ++j) {
        if (boundary[j].empty()) continue;
        std::map<int, int> count;
        int supported = 0;
        for (const auto& bp : boundary[j]) {
            if (!bp.support.empty()) ++supported;
            for (int i : bp.support) ++count[i];
        }
        // A free face is one on which no other sheet rests.
        free_boundary[j] = (static_cast<int>(boundary[j].size()) - supported) * 4 > static_cast<int>(boundary[j].size());
        if (supported == 0) continue;
        for (auto [i, c] : count)
            if (c * 100 >= 15 * supported) supports[j].push_back(i);
        for (auto [i, c] : count) fraction[j][i] = static_cast<double>(c) / supported;
    }
    // Flat transitions let an upper sheet shadow a lower one on a thin band; keep the dominant direction.
    for (int j = 0; j < ns; ++j)
        for (int i = j + 1; i < ns; ++i) {
            auto& sj = supports[j];
            auto& si = supports[i];
            bool ij = std::find(sj.begin(), sj.end(), i) != sj.end();
            bool ji = std::find(si.begin(), si.end(), j) != si.end();
            if (!ij || !ji) continue;
            if (fraction[j][i] >= fraction[i][j]) si.erase(std::find(si.begin(), si.end(), j));
            else sj.erase(std::find(sj.begin(), sj.end(), i));
        }

    // The parent is the support whose own ancestors are the remaining supports.
    std::vector<int> parent(ns, -1);
    std::vector<bool> resolved(ns, false);
    for (int j = 0; j < ns; ++j) resolved[j] = supports[j].empty();
    for (bool progress = true; progress;) {
        progress = false;
        for (int j = 0; j < ns; ++j) {
            if (resolved[j]) continue;
            bool ready = true;
            for (int i : supports[j]) ready = ready && resolved[i];
            if (!ready) continue;
            for (int cand : supports[j]) {
                std::set<int> anc;
                for (int u = parent[cand]; u >= 0; u = parent[u]) anc.insert(u);
                bool nested = true;
                for (int i : supports[j]) nested = nested && (i == cand || anc.count(i));
                if (nested) parent[j] = cand;
            }
            if (parent[j] < 0) {
                rep.reason = "supports of sheet '" + arr.sheets[j].name + "' are not nested";
                rep.witness_points.push_back(arr.sheets[j].points[boundary[j][0].index].p);
                return rep;
            }
            resolved[j] = progress = true;
        }
    }
    for (int j = 0; j < ns; ++j)
        if (!resolved[j]) {
            rep.reason = "cyclic attachment relation";
            return rep;
        }

    // A boundary resting on no other sheet is only allowed in the generalized setting.
    bool any_free = std::find(free_boundary.begin(), free_boundary.end(), true) != free_boundary.end();

    // Condition (2): corners whose tangent supports are disjoint must meet in the expected dimension.
    for (int a = 0; a < ns; ++a) {
        for (int b = a + 1; b < ns; ++b) {
            std::vector<Vec> meet;
            int ka = 1, kb = 1;
            for (const auto& pa : boundary[a]) {
                const Vec& p = arr.sheets[a].points[pa.index].p;
                for (const auto& pb : boundary[b]) {
                    const Vec& q = arr.sheets[b].points[pb.index].p;
                    if ((p - q).norm() > 1.5 * h) continue;
                    std::set<int> sa(pa.support.begin(), pa.support.end());
                    bool disjoint = !sa.count(b);
                    for (int s : pb.support)
                        if (sa.count(s) || s == a) disjoint = false;
                    if (!disjoint) continue;
                    meet.push_back(p);
                    ka = std::max(ka, corners[a].codim[pa.index]);
                    kb = std::max(kb, corners[b].codim[pb.index]);
                    break;
                }
            }
            if (meet.empty()) continue;
            int expected = arr.dim - ka - kb - 2;
            Vec c = Vec::Zero(arr.dim);
            for (const auto& p : meet) c += p;
            c /= static_cast<double>(meet.size());
            double extent = 0;
            for (const auto& p : meet) extent = std::max(extent, (p - c).norm());
            int measured = 0;
            if (extent > 2 * h && meet.size() > 1) {
                Mat M(meet.size(), arr.dim);
                for (std::size_t k = 0; k < meet.size(); ++k) M.row(k) = (meet[k] - c).transpose();
                Eigen::JacobiSVD<Mat> svd(M);
                auto sv = svd.singularValues();
                for (int k = 0; k < sv.size(); ++k)
                    if (sv[k] >= 0.2 * sv[0]) ++measured;
            }
            bool violated = expected < 0 ? extent > 2 * h : measured > expected;
            if (violated) {
                rep.verdict = Verdict::non_arboreal;
                rep.failed_condition = "2";
                rep.reason = "corners of '" + arr.sheets[a].name + "' and '" + arr.sheets[b].name + "' meet in dimension " +
                             std::to_string(measured) + " where " + std::to_string(expected) + " is required";
                rep.witness_points.push_back(meet.front());
                return rep;
            }
        }
    }

    // Assemble the tree: vertex 0 is the root, sheet j is vertex j + 1.
    std::vector<int> vertices{0};
    std::vector<Edge> edges;
    rep.sheet_vertex.resize(ns);
    int next_marked = ns + 1;
    for (int j = 0; j < ns; ++j) {
        vertices.push_back(j + 1);
        rep.sheet_vertex[j] = j + 1;
    }
    for (int j = 0; j < ns; ++j) {
        // The omitted stratum of a free face becomes a marked vertex between the sheet and its parent.
        int below = j + 1;
        if (free_boundary[j]) {
            below = next_marked++;
            vertices.push_back(below);
            edges.push_back({below, j + 1, 1});
            rep.marked.insert(below);
        }
        if (parent[j] < 0) {
            edges.push_back({0, below, std::nullopt});
            continue;
        }
        int i = parent[j];
        // Side of the co-oriented parent occupied by the centre of mass near the attachment.
        double moment = 0;
        const auto& P = arr.sheets[j].points;
        const auto& Q = arr.sheets[i].points;
        for (int k = 0; k < static_cast<int>(P.size()); ++k) {
            bool near = false;
            for (const auto& bp : boundary[j])
                if (std::find(bp.support.begin(), bp.support.end(), i) != bp.support.end() &&
                    (P[bp.index].p - P[k].p).norm() <= 6 * h) {
                    near = true;
                    break;
                }
            if (!near) continue;
            int w = index.nearest(i, P[k].p, 3 * h);
            if (w < 0) continue;
            moment += (P[k].p - Q[w].p).dot(Q[w].normal);
        }
        if (std::abs(moment) < 1e-9) {
            rep.reason = "undetermined sign for sheet '" + arr.sheets[j].name + "'";
            return rep;
        }
        int sign = moment > 0 ? 1 : -1;
        edges.push_back({i + 1, below, sign});
    }
    rep.tree = SignedRootedTree(vertices, 0, edges);
    rep.verdict = any_free ? Verdict::generalized : Verdict::arboreal;
    return rep;
}

/// Union of two hypersurfaces with the second translated by `offset`.
inline GermReport check_generic_union(const ArborealHypersurface& h1, const ArborealHypersurface& h2, const Vec& offset,
                                      double spacing, const ClassifierOptions& opt = {}) {
    if (h1.dim() != h2.dim() || offset.size() != h1.dim()) throw validation_error("dimension mismatch in union");
    if (offset.norm() > 0.2) throw validation_error("union offset must satisfy |offset| <= 0.2");
    Arrangement arr = arrangement_from(h1, spacing);
    Arrangement second = arrangement_from(h2, spacing);
    for (auto& s : second.sheets) {
        std::vector<SamplePoint> kept;
        for (auto& p : s.points) {
            p.p += offset;
            if (arr.box.contains(p.p)) kept.push_back(p);
        }
        s.points = std::move(kept);
        s.name += "'";
        arr.sheets.push_back(std::move(s));
    }
    return check_arboreal(arr, opt);
}

/// Single hyperplane {x_c = 0} in R^dim as a one-stratum hypersurface.
inline ArborealHypersurface hyperplane(int dim, int coordinate) {
    if (coordinate < 0 || coordinate >= dim) throw validation_error("hyperplane coordinate out of range");
    Stratum s;
    s.owner = coordinate;
    s.chain.vertices = {coordinate};
    s.equality_coordinate = coordinate;
    s.chain_coordinates = {coordinate};
    s.validity_box = Box::cube(dim, kDefaultBoxHalf);
    return ArborealHypersurface(dim, {s}, SignedForest{}, HypersurfaceMode::pl, std::nullopt);
}

/**
 * Four sheets through the line {x0 = 0, x1 = 1} in R^3: the plane x0 = 0 with
 * a sheet resting on it, and the plane x1 = 1 with a sheet resting on that.
 * Each pair is arboreal on its own; together their corners coincide.
 */
inline Arrangement product_fixture(const SmoothingProfile& profile, double spacing) {
    Arrangement arr;
    arr.dim = 3;
    arr.spacing = spacing;
    arr.box = Box::cube(3, kDefaultBoxHalf);
    const double L = profile.turn_length();
    auto plane = [](int c, double off) {
        return [c, off](const Vec& x) {
            GEval e;
            e.value = x[c] - off;
            e.gradient = Vec::Unit(3, c);
            return e;
        };
    };
    ImplicitEval upper_a = [&profile, L](const Vec& x) {
        auto f = profile.eval(x[0], x[1]);
        GEval e;
        e.value = f.value;
        e.gradient = Vec::Zero(3);
        e.gradient[0] = f.da;
        e.gradient[1] = f.db;
        e.valid = f.foot <= L;
        return e;
    };
    ImplicitEval upper_b = [&profile, L](const Vec& x) {
        auto f = profile.eval(x[1] - 1, 1 - x[0]);
        GEval e;
        e.value = f.value;
        e.gradient = Vec::Zero(3);
        e.gradient[1] = f.da;
        e.gradient[0] = -f.db;
        e.valid = f.foot <= L;
        return e;
    };
    std::vector<std::pair<std::string, ImplicitEval>> sheets = {
        {"P0", plane(0, 0.0)}, {"S0", upper_a}, {"P1", plane(1, 1.0)}, {"S1", upper_b}};
    for (int i = 0; i < 4; ++i)
        arr.sheets.push_back({sample_implicit(sheets[i].second, arr.box, spacing, i), sheets[i].first});
    return arr;
}

}  // namespace arbor
