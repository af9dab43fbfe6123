#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"
#include "profile.hpp"
#include "trees.hpp"

namespace arbor {

using num::Mat;
using num::Vec;

struct GEval {
    double value = 0;
    Vec gradient;
    bool valid = true;  // inside the stratum's validity region
};

struct PLConstraint {
    int coordinate;
    int sign;  // sign * x[coordinate] >= 0
};

struct Box {
    Vec lo, hi;

    static Box cube(int dim, double half) {
        return {Vec::Constant(dim, -half), Vec::Constant(dim, half)};
    }
    bool contains(const Vec& p, double slack = 0) const {
        for (int i = 0; i < p.size(); ++i)
            if (p[i] < lo[i] - slack || p[i] > hi[i] + slack) return false;
        return true;
    }
    int dim() const { return static_cast<int>(lo.size()); }
};

inline constexpr double kMembershipTol = 1e-6;
inline constexpr double kNewtonTol = 1e-8;
inline constexpr int kNewtonSteps = 50;
inline constexpr double kDefaultBoxHalf = 3.0;

struct Stratum {
    int owner = 0;
    VertexChain chain;
    int equality_coordinate = 0;
    std::vector<PLConstraint> pl_constraints;
    std::vector<int> chain_coordinates;  // coordinate of each chain vertex
    Box validity_box;
};

enum class HypersurfaceMode { pl, smoothed };

/**
 * Arboreal hypersurface in R^{dim}: one stratum per non-suppressed vertex.
 * Smoothed strata are the zero sets of G^alpha, co-oriented by its gradient.
 */
class ArborealHypersurface {
public:
    ArborealHypersurface(int dim, std::vector<Stratum> strata, SignedForest forest, HypersurfaceMode mode,
                         std::optional<SmoothingProfile> profile)
        : dim_(dim), strata_(std::move(strata)), forest_(std::move(forest)), mode_(mode),
          profile_(std::move(profile)) {}

    int dim() const { return dim_; }
    const std::vector<Stratum>& strata() const { return strata_; }
    const SignedForest& forest() const { return forest_; }
    HypersurfaceMode mode() const { return mode_; }
    const SmoothingProfile* profile() const { return profile_ ? &*profile_ : nullptr; }

    GEval eval(int stratum, const Vec& x) const {
        const Stratum& s = strata_.at(stratum);
        GEval out;
        if (mode_ == HypersurfaceMode::pl || s.chain.vertices.size() == 1) {
            out.value = x[s.equality_coordinate];
            out.gradient = Vec::Unit(dim_, s.equality_coordinate);
            if (mode_ == HypersurfaceMode::pl)
                for (auto c : s.pl_constraints)
                    if (c.sign * x[c.coordinate] < 0) out.valid = false;
            return out;
        }
        return eval_chain(s, x);
    }

private:
    GEval eval_chain(const Stratum& s, const Vec& x) const {
        const auto& cc = s.chain_coordinates;
        const auto& sg = s.chain.signs;
        const double L = profile_->turn_length();
        int k = static_cast<int>(cc.size()) - 1;
        GEval out;
        double sk = sg[k - 1];
        auto e = profile_->eval(sk * x[cc[k - 1]], sk * x[cc[k]]);
        double g = sk * e.value;
        Vec grad = Vec::Zero(dim_);
        grad[cc[k - 1]] = e.da;
        grad[cc[k]] = e.db;
        bool valid = e.foot <= L;
        for (int j = k - 1; j >= 1; --j) {
            double sj = sg[j - 1];
            auto ej = profile_->eval(sj * x[cc[j - 1]], sj * g);
            g = sj * ej.value;
            grad *= ej.db;
            grad[cc[j - 1]] += ej.da;
            valid = valid && ej.foot <= L;
        }
        out.value = g;
        out.gradient = grad;
        out.valid = valid;
        return out;
    }

    int dim_;
    std::vector<Stratum> strata_;
    SignedForest forest_;
    HypersurfaceMode mode_;
    std::optional<SmoothingProfile> profile_;
};

namespace detail {

inline Stratum make_stratum(const SignedForest& f, int v, double box_half) {
    Stratum s;
    s.owner = v;
    s.chain = chain_to_root(f, v);
    s.equality_coordinate = f.coordinate(v);
    for (int u : s.chain.vertices) s.chain_coordinates.push_back(f.coordinate(u));
    for (std::size_t j = 0; j + 1 < s.chain.vertices.size(); ++j)
        s.pl_constraints.push_back({f.coordinate(s.chain.vertices[j]), s.chain.signs[j]});
    int dim = static_cast<int>(f.size());
    s.validity_box = Box::cube(dim, box_half);
    return s;
}

}  // namespace detail

inline ArborealHypersurface build_pl_strata(const SignedForest& forest, double box_half = kDefaultBoxHalf) {
    forest.validate();
    std::vector<Stratum> strata;
    for (int v : forest.vertices()) strata.push_back(detail::make_stratum(forest, v, box_half));
    return ArborealHypersurface(static_cast<int>(forest.size()), std::move(strata), forest, HypersurfaceMode::pl,
                                std::nullopt);
}

inline ArborealHypersurface build_smoothed(const SignedForest& forest, const SmoothingProfile& profile,
                                           double box_half = kDefaultBoxHalf) {
    forest.validate();
    std::vector<Stratum> strata;
    for (int v : forest.vertices()) strata.push_back(detail::make_stratum(forest, v, box_half));
    return ArborealHypersurface(static_cast<int>(forest.size()), std::move(strata), forest,
                                HypersurfaceMode::smoothed, profile);
}

/// Generalized variant: built on F+ with the marked leaves' own strata omitted.
inline ArborealHypersurface build_smoothed(const LeafyForest& leafy, const SmoothingProfile& profile,
                                           double box_half = kDefaultBoxHalf) {
    SignedForest plus = leafy_extend(leafy);
    std::vector<Stratum> strata;
    for (int v : plus.vertices())
        if (!leafy.marked.count(v)) strata.push_back(detail::make_stratum(plus, v, box_half));
    return ArborealHypersurface(static_cast<int>(plus.size()), std::move(strata), plus, HypersurfaceMode::smoothed,
                                profile);
}

/// G^alpha and its gradient at a point of R^{|forest|}.
inline GEval eval_g(const SignedForest& forest, int alpha, const SmoothingProfile& profile, const Vec& point) {
    if (static_cast<std::size_t>(point.size()) != forest.size())
        throw validation_error("point dimension does not match forest size");
    SignedForest single = forest;
    ArborealHypersurface h(static_cast<int>(forest.size()), {detail::make_stratum(forest, alpha, kDefaultBoxHalf)},
                           std::move(single), HypersurfaceMode::smoothed, profile);
    return h.eval(0, point);
}

struct Membership {
    int stratum;
    double value;
};

inline std::vector<Membership> membership(const ArborealHypersurface& h, const Vec& p, double tol = kMembershipTol) {
    if (!(tol > 0)) throw validation_error("membership tolerance must be positive");
    std::vector<Membership> out;
    for (int i = 0; i < static_cast<int>(h.strata().size()); ++i) {
        if (!h.strata()[i].validity_box.contains(p)) continue;
        auto e = h.eval(i, p);
        if (e.valid && std::abs(e.value) <= tol) out.push_back({i, e.value});
    }
    return out;
}

inline Vec conormal_direction(const ArborealHypersurface& h, int stratum, const Vec& p) {
    auto e = h.eval(stratum, p);
    double n = e.gradient.norm();
    if (n < 1e-12) throw numeric_error("degenerate normal: gradient below numeric floor");
    return e.gradient / n;
}

struct SamplePoint {
    Vec p;
    int stratum = -1;
    Mat frame;   // columns: orthonormal tangent basis
    Vec normal;  // unit co-orientation
};

/// Orthonormal basis of the kernel of a covector.
inline Mat tangent_frame(const Vec& normal) {
    Mat n = normal.normalized();
    return num::orth_complement(n, static_cast<int>(normal.size()));
}

using ImplicitEval = std::function<GEval(const Vec&)>;

/**
 * Grid seeds within half a cell diagonal of the sheet, Newton-projected
 * along the gradient and thinned so no two points are closer than 0.3 spacing.
 */
inline std::vector<SamplePoint> sample_implicit(const ImplicitEval& g, const Box& box, double spacing, int label) {
    if (!(spacing > 0)) throw validation_error("spacing must be positive");
    int dim = box.dim();
    std::vector<int> counts(dim);
    for (int i = 0; i < dim; ++i)
        counts[i] = static_cast<int>(std::floor((box.hi[i] - box.lo[i]) / spacing + 1e-9)) + 1;
    std::vector<SamplePoint> out;
    num::SpatialHash hash(spacing, dim);
    std::vector<int> idx(dim, 0);
    Vec x(dim);
    for (bool done = dim == 0; !done;) {
        for (int i = 0; i < dim; ++i) x[i] = box.lo[i] + idx[i] * spacing;
        auto e = g(x);
        double gn = e.gradient.norm();
        if (gn > 0 && std::abs(e.value) <= 0.6 * std::sqrt(double(dim)) * spacing * gn) {
            Vec y = x;
            bool ok = false;
            for (int it = 0; it < kNewtonSteps; ++it) {
                auto ey = g(y);
                if (std::abs(ey.value) <= kNewtonTol) {
                    ok = ey.valid;
                    break;
                }
                double g2 = ey.gradient.squaredNorm();
                if (g2 < 1e-24) break;
                y -= ey.value / g2 * ey.gradient;
            }
            if (ok && box.contains(y)) {
                bool crowded = false;
                hash.visit(y, 0.3 * spacing, [&](int id) {
                    if ((out[id].p - y).norm() < 0.3 * spacing) crowded = true;
                });
                if (!crowded) {
                    SamplePoint sp;
                    sp.p = y;
                    sp.stratum = label;
                    sp.normal = g(y).gradient.normalized();
                    sp.frame = tangent_frame(sp.normal);
                    hash.insert(y, static_cast<int>(out.size()));
                    out.push_back(std::move(sp));
                }
            }
        }
        int d = dim - 1;
        while (d >= 0 && ++idx[d] == counts[d]) idx[d--] = 0;
        done = d < 0;
    }
    return out;
}

inline std::vector<SamplePoint> sample_stratum(const ArborealHypersurface& h, int stratum, double spacing) {
    return sample_implicit([&](const Vec& x) { return h.eval(stratum, x); }, h.strata().at(stratum).validity_box,
                           spacing, stratum);
}

struct LagrangianModelSample {
    int base_dim = 0;
    std::vector<Vec> points;          // (q, p) in R^{2 base_dim}
    std::vector<int> labels;          // -1 zero section, otherwise stratum index
    std::vector<Vec> fiber_direction; // unit conormal for conormal points, empty otherwise
};

/**
 * Zero section over the box plus positive conormal rays of length
 * `fiber_length` above every sampled hypersurface point.
 */
inline LagrangianModelSample lagrangian_model(const ArborealHypersurface& h, double spacing,
                                              double fiber_length = 2.0, double box_half = kDefaultBoxHalf) {
    if (!(spacing > 0)) throw validation_error("spacing must be positive");
    LagrangianModelSample out;
    int n = h.dim();
    out.base_dim = n;
    int count = static_cast<int>(std::floor(2 * box_half / spacing + 1e-9)) + 1;
    std::vector<int> idx(n, 0);
    for (bool done = false; !done;) {
        Vec pt = Vec::Zero(2 * n);
        for (int i = 0; i < n; ++i) pt[i] = -box_half + idx[i] * spacing;
        out.points.push_back(pt);
        out.labels.push_back(-1);
        out.fiber_direction.emplace_back();
        int d = n - 1;
        while (d >= 0 && ++idx[d] == count) idx[d--] = 0;
        done = d < 0;
    }
    int steps = static_cast<int>(std::floor(fiber_length / spacing + 1e-9));
    for (int si = 0; si < static_cast<int>(h.strata().size()); ++si) {
        for (const auto& sp : sample_stratum(h, si, spacing)) {
            for (int k = 1; k <= steps; ++k) {
                Vec pt(2 * n);
                pt.head(n) = sp.p;
                pt.tail(n) = (k * spacing) * sp.normal;
                out.points.push_back(pt);
                out.labels.push_back(si);
                out.fiber_direction.push_back(sp.normal);
            }
        }
    }
    return out;
}

}  // namespace arbor
