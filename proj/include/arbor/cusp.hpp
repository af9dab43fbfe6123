#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "numeric.hpp"

namespace arbor::cusp {

using num::Mat;
using num::Vec;

// ---------------------------------------------------------------------------
// Front maps and Thom-Boardman strata
// ---------------------------------------------------------------------------

/// Map from a d-dimensional box into R^{d+1}; the Jacobian falls back to central differences.
struct FrontMap {
    int dim = 0;
    std::function<Vec(const Vec&)> eval;
    std::function<Mat(const Vec&)> jac;
    Vec lo, hi;
    std::string name;

    Mat jacobian(const Vec& x) const {
        if (jac) return jac(x);
        return num::fd_jacobian(eval, x, 1e-6);
    }
};

/// (q, u) -> (q, u^2, u^3).
inline FrontMap cusp_front(int dim = 2, double half = 1.0) {
    if (dim < 1) throw validation_error("front domain dimension must be positive");
    FrontMap fm;
    fm.dim = dim;
    fm.name = "cusp";
    fm.lo = Vec::Constant(dim, -half);
    fm.hi = Vec::Constant(dim, half);
    fm.eval = [dim](const Vec& x) {
        Vec y(dim + 1);
        y.head(dim - 1) = x.head(dim - 1);
        double u = x[dim - 1];
        y[dim - 1] = u * u;
        y[dim] = u * u * u;
        return y;
    };
    fm.jac = [dim](const Vec& x) {
        Mat J = Mat::Zero(dim + 1, dim);
        J.topLeftCorner(dim - 1, dim - 1).setIdentity();
        double u = x[dim - 1];
        J(dim - 1, dim - 1) = 2 * u;
        J(dim, dim - 1) = 3 * u * u;
        return J;
    };
    return fm;
}

/// (q, u) -> (q, u^2, 0).
inline FrontMap fold_front(int dim = 2, double half = 1.0) {
    FrontMap fm = cusp_front(dim, half);
    fm.name = "fold";
    fm.eval = [dim](const Vec& x) {
        Vec y = Vec::Zero(dim + 1);
        y.head(dim - 1) = x.head(dim - 1);
        y[dim - 1] = x[dim - 1] * x[dim - 1];
        return y;
    };
    fm.jac = [dim](const Vec& x) {
        Mat J = Mat::Zero(dim + 1, dim);
        J.topLeftCorner(dim - 1, dim - 1).setIdentity();
        J(dim - 1, dim - 1) = 2 * x[dim - 1];
        return J;
    };
    return fm;
}

/// (q, u) -> (q, u, 0).
inline FrontMap immersion_front(int dim = 2, double half = 1.0) {
    FrontMap fm = cusp_front(dim, half);
    fm.name = "immersion";
    fm.eval = [dim](const Vec& x) {
        Vec y = Vec::Zero(dim + 1);
        y.head(dim) = x;
        return y;
    };
    fm.jac = [dim](const Vec&) {
        Mat J = Mat::Zero(dim + 1, dim);
        J.topRows(dim).setIdentity();
        return J;
    };
    return fm;
}

/// Swallowtail front (a, u) -> (a, -4u^3 - 2au, 3u^4 + au^2); its cuspidal edge is a = -6u^2.
inline FrontMap swallowtail_front(double half = 1.0) {
    FrontMap fm;
    fm.dim = 2;
    fm.name = "swallowtail";
    fm.lo = Vec::Constant(2, -half);
    fm.hi = Vec::Constant(2, half);
    fm.eval = [](const Vec& x) {
        double a = x[0], u = x[1];
        Vec y(3);
        y << a, -4 * u * u * u - 2 * a * u, 3 * u * u * u * u + a * u * u;
        return y;
    };
    fm.jac = [](const Vec& x) {
        double a = x[0], u = x[1];
        Mat J(3, 2);
        J << 1, 0, -2 * u, -12 * u * u - 2 * a, u * u, 12 * u * u * u + 2 * a * u;
        return J;
    };
    return fm;
}

enum class ChartVerdict { sigma10, not_sigma10, inconclusive };

inline std::string to_string(ChartVerdict v) {
    switch (v) {
        case ChartVerdict::sigma10: return "sigma10";
        case ChartVerdict::not_sigma10: return "not_sigma10";
        default: return "inconclusive";
    }
}

struct ChartReport {
    ChartVerdict verdict = ChartVerdict::inconclusive;
    Vec kernel;         // unit kernel direction of df
    Vec second, third;  // normal parts of d^2f(k,k) and d^3f(k,k,k)
    double jet_sigma_min = 0, jet_sigma_max = 0;
    std::string reason;
};

struct ChartOptions {
    double rank_tol = 1e-6;
    double jet_tol = 1e-3;
    double step = 1e-3;
};

/// Front-sense normal-form test at a corank-one point: the normal parts of the second and
/// third kernel derivatives must span the cokernel, as for (u^2, u^3).
inline ChartReport cusp_chart_check(const FrontMap& fm, const Vec& p, ChartOptions opt = {}) {
    if (p.size() != fm.dim) throw validation_error("point dimension does not match front domain");
    Mat J = fm.jacobian(p);
    Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    int rank = num::gapped_rank(svd.singularValues(), opt.rank_tol);
    ChartReport rep;
    if (rank == fm.dim) throw validation_error("point is not on the corank-one locus");
    if (rank < 0) {
        rep.reason = "no spectral gap in df";
        return rep;
    }
    if (rank != fm.dim - 1) {
        rep.verdict = ChartVerdict::not_sigma10;
        rep.reason = "corank exceeds one";
        return rep;
    }
    Vec k = svd.matrixV().col(fm.dim - 1);
    // Cokernel: left singular vectors beyond the rank.
    Mat N = svd.matrixU().rightCols(fm.dim + 1 - rank);
    double h = opt.step;
    auto f = [&](double t) { return fm.eval(p + t * k); };
    Vec fp = f(h), fm1 = f(-h), f0 = f(0), fp2 = f(2 * h), fm2 = f(-2 * h);
    Vec d2 = (fp - 2 * f0 + fm1) / (h * h);
    Vec d3 = (fp2 - 2 * fp + 2 * fm1 - fm2) / (2 * h * h * h);
    rep.kernel = k;
    rep.second = N.transpose() * d2;
    rep.third = N.transpose() * d3;
    Mat A(N.cols(), 2);
    A.col(0) = rep.second;
    A.col(1) = rep.third;
    Eigen::JacobiSVD<Mat> js(A);
    rep.jet_sigma_max = js.singularValues()[0];
    rep.jet_sigma_min = js.singularValues()[1];
    int jr = num::gapped_rank(js.singularValues(), opt.jet_tol);
    if (jr == 2) {
        rep.verdict = ChartVerdict::sigma10;
    } else if (jr < 0) {
        rep.reason = "jet rank has no spectral gap";
    } else {
        rep.verdict = ChartVerdict::not_sigma10;
        rep.reason = rep.second.norm() < opt.jet_tol ? "kernel tangent to the singular locus" : "degenerate third jet";
    }
    return rep;
}

struct TBSample {
    Vec x;
    Vec singular_values;
    int corank = 0;
    bool inconclusive = false;
};

struct TBStratification {
    double spacing = 0;
    double tol = 0;
    std::vector<TBSample> samples;
    std::vector<int> sigma1;                    // indices with corank exactly one
    std::vector<int> sigma2plus;                // corank >= 2
    std::vector<ChartVerdict> sigma1_type;      // per entry of sigma1
    std::vector<int> sigma1_restriction_rank;   // rank of df on the estimated tangent of sigma1
    int sigma1_dim = -1;
    int sigma1_codim = -1;
    int inconclusive = 0;
    int sigma10_count = 0;
    int sigma11_count = 0;

    /// Every conclusive corank-one sample is of cusp type.
    bool all_sigma10() const { return !sigma1.empty() && sigma10_count == static_cast<int>(sigma1.size()); }
    /// Largest distance of a corank-one sample from the hyperplane {x_i = c}.
    double max_offset(int coord, double c = 0) const {
        double w = 0;
        for (int i : sigma1) w = std::max(w, std::abs(samples[i].x[coord] - c));
        return w;
    }
};

namespace detail {

// Dimension of a point cloud from a gapped spectrum of its centered covariance.
inline int cloud_dim(const std::vector<Vec>& pts, double floor) {
    if (pts.size() < 2) return 0;
    int d = static_cast<int>(pts[0].size());
    Vec c = Vec::Zero(d);
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    Mat C = Mat::Zero(d, d);
    for (const auto& p : pts) C += (p - c) * (p - c).transpose();
    C /= static_cast<double>(pts.size());
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    Vec sd = es.eigenvalues().reverse().cwiseMax(0).cwiseSqrt();
    int r = num::gapped_rank(sd, floor, 3.0);
    return r < 0 ? static_cast<int>((sd.array() >= floor).count()) : r;
}

inline Mat principal_frame(const std::vector<Vec>& pts, int k) {
    int d = static_cast<int>(pts[0].size());
    Vec c = Vec::Zero(d);
    for (const auto& p : pts) c += p;
    c /= static_cast<double>(pts.size());
    Mat C = Mat::Zero(d, d);
    for (const auto& p : pts) C += (p - c) * (p - c).transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    return es.eigenvectors().rightCols(k);
}

}  // namespace detail

/// Grid Thom-Boardman stratification. tol <= 0 selects tol = spacing.
inline TBStratification tb_stratify(const FrontMap& fm, double spacing, double tol = 0, ChartOptions chart = {}) {
    if (!(spacing > 0)) throw validation_error("grid spacing must be positive");
    if (fm.lo.size() != fm.dim || fm.hi.size() != fm.dim) throw validation_error("front map box has wrong dimension");
    if (tol <= 0) tol = spacing;
    TBStratification out;
    out.spacing = spacing;
    out.tol = tol;
    std::vector<int> n(fm.dim);
    long total = 1;
    for (int i = 0; i < fm.dim; ++i) {
        n[i] = static_cast<int>(std::floor((fm.hi[i] - fm.lo[i]) / spacing + 1e-9)) + 1;
        total *= n[i];
    }
    if (total > 4'000'000) throw capacity_error("stratification grid too large");
    std::vector<int> idx(fm.dim, 0);
    for (long c = 0; c < total; ++c) {
        long r = c;
        Vec x(fm.dim);
        for (int i = fm.dim - 1; i >= 0; --i) {
            idx[i] = static_cast<int>(r % n[i]);
            r /= n[i];
            x[i] = fm.lo[i] + idx[i] * spacing;
        }
        TBSample s;
        s.x = x;
        Eigen::JacobiSVD<Mat> svd(fm.jacobian(x));
        s.singular_values = svd.singularValues();
        int rank = num::gapped_rank(s.singular_values, tol);
        if (rank < 0) {
            s.inconclusive = true;
            ++out.inconclusive;
            s.corank = -1;
        } else {
            s.corank = fm.dim - rank;
        }
        int id = static_cast<int>(out.samples.size());
        if (s.corank == 1) out.sigma1.push_back(id);
        if (s.corank >= 2) out.sigma2plus.push_back(id);
        out.samples.push_back(std::move(s));
    }
    if (out.sigma1.empty()) return out;

    std::vector<Vec> locus;
    for (int i : out.sigma1) locus.push_back(out.samples[i].x);
    num::SpatialHash hash(spacing, fm.dim);
    for (int i = 0; i < static_cast<int>(locus.size()); ++i) hash.insert(locus[i], i);
    // Most frequent local dimension over neighborhoods of radius 2.5 spacing.
    std::vector<int> votes(fm.dim + 1, 0);
    for (const auto& x : locus) {
        std::vector<Vec> nb;
        hash.visit(x, 2.5 * spacing, [&](int j) { nb.push_back(locus[j]); });
        ++votes[detail::cloud_dim(nb, 0.25 * spacing)];
    }
    out.sigma1_dim = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    out.sigma1_codim = fm.dim - out.sigma1_dim;

    for (int li = 0; li < static_cast<int>(locus.size()); ++li) {
        const Vec& x = locus[li];
        std::vector<Vec> nb;
        hash.visit(x, 2.5 * spacing, [&](int j) { nb.push_back(locus[j]); });
        int rr = 0;
        if (out.sigma1_dim > 0 && static_cast<int>(nb.size()) > out.sigma1_dim) {
            Mat T = detail::principal_frame(nb, out.sigma1_dim);
            Eigen::JacobiSVD<Mat> rs(fm.jacobian(x) * T);
            rr = num::gapped_rank(rs.singularValues(), chart.jet_tol);
        }
        out.sigma1_restriction_rank.push_back(rr);
        ChartOptions local = chart;
        local.rank_tol = tol;
        ChartReport cr;
        try {
            cr = cusp_chart_check(fm, x, local);
        } catch (const validation_error&) {
            cr.verdict = ChartVerdict::inconclusive;
        }
        ChartVerdict v = cr.verdict;
        if (v == ChartVerdict::sigma10 && rr != out.sigma1_dim) v = ChartVerdict::not_sigma10;
        out.sigma1_type.push_back(v);
        if (v == ChartVerdict::sigma10) ++out.sigma10_count;
        if (v == ChartVerdict::not_sigma10) ++out.sigma11_count;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Resolution of the cusp in local coordinates (q, u, v, s, r, p)
// ---------------------------------------------------------------------------

/// Smoothed broken parabola: linear through the thickened region, u^2 beyond u = +-2 eps.
class HProfile {
public:
    HProfile(double eps, int sign, double width) : eps_(eps), sign_(sign), w_(width) {
        if (!(eps > 0)) throw validation_error("epsilon must be positive");
        if (sign != 1 && sign != -1) throw validation_error("sheet sign must be +1 or -1");
        if (!(width > 0 && width <= eps / 4)) throw validation_error("smoothing width must lie in (0, eps/4]");
        double b = sign * 2 * eps;
        lo_ = b - w_ / 2;
        hi_ = b + w_ / 2;
        blend_ = num::QuinticSegment(lo_, hi_, raw(lo_), raw(hi_));
    }

    double epsilon() const { return eps_; }
    int sign() const { return sign_; }
    double width() const { return w_; }
    double window_lo() const { return lo_; }
    double window_hi() const { return hi_; }

    /// Piecewise formula without smoothing.
    num::Jet raw(double u) const {
        bool linear = sign_ > 0 ? u <= 2 * eps_ : u >= -2 * eps_;
        if (linear) return {sign_ * 4 * eps_ * u - 4 * eps_ * eps_, sign_ * 4 * eps_, 0};
        return {u * u, 2 * u, 2};
    }

    num::Jet eval(double u) const {
        if (u > lo_ && u < hi_) return blend_.eval(u);
        return raw(u);
    }

    double operator()(double u) const { return eval(u).v; }

private:
    double eps_;
    int sign_;
    double w_;
    double lo_ = 0, hi_ = 0;
    num::QuinticSegment blend_;
};

/// Default smoothing window is eps/8.
inline HProfile make_h(double eps, int sign, double width = 0) {
    return HProfile(eps, sign, width > 0 ? width : eps / 8);
}

/// All roots of h(u) = eps*u on [lo, hi] by sign scan, bisection and a Newton polish.
inline std::vector<double> diagonal_roots(const HProfile& h, double lo, double hi, int scan = 2000) {
    double eps = h.epsilon();
    auto g = [&](double u) { return h(u) - eps * u; };
    std::vector<double> roots;
    double a = lo, ga = g(a);
    for (int i = 1; i <= scan; ++i) {
        double b = lo + (hi - lo) * i / scan, gb = g(b);
        if (ga == 0) roots.push_back(a);
        else if (ga * gb < 0) {
            double x0 = a, x1 = b, g0 = ga;
            for (int it = 0; it < 200 && x1 - x0 > 1e-16 * std::max(1.0, std::abs(x0)); ++it) {
                double m = 0.5 * (x0 + x1), gm = g(m);
                if ((gm < 0) == (g0 < 0)) {
                    x0 = m;
                    g0 = gm;
                } else {
                    x1 = m;
                }
            }
            double x = 0.5 * (x0 + x1);
            for (int it = 0; it < 3; ++it) {
                double d = h.eval(x).d1 - eps;
                if (d == 0) break;
                double nx = x - g(x) / d;
                if (nx < a || nx > b) break;
                x = nx;
            }
            roots.push_back(x);
        }
        a = b;
        ga = gb;
    }
    return roots;
}

struct Intersections {
    double u_plus = 0, v_plus = 0;
    double u_minus = 0, v_minus = 0;
};

/// Meeting points of the sheets v = h_+-(u) with the thickened stratum v = eps*u.
inline Intersections cusp_intersections(double eps, double width = 0) {
    HProfile hp = make_h(eps, +1, width), hm = make_h(eps, -1, width);
    auto rp = diagonal_roots(hp, -3 * eps, 3 * eps);
    auto rm = diagonal_roots(hm, -3 * eps, 3 * eps);
    if (rp.size() != 1 || rm.size() != 1) throw numeric_error("expected a single crossing per sheet");
    return {rp[0], hp(rp[0]), rm[0], hm(rm[0])};
}

struct ResolutionBox {
    double q_half = 1.0;
    double u_lo = -0.8, u_hi = 0.8;
};

struct StratumSamples {
    std::string name;
    std::vector<Vec> points;
    std::vector<Mat> frames;
    std::vector<double> u;  // local parameter along the (u, v) slice
};

struct CuspResolution {
    double epsilon = 0;
    int q_dim = 1;
    double width = 0;
    std::vector<StratumSamples> strata;
    Intersections meet;

    int ambient_dim() const { return 2 * q_dim + 4; }
};

/// Coordinate layout: q (m), u, v, s, r, p (m).
struct Layout {
    int m = 1;
    int u() const { return m; }
    int v() const { return m + 1; }
    int s() const { return m + 2; }
    int r() const { return m + 3; }
    int p(int i) const { return m + 4 + i; }
    int dim() const { return 2 * m + 4; }
};

namespace detail {

inline void add_curve_sample(StratumSamples& st, const Layout& L, const Vec& q, double u, double v, double dv,
                             double ds = 0, double s = 0) {
    Vec x = Vec::Zero(L.dim());
    x.head(L.m) = q;
    x[L.u()] = u;
    x[L.v()] = v;
    x[L.s()] = s;
    Mat F = Mat::Zero(L.dim(), L.m + 1);
    for (int i = 0; i < L.m; ++i) F(i, i) = 1;
    F(L.u(), L.m) = 1;
    F(L.v(), L.m) = dv;
    F(L.s(), L.m) = ds;
    st.points.push_back(x);
    st.frames.push_back(F);
    st.u.push_back(u);
}

}  // namespace detail

/// Samples of the thickened stratum {v = eps u, |u| <= 2eps} and the sheets {v = h_+-(u)},
/// all with p = 0, r = s = 0. Points are split evenly across the three strata.
inline CuspResolution resolve_sigma10(double eps, ResolutionBox box = {}, int q_dim = 1, int count = 10000,
                                      std::uint64_t seed = 1, double width = 0) {
    if (!(eps > 0 && eps <= 0.2)) throw validation_error("epsilon must lie in (0, 0.2]");
    if (!(box.u_lo <= -3 * eps && box.u_hi >= 3 * eps)) throw validation_error("box must contain [-3eps, 3eps] in u");
    if (q_dim < 0) throw validation_error("q dimension must be non-negative");
    if (count < 3) throw validation_error("sample count too small");
    CuspResolution res;
    res.epsilon = eps;
    res.q_dim = q_dim;
    res.width = width > 0 ? width : eps / 8;
    res.meet = cusp_intersections(eps, res.width);
    HProfile hp = make_h(eps, +1, res.width), hm = make_h(eps, -1, res.width);
    Layout L{q_dim};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uq(-box.q_half, box.q_half);
    auto qdraw = [&] {
        Vec q(q_dim);
        for (int i = 0; i < q_dim; ++i) q[i] = uq(rng);
        return q;
    };
    int per = count / 3, extra = count - 3 * per;
    StratumSamples diag, plus, minus;
    diag.name = "thickened";
    plus.name = "sheet+";
    minus.name = "sheet-";
    auto lattice = [](double a, double b, int i, int n) { return n <= 1 ? a : a + (b - a) * i / (n - 1); };
    for (int i = 0; i < per + extra; ++i) {
        double u = lattice(-2 * eps, 2 * eps, i, per + extra);
        detail::add_curve_sample(diag, L, qdraw(), u, eps * u, eps);
    }
    for (int i = 0; i < per; ++i) {
        double u = lattice(res.meet.u_plus, box.u_hi, i, per);
        auto j = hp.eval(u);
        detail::add_curve_sample(plus, L, qdraw(), u, j.v, j.d1);
    }
    for (int i = 0; i < per; ++i) {
        double u = lattice(box.u_lo, res.meet.u_minus, i, per);
        auto j = hm.eval(u);
        detail::add_curve_sample(minus, L, qdraw(), u, j.v, j.d1);
    }
    res.strata = {std::move(diag), std::move(plus), std::move(minus)};
    return res;
}

/// Unresolved cusp Lagrangian {(q, u=t, v=t^2, s=t^3, r=0, p=0)}; its front forgets (u, p).
/// The sample at t = 0 is always included.
inline StratumSamples unresolved_cusp(int q_dim = 1, double t_half = 0.5, int count = 1001, std::uint64_t seed = 1,
                                      double q_half = 1.0) {
    if (count < 1) throw validation_error("sample count must be positive");
    Layout L{q_dim};
    StratumSamples st;
    st.name = "cusp";
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uq(-q_half, q_half);
    int half = count / 2;
    for (int i = 0; i < count; ++i) {
        double t = half == 0 ? 0 : t_half * (i - half) / static_cast<double>(half);
        if (i == half) t = 0;
        Vec q(q_dim);
        for (int k = 0; k < q_dim; ++k) q[k] = uq(rng);
        detail::add_curve_sample(st, L, q, t, t * t, 2 * t, 3 * t * t, t * t * t);
    }
    return st;
}

/// Leaves of the transverse Lagrangian foliation: tangent span of (d_u, d_p).
struct FoliationLocal {
    int q_dim = 1;

    Mat frame(const Vec&) const {
        Layout L{q_dim};
        Mat F = Mat::Zero(L.dim(), q_dim + 1);
        F(L.u(), 0) = 1;
        for (int i = 0; i < q_dim; ++i) F(L.p(i), i + 1) = 1;
        return F;
    }

    /// Symplectic pairing u<->v, q<->p, s<->r.
    double omega(const Vec& a, const Vec& b) const {
        Layout L{q_dim};
        double w = a[L.u()] * b[L.v()] - a[L.v()] * b[L.u()] + a[L.s()] * b[L.r()] - a[L.r()] * b[L.s()];
        for (int i = 0; i < q_dim; ++i) w += a[i] * b[L.p(i)] - a[L.p(i)] * b[i];
        return w;
    }
};

struct TangencyAudit {
    int samples = 0;
    int flagged = 0;             // frames that failed the rank check
    int max_dim = 0;             // largest intersection dimension with a leaf
    double min_angle = std::numeric_limits<double>::infinity();  // smallest angle above tol
    std::vector<std::pair<int, int>> tangential;  // (stratum, sample) with positive intersection
    std::vector<int> stratum_max_dim;
};

inline TangencyAudit tangency_audit(const std::vector<StratumSamples>& strata, const FoliationLocal& fol,
                                    double tol = 1e-6) {
    TangencyAudit out;
    for (int si = 0; si < static_cast<int>(strata.size()); ++si) {
        const auto& st = strata[si];
        int smax = 0;
        for (int i = 0; i < static_cast<int>(st.points.size()); ++i) {
            ++out.samples;
            const Mat& F = st.frames[i];
            Eigen::JacobiSVD<Mat> fs(F);
            if (F.cols() == 0 || fs.singularValues()[F.cols() - 1] < 1e-9 * fs.singularValues()[0]) {
                ++out.flagged;
                continue;
            }
            auto ang = num::principal_angles(F, fol.frame(st.points[i]));
            int d = 0;
            for (double a : ang) {
                if (a < tol) ++d;
                else out.min_angle = std::min(out.min_angle, a);
            }
            if (d > 0) out.tangential.push_back({si, i});
            smax = std::max(smax, d);
        }
        out.stratum_max_dim.push_back(smax);
        out.max_dim = std::max(out.max_dim, smax);
    }
    return out;
}

struct Closeness {
    double hausdorff = 0;
    double max_frame_angle = 0;  // over |u| >= 3 eps
};

/// (u, v) slice comparison of the resolved union against the parabola v = u^2 on |u| <= u_half.
inline Closeness c1_closeness(double eps, double u_half = 1.0, int count = 4001) {
    if (!(u_half > 3 * eps)) throw validation_error("slice must extend past |u| = 3eps");
    HProfile hp = make_h(eps, +1), hm = make_h(eps, -1);
    auto meet = cusp_intersections(eps);
    struct P {
        Vec x;
        double slope;
    };
    std::vector<P> res, orig;
    auto pt = [](double u, double v) {
        Vec x(2);
        x << u, v;
        return x;
    };
    for (int i = 0; i < count; ++i) {
        double t = static_cast<double>(i) / (count - 1);
        double u = -2 * eps + 4 * eps * t;
        res.push_back({pt(u, eps * u), eps});
        u = meet.u_plus + (u_half - meet.u_plus) * t;
        res.push_back({pt(u, hp(u)), hp.eval(u).d1});
        u = -u_half + (meet.u_minus + u_half) * t;
        res.push_back({pt(u, hm(u)), hm.eval(u).d1});
        u = -u_half + 2 * u_half * t;
        orig.push_back({pt(u, u * u), 2 * u});
    }
    std::vector<Vec> a, b;
    for (auto& p : res) a.push_back(p.x);
    for (auto& p : orig) b.push_back(p.x);
    Closeness c;
    c.hausdorff = num::hausdorff(a, b, 0.02);
    for (const auto& o : orig) {
        double u = o.x[0];
        if (std::abs(u) < 3 * eps) continue;
        double slope = u > 0 ? hp.eval(u).d1 : hm.eval(u).d1;
        c.max_frame_angle = std::max(c.max_frame_angle, std::abs(std::atan(slope) - std::atan(o.slope)));
    }
    return c;
}

}  // namespace arbor::cusp
