#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace arbor::num {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double pi = 3.14159265358979323846;

/// C^2 step t^3(10 - 15t + 6t^2), clamped to [0,1].
inline double smootherstep(double t) {
    if (t <= 0) return 0;
    if (t >= 1) return 1;
    return t * t * t * (10 - 15 * t + 6 * t * t);
}

inline double smootherstep_d1(double t) {
    if (t <= 0 || t >= 1) return 0;
    return 30 * t * t * (1 - t) * (1 - t);
}

inline double smootherstep_d2(double t) {
    if (t <= 0 || t >= 1) return 0;
    return 60 * t * (1 - t) * (1 - 2 * t);
}

/// Step that is flat to all orders at both ends: psi(t)/(psi(t)+psi(1-t)), psi(t)=exp(-k/t).
inline double flat_step(double t, double k) {
    if (t <= 0) return 0;
    if (t >= 1) return 1;
    double a = std::exp(-k / t), b = std::exp(-k / (1 - t));
    return a / (a + b);
}

struct Jet {
    double v = 0, d1 = 0, d2 = 0;
};

/// Quintic Hermite segment matching value, slope and curvature at both ends.
class QuinticSegment {
public:
    QuinticSegment() = default;
    QuinticSegment(double x0, double x1, Jet a, Jet b) : x0_(x0), x1_(x1) {
        double h = x1 - x0;
        double c[6] = {a.v, a.d1 * h, a.d2 * h * h, b.v, b.d1 * h, b.d2 * h * h};
        // Monomial coefficients in t from the Hermite basis.
        static const double basis[6][6] = {
            {1, 0, 0, -10, 15, -6},     {0, 1, 0, -6, 8, -3},     {0, 0, 0.5, -1.5, 1.5, -0.5},
            {0, 0, 0, 10, -15, 6},      {0, 0, 0, -4, 7, -3},     {0, 0, 0, 0.5, -1, 0.5}};
        for (int k = 0; k < 6; ++k) {
            coef_[k] = 0;
            for (int i = 0; i < 6; ++i) coef_[k] += c[i] * basis[i][k];
        }
    }

    double lo() const { return x0_; }
    double hi() const { return x1_; }

    Jet eval(double x) const {
        double h = x1_ - x0_, t = (x - x0_) / h;
        double v = 0, d1 = 0, d2 = 0;
        for (int k = 5; k >= 0; --k) v = v * t + coef_[k];
        for (int k = 5; k >= 1; --k) d1 = d1 * t + k * coef_[k];
        for (int k = 5; k >= 2; --k) d2 = d2 * t + k * (k - 1) * coef_[k];
        return {v, d1 / h, d2 / (h * h)};
    }

    /// Integral of the segment from its left end to x.
    double integral_to(double x) const {
        double h = x1_ - x0_, t = (x - x0_) / h, s = 0;
        for (int k = 5; k >= 0; --k) s = s * t + coef_[k] / (k + 1);
        return s * t * h;
    }

private:
    double x0_ = 0, x1_ = 1;
    std::array<double, 6> coef_{};
};

/// Gauss-Legendre nodes/weights on [0,1], 8 points.
inline const std::array<std::pair<double, double>, 8>& gauss8() {
    static const std::array<std::pair<double, double>, 8> g = [] {
        const double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
        const double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
        std::array<std::pair<double, double>, 8> out{};
        for (int i = 0; i < 4; ++i) {
            out[2 * i] = {0.5 - 0.5 * x[i], 0.5 * w[i]};
            out[2 * i + 1] = {0.5 + 0.5 * x[i], 0.5 * w[i]};
        }
        return out;
    }();
    return g;
}

template <class F>
double integrate(F&& f, double a, double b, int panels = 1) {
    double s = 0, h = (b - a) / panels;
    for (int p = 0; p < panels; ++p)
        for (auto [x, w] : gauss8()) s += w * f(a + h * (p + x));
    return s * h;
}

/// Central-difference Jacobian of a field R^m -> R^k.
template <class F>
Mat fd_jacobian(F&& f, const Vec& x, double h = 1e-5) {
    Vec f0 = f(x);
    Mat J(f0.size(), x.size());
    Vec xp = x, xm = x;
    for (int j = 0; j < x.size(); ++j) {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        J.col(j) = (f(xp) - f(xm)) / (2 * h);
        xp[j] = xm[j] = x[j];
    }
    return J;
}

struct OdeOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
    double h0 = 1e-3;
    double h_min = 1e-12;
    double h_max = 0.25;
    int max_steps = 200000;
};

struct OdeResult {
    std::vector<double> t;
    std::vector<Vec> y;
    bool ok = true;
    bool stopped = false;  // stop predicate fired
};

/**
 * Dormand-Prince 5(4) with adaptive steps. `stop(t, y)` ends the
 * integration early; `keep(y_last_kept, y)` decides which states to record.
 */
template <class F, class Stop, class Keep>
OdeResult dopri45(F&& f, Vec y, double t_end, Stop&& stop, Keep&& keep, const OdeOptions& opt = {}) {
    static const double c2 = 1. / 5, c3 = 3. / 10, c4 = 4. / 5, c5 = 8. / 9;
    static const double a21 = 1. / 5;
    static const double a31 = 3. / 40, a32 = 9. / 40;
    static const double a41 = 44. / 45, a42 = -56. / 15, a43 = 32. / 9;
    static const double a51 = 19372. / 6561, a52 = -25360. / 2187, a53 = 64448. / 6561, a54 = -212. / 729;
    static const double a61 = 9017. / 3168, a62 = -355. / 33, a63 = 46732. / 5247, a64 = 49. / 176,
                        a65 = -5103. / 18656;
    static const double b1 = 35. / 384, b3 = 500. / 1113, b4 = 125. / 192, b5 = -2187. / 6784, b6 = 11. / 84;
    static const double e1 = 71. / 57600, e3 = -71. / 16695, e4 = 71. / 1920, e5 = -17253. / 339200,
                        e6 = 22. / 525, e7 = -1. / 40;
    (void)c2, (void)c3, (void)c4, (void)c5;

    OdeResult res;
    double t = 0, h = opt.h0;
    res.t.push_back(t);
    res.y.push_back(y);
    Vec k1 = f(y);
    for (int step = 0; step < opt.max_steps && t < t_end; ++step) {
        if (stop(t, y)) {
            res.stopped = true;
            return res;
        }
        h = std::min(h, t_end - t);
        Vec k2 = f(y + h * a21 * k1);
        Vec k3 = f(y + h * (a31 * k1 + a32 * k2));
        Vec k4 = f(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        Vec k5 = f(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Vec k6 = f(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Vec yn = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        Vec k7 = f(yn);
        Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        double en = 0;
        for (int i = 0; i < y.size(); ++i) {
            double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(y[i]), std::abs(yn[i]));
            en = std::max(en, std::abs(err[i]) / sc);
        }
        if (!std::isfinite(en)) {
            res.ok = false;
            return res;
        }
        if (en <= 1) {
            t += h;
            y = yn;
            k1 = k7;
            if (keep(res.y.back(), y)) {
                res.t.push_back(t);
                res.y.push_back(y);
            }
        }
        double fac = en == 0 ? 5 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
        h = std::min(h * fac, opt.h_max);
        if (h < opt.h_min) {
            res.ok = false;
            return res;
        }
    }
    if (res.t.back() != t) {
        res.t.push_back(t);
        res.y.push_back(y);
    }
    return res;
}

/// Uniform-grid spatial hash over points in R^d.
class SpatialHash {
public:
    SpatialHash(double cell, int dim) : cell_(cell), dim_(dim) {}

    void insert(const Vec& p, int id) { map_[key(cell_of(p))].push_back(id); }

    /// Ids stored in cells overlapping the ball of radius r around p.
    template <class Fn>
    void visit(const Vec& p, double r, Fn&& fn) const {
        auto c = cell_of(p);
        int reach = static_cast<int>(std::ceil(r / cell_));
        std::vector<std::int64_t> idx(dim_);
        visit_rec(c, reach, 0, idx, fn);
    }

private:
    std::vector<std::int64_t> cell_of(const Vec& p) const {
        std::vector<std::int64_t> c(dim_);
        for (int i = 0; i < dim_; ++i) c[i] = static_cast<std::int64_t>(std::floor(p[i] / cell_));
        return c;
    }
    static std::uint64_t key(const std::vector<std::int64_t>& c) {
        std::uint64_t h = 1469598103934665603ull;
        for (auto v : c) {
            h ^= static_cast<std::uint64_t>(v + (1 << 20));
            h *= 1099511628211ull;
        }
        return h;
    }
    template <class Fn>
    void visit_rec(const std::vector<std::int64_t>& c, int reach, int d, std::vector<std::int64_t>& idx, Fn& fn) const {
        if (d == dim_) {
            auto it = map_.find(key(idx));
            if (it != map_.end())
                for (int id : it->second) fn(id);
            return;
        }
        for (int o = -reach; o <= reach; ++o) {
            idx[d] = c[d] + o;
            visit_rec(c, reach, d + 1, idx, fn);
        }
    }

    double cell_;
    int dim_;
    std::unordered_map<std::uint64_t, std::vector<int>> map_;
};

/// Orthonormal basis of the orthogonal complement of the columns of A (n x k).
inline Mat orth_complement(const Mat& A, int n) {
    if (A.cols() == 0) return Mat::Identity(n, n);
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullU);
    int r = 0;
    double tol = 1e-12 * std::max(1.0, svd.singularValues().size() ? svd.singularValues()[0] : 1.0);
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > tol) ++r;
    return svd.matrixU().rightCols(n - r);
}

/// Principal angles (ascending) between the column spans of A and B.
inline std::vector<double> principal_angles(const Mat& A, const Mat& B) {
    Eigen::HouseholderQR<Mat> qa(A), qb(B);
    Mat Qa = qa.householderQ() * Mat::Identity(A.rows(), A.cols());
    Mat Qb = qb.householderQ() * Mat::Identity(B.rows(), B.cols());
    Eigen::JacobiSVD<Mat> svd(Qa.transpose() * Qb);
    std::vector<double> out;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        out.push_back(std::acos(std::clamp(svd.singularValues()[i], -1.0, 1.0)));
    std::sort(out.begin(), out.end());
    return out;
}

/// Numerical rank with a required spectral gap; returns -1 if no gap separates tiny from large values.
inline int gapped_rank(const Eigen::VectorXd& sv, double tol, double gap = 10.0) {
    int r = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] >= tol) ++r;
    if (r > 0 && r < sv.size() && sv[r - 1] < gap * std::max(sv[r], tol / gap)) return -1;
    return r;
}

/// Symmetric Hausdorff distance between point clouds (brute force via spatial hash).
inline double hausdorff(const std::vector<Vec>& A, const std::vector<Vec>& B, double cell = 0.05) {
    if (A.empty() || B.empty()) return std::numeric_limits<double>::infinity();
    auto one_side = [cell](const std::vector<Vec>& P, const std::vector<Vec>& Q) {
        SpatialHash hash(cell, static_cast<int>(Q[0].size()));
        for (int i = 0; i < static_cast<int>(Q.size()); ++i) hash.insert(Q[i], i);
        double worst = 0;
        for (const auto& p : P) {
            double best = std::numeric_limits<double>::infinity();
            for (double r = cell; !std::isfinite(best) || best > r; r *= 2) {
                hash.visit(p, r, [&](int id) { best = std::min(best, (Q[id] - p).norm()); });
                if (r > 1e3) break;
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_side(A, B), one_side(B, A));
}

}  // namespace arbor::num
