#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hypersurface.hpp"
#include "numeric.hpp"
#include "trees.hpp"

namespace arbor {

namespace wdetail {

inline double smst(double t) { return num::smootherstep(t); }
inline double smst1(double t) { return (t <= 0 || t >= 1) ? 0.0 : num::smootherstep_d1(t); }
inline double smst2(double t) { return (t <= 0 || t >= 1) ? 0.0 : num::smootherstep_d2(t); }

/// Plateau in y: 1 for |y| <= 0.15, 0 for |y| >= 0.35.
inline double chi(double y) { return 1 - smst((std::abs(y) - 0.15) / 0.2); }
inline double chi_d(double y) { return -smst1((std::abs(y) - 0.15) / 0.2) / 0.2 * (y < 0 ? -1 : 1); }

/// Plateau in x: 1 for |x| <= 0.25, 0 for |x| >= 0.6.
inline double mu(double x) { return 1 - smst((std::abs(x) - 0.25) / 0.35); }
inline double mu_d(double x) { return -smst1((std::abs(x) - 0.25) / 0.35) / 0.35 * (x < 0 ? -1 : 1); }

inline double S(double x) { return x * mu(x); }
inline double S_d(double x) { return mu(x) + x * mu_d(x); }

/**
 * Birth-death profile B(y): equals y/2 off [0.5, 2.55], vanishes at y = 1
 * (slope -0.1) and y = 2 (slope 0.5), slightly negative between them.
 */
class BirthDeath {
public:
    static const BirthDeath& get() {
        static const BirthDeath instance;
        return instance;
    }

    double B(double y) const {
        int i = segment(y);
        return i < 0 ? 0.5 * y : seg_[i].eval(y).v;
    }
    double B_d(double y) const {
        int i = segment(y);
        return i < 0 ? 0.5 : seg_[i].eval(y).d1;
    }
    /// 4 * integral of B from 0 to y.
    double Phi1(double y) const {
        if (y <= kLo) return y * y;
        if (y >= kHi) return cum_.back() + (y * y - kHi * kHi);
        int i = segment(y);
        return cum_[i] + 4 * seg_[i].integral_to(y);
    }

    static constexpr double kLo = 0.5, kHi = 2.55;

private:
    BirthDeath() {
        const std::array<std::pair<double, num::Jet>, 6> knots{{{0.5, {0.25, 0.5, 0}},
                                                                {1.0, {0, -0.1, 0}},
                                                                {1.2, {-0.01, 0, 0}},
                                                                {1.96, {-0.01, 0, 0}},
                                                                {2.0, {0, 0.5, 0}},
                                                                {2.55, {1.275, 0.5, 0}}}};
        double acc = kLo * kLo;
        for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
            seg_.emplace_back(knots[i].first, knots[i + 1].first, knots[i].second, knots[i + 1].second);
            cum_.push_back(acc);
            acc += 4 * seg_.back().integral_to(knots[i + 1].first);
        }
        cum_.push_back(acc);
    }
    int segment(double y) const {
        if (y < kLo || y >= kHi) return -1;
        for (int i = 0; i < static_cast<int>(seg_.size()); ++i)
            if (y < seg_[i].hi()) return i;
        return static_cast<int>(seg_.size()) - 1;
    }

    std::vector<num::QuinticSegment> seg_;
    std::vector<double> cum_;
};

/// Growth weight k(y) = exp(l(y)), constant 1 below y = 2 and e^7 above 2.53.
inline double ell(double y) {
    double t = std::clamp((y - 2.0) / 0.53, 0.0, 1.0);
    return 7.0 * 12.0 * (t * t / 2 - 2 * t * t * t / 3 + t * t * t * t / 4);
}
inline double ell_d(double y) {
    double t = (y - 2.0) / 0.53;
    if (t <= 0 || t >= 1) return 0;
    return 7.0 * 12.0 * t * (1 - t) * (1 - t) / 0.53;
}

inline double D(double y) { return 0.5 * y - BirthDeath::get().B(y); }
inline double D_d(double y) { return 0.5 - BirthDeath::get().B_d(y); }

/// Pair Lyapunov function phi^lambda(x, y) with its partials (x, y, lambda).
struct PairPotential {
    double value, dx, dy, dlam;
};

inline PairPotential pair_potential(double x, double y, double lam) {
    const auto& bd = BirthDeath::get();
    double c = chi(y), k = std::exp(ell(y)), phi1 = bd.Phi1(y);
    PairPotential p;
    p.value = x * x * (1 - c) * k + (1 - lam) * y * y + lam * phi1;
    p.dx = 2 * x * (1 - c) * k;
    p.dy = x * x * (-chi_d(y) * k + (1 - c) * k * ell_d(y)) + 2 * (1 - lam) * y + 4 * lam * bd.B(y);
    p.dlam = phi1 - y * y;
    return p;
}

/// Zero-section proximity phi0 = x^2 (1 - chi(y)) + y^2 and its activation ramp.
inline double phi0(double x, double y) { return x * x * (1 - chi(y)) + y * y; }
inline std::array<double, 2> phi0_grad(double x, double y) {
    return {2 * x * (1 - chi(y)), -x * x * chi_d(y) + 2 * y};
}
inline double ramp(double u) { return smst((u - 0.04) / 0.16); }
inline double ramp_d(double u) { return smst1((u - 0.04) / 0.16) / 0.16; }

}  // namespace wdetail

enum class FactorKind { xplus, xminus, y, radial, cotangent };

inline const char* to_string(FactorKind k) {
    switch (k) {
        case FactorKind::xplus: return "Xplus";
        case FactorKind::xminus: return "Xminus";
        case FactorKind::y: return "Y";
        case FactorKind::radial: return "radial";
        case FactorKind::cotangent: return "cotangent";
    }
    return "?";
}

/**
 * Planar Liouville field with a Lyapunov potential. X+ is the radial field
 * plus the Hamiltonian field of S(x) D(y), which creates the cancelling pair
 * (0, 1), (0, 2) on the y-axis; X- is its reflection in y.
 */
struct FactorField {
    FactorKind kind = FactorKind::radial;
    double epsilon = 0.2;

    std::array<double, 2> eval(double x, double y) const {
        using namespace wdetail;
        switch (kind) {
            case FactorKind::radial: return {0.5 * x, 0.5 * y};
            case FactorKind::y:
            case FactorKind::cotangent: return {0.0, y};
            case FactorKind::xplus: return {0.5 * x + S(x) * D_d(y), 0.5 * y - S_d(x) * D(y)};
            case FactorKind::xminus: {
                auto v = FactorField{FactorKind::xplus, epsilon}.eval(x, -y);
                return {v[0], -v[1]};
            }
        }
        return {0, 0};
    }

    double potential(double x, double y) const { return potential_grad(x, y).first; }

    std::pair<double, std::array<double, 2>> potential_grad(double x, double y) const {
        using namespace wdetail;
        switch (kind) {
            case FactorKind::radial: return {x * x + y * y, {2 * x, 2 * y}};
            case FactorKind::y:
            case FactorKind::cotangent: return {y * y, {0, 2 * y}};
            case FactorKind::xplus: {
                const auto& bd = BirthDeath::get();
                double k = std::exp(ell(y));
                return {x * x * k + bd.Phi1(y), {2 * x * k, x * x * k * ell_d(y) + 4 * bd.B(y)}};
            }
            case FactorKind::xminus: {
                auto r = FactorField{FactorKind::xplus, epsilon}.potential_grad(x, -y);
                return {r.first, {r.second[0], -r.second[1]}};
            }
        }
        return {0, {0, 0}};
    }

    /// Tube around the connecting segment on which the x-expansion bounds are certified.
    static constexpr double kTubeRadius = 0.04;
};

inline FactorField make_factor(FactorKind kind, double epsilon = 0.2) {
    if (!(epsilon > 0 && epsilon <= 0.2)) throw validation_error("factor epsilon must lie in (0, 0.2]");
    return FactorField{kind, epsilon};
}

struct LyapunovValue {
    double value = 0;
    Vec gradient;
};

/// Vector field on R^{2n}, coordinates grouped in symplectic pairs (x_1, y_1, x_2, y_2, ...).
struct VectorFieldModel {
    int pairs = 0;
    std::string tag;
    double parameter = 0;
    std::function<Vec(const Vec&)> field;
    std::function<LyapunovValue(const Vec&)> lyapunov;

    int dim() const { return 2 * pairs; }
    Vec eval(const Vec& z) const {
        if (z.size() != dim()) throw validation_error("point dimension does not match model");
        return field(z);
    }
    Mat jacobian(const Vec& z, double h = 1e-5) const { return num::fd_jacobian(field, z, h); }
    LyapunovValue lyap(const Vec& z) const { return lyapunov(z); }
};

/// Standard symplectic matrix for paired coordinates.
inline Mat symplectic_matrix(int pairs) {
    Mat W = Mat::Zero(2 * pairs, 2 * pairs);
    for (int i = 0; i < pairs; ++i) {
        W(2 * i, 2 * i + 1) = 1;
        W(2 * i + 1, 2 * i) = -1;
    }
    return W;
}

inline VectorFieldModel radial_model(int pairs) {
    VectorFieldModel m;
    m.pairs = pairs;
    m.tag = "radial";
    m.field = [](const Vec& z) { return Vec(0.5 * z); };
    m.lyapunov = [](const Vec& z) { return LyapunovValue{z.squaredNorm(), 2 * z}; };
    return m;
}

/// Product of planar factors, one per symplectic pair.
inline VectorFieldModel product_model(const std::vector<FactorField>& factors) {
    VectorFieldModel m;
    m.pairs = static_cast<int>(factors.size());
    m.tag = "product";
    m.field = [factors](const Vec& z) {
        Vec v(z.size());
        for (std::size_t i = 0; i < factors.size(); ++i) {
            auto f = factors[i].eval(z[2 * i], z[2 * i + 1]);
            v[2 * i] = f[0];
            v[2 * i + 1] = f[1];
        }
        return v;
    };
    m.lyapunov = [factors](const Vec& z) {
        LyapunovValue out{0, Vec::Zero(z.size())};
        for (std::size_t i = 0; i < factors.size(); ++i) {
            auto [val, g] = factors[i].potential_grad(z[2 * i], z[2 * i + 1]);
            out.value += val;
            out.gradient[2 * i] = g[0];
            out.gradient[2 * i + 1] = g[1];
        }
        return out;
    };
    return m;
}

inline constexpr int kMaxModelVertices = 5;

/**
 * Model Weinstein structure of a signed rooted tree on R^{2n}, n = |T| - 1.
 * Every pair carries a band Hamiltonian making it y d/dy near y = 0; vertex
 * j adds lambda_j sigma_j S(x_j) D(sigma_j y_j), where lambda_j switches on
 * once the parent pair leaves its zero section and off while a sibling pair
 * is active. V = radial + X_H, so V is Liouville by construction.
 */
inline VectorFieldModel build_model(const SignedRootedTree& tree) {
    tree.validate();
    if (static_cast<int>(tree.size()) > kMaxModelVertices)
        throw capacity_error("model construction supports at most " + std::to_string(kMaxModelVertices) +
                               " vertices");
    SignedForest forest = delete_root(tree);
    const int n = static_cast<int>(forest.size());
    struct PairInfo {
        int parent = -1;            // pair index, -1 for root children
        std::vector<int> siblings;  // pair indices
        double sigma = 1;
        double weight = 1;
    };
    std::vector<PairInfo> info(n);
    std::map<int, double> weight_of{{tree.root(), 100.0}};
    std::vector<int> order{tree.root()};
    for (std::size_t i = 0; i < order.size(); ++i) {
        int v = order[i];
        auto kids = tree.children(v);
        for (int c : kids) {
            weight_of[c] = weight_of[v] / (100.0 * kids.size());
            order.push_back(c);
            PairInfo& pi = info[forest.coordinate(c)];
            pi.parent = v == tree.root() ? -1 : forest.coordinate(v);
            for (int s : kids)
                if (s != c) pi.siblings.push_back(forest.coordinate(s));
            pi.sigma = tree.edge_into(c)->sign.value_or(1);
            pi.weight = weight_of[c];
        }
    }

    // Activation lambda_j and its gradient (sparse over pairs).
    auto activation = [info](const Vec& z, int j, std::vector<std::pair<int, std::array<double, 2>>>* grad) {
        using namespace wdetail;
        const PairInfo& pi = info[j];
        double P = 1;
        std::array<double, 2> dP{0, 0};
        if (pi.parent >= 0) {
            double xp = z[2 * pi.parent], yp = z[2 * pi.parent + 1];
            double u = phi0(xp, yp);
            P = ramp(u);
            auto g = phi0_grad(xp, yp);
            dP = {ramp_d(u) * g[0], ramp_d(u) * g[1]};
        }
        std::vector<double> off;
        double prod = 1;
        for (int s : pi.siblings) {
            double o = 1 - ramp(phi0(z[2 * s], z[2 * s + 1]));
            off.push_back(o);
            prod *= o;
        }
        double lam = P * prod;
        if (grad) {
            grad->clear();
            if (pi.parent >= 0) grad->push_back({pi.parent, {dP[0] * prod, dP[1] * prod}});
            for (std::size_t k = 0; k < pi.siblings.size(); ++k) {
                int s = pi.siblings[k];
                double rest = P;
                for (std::size_t l = 0; l < off.size(); ++l)
                    if (l != k) rest *= off[l];
                double xs = z[2 * s], ys = z[2 * s + 1];
                double u = phi0(xs, ys);
                auto g = phi0_grad(xs, ys);
                grad->push_back({s, {-rest * ramp_d(u) * g[0], -rest * ramp_d(u) * g[1]}});
            }
        }
        return lam;
    };

    VectorFieldModel m;
    m.pairs = n;
    m.tag = "tree:" + canonical_form(tree);
    m.field = [n, info, activation](const Vec& z) {
        using namespace wdetail;
        Vec dH = Vec::Zero(2 * n);  // (dH/dx_p, dH/dy_p)
        std::vector<std::pair<int, std::array<double, 2>>> grad;
        for (int p = 0; p < n; ++p) {
            double x = z[2 * p], y = z[2 * p + 1];
            double c = chi(y);
            dH[2 * p] += -0.5 * c * y;
            dH[2 * p + 1] += -0.5 * x * (c + y * chi_d(y));
            double s = info[p].sigma;
            double lam = activation(z, p, &grad);
            double K = S(x) * D(s * y);
            dH[2 * p] += lam * s * S_d(x) * D(s * y);
            dH[2 * p + 1] += lam * S(x) * D_d(s * y);
            if (K != 0)
                for (auto& [q, g] : grad) {
                    dH[2 * q] += s * K * g[0];
                    dH[2 * q + 1] += s * K * g[1];
                }
        }
        Vec v(2 * n);
        for (int p = 0; p < n; ++p) {
            v[2 * p] = 0.5 * z[2 * p] + dH[2 * p + 1];
            v[2 * p + 1] = 0.5 * z[2 * p + 1] - dH[2 * p];
        }
        return v;
    };
    m.lyapunov = [n, info, activation](const Vec& z) {
        LyapunovValue out{0, Vec::Zero(2 * n)};
        std::vector<std::pair<int, std::array<double, 2>>> grad;
        for (int j = 0; j < n; ++j) {
            double s = info[j].sigma, A = info[j].weight;
            double lam = activation(z, j, &grad);
            auto pp = wdetail::pair_potential(z[2 * j], s * z[2 * j + 1], lam);
            out.value += A * pp.value;
            out.gradient[2 * j] += A * pp.dx;
            out.gradient[2 * j + 1] += A * s * pp.dy;
            for (auto& [q, g] : grad) {
                out.gradient[2 * q] += A * pp.dlam * g[0];
                out.gradient[2 * q + 1] += A * pp.dlam * g[1];
            }
        }
        return out;
    };
    return m;
}

/**
 * Thickening homotopy on T*R^m: V = (Y_t(q), p - DY_t^T p) with
 * Y_t = c(s) q, c = (1 - t f(s) - t f'(s) s) / 2, s = |q|^2 and f a cutoff
 * equal to 1 on [0, delta] and 0 beyond 2 delta. Coordinates (q_1, p_1, ...).
 */
inline VectorFieldModel thicken_family(double delta, double t, int m = 2) {
    if (!(delta > 0)) throw validation_error("thickening delta must be positive");
    if (!(t >= 0 && t <= 1)) throw validation_error("homotopy parameter must lie in [0, 1]");
    if (m < 1) throw validation_error("base dimension must be positive");
    using wdetail::smst;
    auto f = [delta](double s) { return 1 - smst((s - delta) / delta); };
    auto fd = [delta](double s) { return -wdetail::smst1((s - delta) / delta) / delta; };
    auto fdd = [delta](double s) { return -wdetail::smst2((s - delta) / delta) / (delta * delta); };
    auto c = [=](double s) { return 0.5 * (1 - t * f(s) - t * fd(s) * s); };
    auto cd = [=](double s) { return -0.5 * t * (2 * fd(s) + fdd(s) * s); };

    // ln kappa is the exact integral of a piecewise-linear rate table.
    const int N = 4000;
    const double s_max = 2 * delta, hs = s_max / N;
    std::vector<double> rate(N + 1), lnk(N + 1, 0.0);
    for (int i = 0; i <= N; ++i) {
        double s = i * hs;
        double cs = c(s), lmax = std::max(cs, cs + 2 * cd(s) * s);
        rate[i] = (s > 0 && cs * s > 0) ? std::max(0.0, (lmax - 0.75) / (cs * s)) : 0.0;
    }
    for (int i = 1; i <= N; ++i) lnk[i] = lnk[i - 1] + 0.5 * hs * (rate[i - 1] + rate[i]);
    auto kappa = [=](double s, double& dkappa) {
        if (s >= s_max) {
            dkappa = 0;
            return std::exp(lnk[N]);
        }
        int i = std::min(static_cast<int>(s / hs), N - 1);
        double u = s - i * hs;
        double slope = (rate[i + 1] - rate[i]) / hs;
        double r = rate[i] + slope * u;
        double l = lnk[i] + rate[i] * u + 0.5 * slope * u * u;
        double k = std::exp(l);
        dkappa = k * r;
        return k;
    };

    VectorFieldModel model;
    model.pairs = m;
    model.tag = "thicken";
    model.parameter = t;
    model.field = [=](const Vec& z) {
        Vec q(m), p(m);
        for (int i = 0; i < m; ++i) {
            q[i] = z[2 * i];
            p[i] = z[2 * i + 1];
        }
        double s = q.squaredNorm(), cs = c(s), cds = cd(s), qp = q.dot(p);
        Vec v(2 * m);
        for (int i = 0; i < m; ++i) {
            v[2 * i] = cs * q[i];
            v[2 * i + 1] = p[i] - cs * p[i] - 2 * cds * qp * q[i];
        }
        return v;
    };
    model.lyapunov = [=](const Vec& z) {
        Vec q(m), p(m);
        for (int i = 0; i < m; ++i) {
            q[i] = z[2 * i];
            p[i] = z[2 * i + 1];
        }
        double s = q.squaredNorm(), dk = 0, k = kappa(s, dk), pp = p.squaredNorm();
        LyapunovValue out{(1 - t * f(s)) * s + k * pp, Vec(2 * m)};
        for (int i = 0; i < m; ++i) {
            out.gradient[2 * i] = (4 * c(s) + 2 * dk * pp) * q[i];
            out.gradient[2 * i + 1] = 2 * k * p[i];
        }
        return out;
    };
    return model;
}

// ---------------------------------------------------------------------------
// Verifiers

struct LyapunovReport {
    double worst_margin = std::numeric_limits<double>::infinity();
    double delta_max = std::numeric_limits<double>::infinity();
    int checked = 0;
    int excluded = 0;  // points too close to the zero set
    bool holds = true;
};

/// Checks dphi(V) >= delta (|V|^2 + |dphi|^2) pointwise; points with |V| < 1e-6 are excluded.
inline LyapunovReport lyapunov_check(const VectorFieldModel& model, const std::vector<Vec>& points, double delta) {
    if (!(delta > 0)) throw validation_error("delta must be positive");
    LyapunovReport rep;
    for (const auto& z : points) {
        Vec v = model.eval(z);
        if (v.norm() < 1e-6) {
            ++rep.excluded;
            continue;
        }
        auto L = model.lyap(z);
        double pair = L.gradient.dot(v), scale = v.squaredNorm() + L.gradient.squaredNorm();
        rep.worst_margin = std::min(rep.worst_margin, pair - delta * scale);
        rep.delta_max = std::min(rep.delta_max, pair / scale);
        ++rep.checked;
    }
    rep.holds = rep.worst_margin >= 0;
    return rep;
}

/// Max entry of J^T W + W J - W: zero iff the Lie derivative of omega along V equals omega.
inline double liouville_residual(const VectorFieldModel& model, const std::vector<Vec>& points, double h = 1e-6) {
    Mat W = symplectic_matrix(model.pairs);
    double worst = 0;
    for (const auto& z : points) {
        Mat J = model.jacobian(z, h);
        worst = std::max(worst, (J.transpose() * W + W * J - W).cwiseAbs().maxCoeff());
    }
    return worst;
}

inline std::vector<Vec> random_points(int dim, int count, double half, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-half, half);
    std::vector<Vec> out(count, Vec(dim));
    for (auto& p : out)
        for (int i = 0; i < dim; ++i) p[i] = U(rng);
    return out;
}

// ---------------------------------------------------------------------------
// Zeros

struct EigenSplit {
    Mat E_plus, E_minus, E_zero;  // orthonormal column bases
    std::vector<std::complex<double>> eigenvalues;
    int n_plus() const { return static_cast<int>(E_plus.cols()); }
    int n_minus() const { return static_cast<int>(E_minus.cols()); }
    int n_zero() const { return static_cast<int>(E_zero.cols()); }
};

inline Mat orthonormal_columns(const std::vector<Vec>& cols, int dim) {
    if (cols.empty()) return Mat(dim, 0);
    Mat A(dim, cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i) A.col(i) = cols[i];
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU);
    int r = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > 1e-9 * svd.singularValues()[0]) ++r;
    return svd.matrixU().leftCols(r);
}

/// Generalized eigenspaces grouped by the sign of the real part (|Re| <= tol counts as zero).
inline EigenSplit eigen_split(const Mat& J, double tol = 1e-3) {
    const int d = static_cast<int>(J.rows());
    EigenSplit out;
    if (d == 0) {
        out.E_plus = out.E_minus = out.E_zero = Mat(0, 0);
        return out;
    }
    Eigen::EigenSolver<Mat> es(J);
    std::vector<Vec> plus, minus, zero;
    for (int i = 0; i < d; ++i) {
        auto lam = es.eigenvalues()[i];
        out.eigenvalues.push_back(lam);
        Eigen::VectorXcd v = es.eigenvectors().col(i);
        auto& bucket = lam.real() > tol ? plus : (lam.real() < -tol ? minus : zero);
        bucket.push_back(v.real());
        if (std::abs(lam.imag()) > 1e-12) bucket.push_back(v.imag());
    }
    out.E_plus = orthonormal_columns(plus, d);
    out.E_minus = orthonormal_columns(minus, d);
    out.E_zero = orthonormal_columns(zero, d);
    return out;
}

struct ZeroComponent {
    std::vector<Vec> points;
    int label = 0;
    int dim = 0;                 // estimated dimension of the zero set
    int index = 0;               // dim E- at the representative point
    EigenSplit split;            // at the representative point
    Vec representative;
    bool morse_bott = false;     // T_z Z = E0 within the angle tolerance at every point
    double max_angle = 0;        // worst principal angle between T_z Z and E0
    bool has_boundary = false;
    bool boundary_repellent = true;
    double phi = 0;              // Lyapunov value at the representative
};

struct ZeroScan {
    std::vector<ZeroComponent> components;
    int flagged_cells = 0;  // seeds whose Newton iteration failed
};

struct ZeroOptions {
    double cell = 0.1;
    double newton_tol = 1e-11;
    double eigen_tol = 1e-3;
    double zero_jacobian_step = 1e-7;  // cutoffs are only C^2 at the edge of a zero disk
    double angle_tol = 1e-2;
    long max_grid_points = 4000000;
    std::vector<Vec> extra_seeds;
};

namespace wdetail {

inline bool newton_zero(const VectorFieldModel& m, Vec& z, double tol, double max_travel) {
    Vec start = z;
    for (int it = 0; it < 60; ++it) {
        Vec v = m.eval(z);
        if (v.norm() < tol) return true;
        Mat J = m.jacobian(z);
        Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        svd.setThreshold(1e-8);
        Vec step = svd.solve(v);
        double sn = step.norm();
        if (sn > 0.5 * max_travel) step *= 0.5 * max_travel / sn;
        z -= step;
        if ((z - start).norm() > max_travel) return false;
    }
    return m.eval(z).norm() < tol;
}

/// Local tangent estimate of a point cloud: PCA over neighbours within r.
inline Mat local_tangent(const std::vector<Vec>& pts, const num::SpatialHash& hash, const Vec& z, double r,
                         double min_extent) {
    std::vector<Vec> nb;
    hash.visit(z, r, [&](int id) {
        if ((pts[id] - z).norm() <= r) nb.push_back(pts[id]);
    });
    int d = static_cast<int>(z.size());
    if (nb.size() < 2) return Mat(d, 0);
    Vec c = Vec::Zero(d);
    for (auto& p : nb) c += p;
    c /= static_cast<double>(nb.size());
    Mat M(nb.size(), d);
    for (std::size_t i = 0; i < nb.size(); ++i) M.row(i) = (nb[i] - c).transpose();
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinV);
    auto sv = svd.singularValues();
    double scale = std::sqrt(static_cast<double>(nb.size()));
    int k = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] / scale >= min_extent && sv[i] >= 0.3 * sv[0]) ++k;
    return svd.matrixV().leftCols(k);
}

}  // namespace wdetail

/**
 * Zeros on a grid over `box`: seeds with |V| below the cell size are refined
 * by Gauss-Newton, deduplicated and clustered by adjacency. Each component
 * gets an eigen-split, a Morse-Bott* verdict (T_z Z = E0) and, when it has a
 * boundary away from the box, a repellence test just outside it.
 */
inline ZeroScan find_zero_components(const VectorFieldModel& model, const Box& box, const ZeroOptions& opt = {}) {
    const int d = model.dim();
    if (box.dim() != d) throw validation_error("box dimension does not match model");
    if (!(opt.cell > 0)) throw validation_error("cell must be positive");
    ZeroScan scan;
    if (d == 0) {
        ZeroComponent c;
        c.points = {Vec(0)};
        c.representative = Vec(0);
        c.morse_bott = true;
        scan.components.push_back(c);
        return scan;
    }
    const double h = opt.cell;
    std::vector<int> counts(d);
    long total = 1;
    for (int i = 0; i < d; ++i) {
        counts[i] = static_cast<int>(std::floor((box.hi[i] - box.lo[i]) / h + 1e-9)) + 1;
        total *= counts[i];
    }
    if (total > opt.max_grid_points && opt.extra_seeds.empty())
        throw validation_error("zero-search grid too fine for this dimension; coarsen the cell or pass seeds");

    std::vector<Vec> seeds = opt.extra_seeds;
    if (total <= opt.max_grid_points) {
        std::vector<int> idx(d, 0);
        Vec z(d);
        for (bool done = false; !done;) {
            for (int i = 0; i < d; ++i) z[i] = box.lo[i] + idx[i] * h;
            if (model.eval(z).norm() <= h) seeds.push_back(z);
            int k = d - 1;
            while (k >= 0 && ++idx[k] == counts[k]) idx[k--] = 0;
            done = k < 0;
        }
    }

    std::vector<Vec> zeros;
    num::SpatialHash hash(h, d);
    for (auto z : seeds) {
        if (!wdetail::newton_zero(model, z, opt.newton_tol, 3 * h * std::sqrt(double(d)))) {
            ++scan.flagged_cells;
            continue;
        }
        if (!box.contains(z)) continue;
        bool dup = false;
        hash.visit(z, 0.3 * h, [&](int id) {
            if ((zeros[id] - z).norm() < 0.3 * h) dup = true;
        });
        if (dup) continue;
        hash.insert(z, static_cast<int>(zeros.size()));
        zeros.push_back(z);
    }

    // Union-find over neighbours closer than 1.5 cells.
    std::vector<int> parent(zeros.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
    for (int i = 0; i < static_cast<int>(zeros.size()); ++i)
        hash.visit(zeros[i], 1.5 * h, [&](int j) {
            if (j != i && (zeros[i] - zeros[j]).norm() <= 1.5 * h) parent[find(i)] = find(j);
        });
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < static_cast<int>(zeros.size()); ++i) groups[find(i)].push_back(i);

    std::vector<std::vector<int>> ordered;
    for (auto& [root, members] : groups) ordered.push_back(members);
    std::sort(ordered.begin(), ordered.end(), [&](const auto& a, const auto& b) {
        const Vec &pa = zeros[a.front()], &pb = zeros[b.front()];
        return std::lexicographical_compare(pa.data(), pa.data() + d, pb.data(), pb.data() + d);
    });

    for (const auto& members : ordered) {
        ZeroComponent comp;
        comp.label = static_cast<int>(scan.components.size());
        for (int i : members) comp.points.push_back(zeros[i]);
        num::SpatialHash local(h, d);
        for (int i = 0; i < static_cast<int>(comp.points.size()); ++i) local.insert(comp.points[i], i);

        // Representative: the point nearest the component centroid.
        Vec c = Vec::Zero(d);
        for (auto& p : comp.points) c += p;
        c /= static_cast<double>(comp.points.size());
        comp.representative = *std::min_element(comp.points.begin(), comp.points.end(), [&](auto& a, auto& b) {
            return (a - c).squaredNorm() < (b - c).squaredNorm();
        });
        comp.split = eigen_split(model.jacobian(comp.representative, opt.zero_jacobian_step), opt.eigen_tol);
        comp.index = comp.split.n_minus();
        comp.phi = model.lyap(comp.representative).value;
        Mat T = wdetail::local_tangent(comp.points, local, comp.representative, 3 * h, 0.25 * h);
        comp.dim = static_cast<int>(T.cols());

        comp.morse_bott = true;
        for (const auto& z : comp.points) {
            bool near_face = false;
            for (int i = 0; i < d; ++i)
                if (z[i] - box.lo[i] < 3 * h || box.hi[i] - z[i] < 3 * h) near_face = true;
            auto split = eigen_split(model.jacobian(z, opt.zero_jacobian_step), opt.eigen_tol);
            Mat Tz = wdetail::local_tangent(comp.points, local, z, 3 * h, 0.25 * h);
            if (near_face) continue;
            if (Tz.cols() != split.n_zero()) {
                // Boundary points see a one-sided neighbourhood; the zero space must still contain it.
                if (Tz.cols() > split.n_zero()) comp.morse_bott = false;
                continue;
            }
            if (Tz.cols() > 0) {
                auto ang = num::principal_angles(Tz, split.E_zero);
                comp.max_angle = std::max(comp.max_angle, ang.back());
                if (ang.back() > opt.angle_tol) comp.morse_bott = false;
            }
        }

        // Boundary: points whose neighbours all lie on one side within the tangent plane.
        if (comp.dim > 0) {
            for (const auto& z : comp.points) {
                bool near_face = false;
                for (int i = 0; i < d; ++i)
                    if (z[i] - box.lo[i] < 3 * h || box.hi[i] - z[i] < 3 * h) near_face = true;
                if (near_face) continue;
                Vec mean = Vec::Zero(d);
                int cnt = 0;
                local.visit(z, 2.5 * h, [&](int id) {
                    if ((comp.points[id] - z).norm() <= 2.5 * h) {
                        mean += comp.points[id] - z;
                        ++cnt;
                    }
                });
                if (cnt < 2) continue;
                mean /= cnt;
                if (mean.norm() < 0.6 * h) continue;
                comp.has_boundary = true;
                Vec out = -mean.normalized();
                Vec probe = z + 0.5 * h * out;
                if (model.eval(probe).dot(out) <= 0) comp.boundary_repellent = false;
            }
        }
        scan.components.push_back(std::move(comp));
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Skeleton

struct SkeletonSample {
    int dim = 0;
    std::vector<Vec> points;
    std::vector<int> bone;        // zero component label
    std::vector<double> phi;
    std::vector<Mat> frames;      // tangent frame estimates
    std::vector<ZeroComponent> components;
    std::vector<int> endpoint;    // for trajectory ends: label of the component reached, else -1
};

struct SkeletonParams {
    double cell = 0.1;            // zero-search resolution
    double spacing = 0.05;        // sample spacing along trajectories
    double horizon = 200;
    double seed_radius = 1e-3;
    std::vector<Vec> extra_seeds;
};

namespace wdetail {

inline std::vector<Vec> sphere_directions(const Mat& E, double spacing) {
    int k = static_cast<int>(E.cols());
    std::vector<Vec> dirs;
    if (k == 1) {
        dirs = {E.col(0), -E.col(0)};
    } else if (k == 2) {
        int count = std::max(16, static_cast<int>(std::ceil(2 * num::pi * 2 / spacing)));
        for (int i = 0; i < count; ++i) {
            double a = 2 * num::pi * i / count;
            dirs.push_back(std::cos(a) * E.col(0) + std::sin(a) * E.col(1));
        }
    } else if (k > 2) {
        std::mt19937 rng(7u);
        std::normal_distribution<double> g;
        int count = std::min(4000, static_cast<int>(std::ceil(16 / (spacing * spacing))));
        for (int i = 0; i < count; ++i) {
            Vec c(k);
            for (int j = 0; j < k; ++j) c[j] = g(rng);
            dirs.push_back(E * c.normalized());
        }
    }
    return dirs;
}

}  // namespace wdetail

/**
 * Stable set of a zero component: trajectories of -V from E- spheres of
 * radius r0 around the component's points, sampled every `spacing` of arc.
 */
inline SkeletonSample stable_manifold_sample(const VectorFieldModel& model, const ZeroComponent& comp, const Box& box,
                                             double horizon, double spacing, double seed_radius = 1e-3) {
    if (!(spacing > 0) || !(horizon > 0)) throw validation_error("spacing and horizon must be positive");
    const int d = model.dim();
    SkeletonSample out;
    out.dim = d;
    // Thin the component to the requested spacing.
    std::vector<Vec> base;
    num::SpatialHash hash(spacing, std::max(d, 1));
    for (const auto& z : comp.points) {
        bool close = false;
        hash.visit(z, 0.9 * spacing, [&](int id) {
            if ((base[id] - z).norm() < 0.9 * spacing) close = true;
        });
        if (close) continue;
        hash.insert(z, static_cast<int>(base.size()));
        base.push_back(z);
    }
    for (const auto& z : base) {
        out.points.push_back(z);
        out.bone.push_back(comp.label);
        out.endpoint.push_back(-1);
    }
    auto back = [&](const Vec& y) { return Vec(-model.eval(y)); };
    for (const auto& z : base) {
        auto split = eigen_split(model.jacobian(z));
        if (split.n_minus() == 0) continue;
        for (const auto& dir : wdetail::sphere_directions(split.E_minus, spacing)) {
            Vec y0 = z + seed_radius * dir;
            auto res = num::dopri45(
                back, y0, horizon,
                [&](double, const Vec& y) { return !box.contains(y) || model.eval(y).norm() < 1e-10; },
                [&](const Vec& last, const Vec& y) { return (y - last).norm() >= spacing; });
            if (!res.ok) throw numeric_error("stable-manifold integration failed (step size underflow)");
            for (std::size_t i = 1; i < res.y.size(); ++i) {
                if (!box.contains(res.y[i])) continue;
                out.points.push_back(res.y[i]);
                out.bone.push_back(comp.label);
                out.endpoint.push_back(-1);
            }
        }
    }
    for (const auto& p : out.points) out.phi.push_back(model.lyap(p).value);
    return out;
}

/// Tangent frames of a labelled cloud by per-bone local PCA with the given dimension.
inline void estimate_frames(SkeletonSample& s, double radius, const std::map<int, int>& bone_dim) {
    s.frames.assign(s.points.size(), Mat());
    std::map<int, std::vector<int>> by_bone;
    for (int i = 0; i < static_cast<int>(s.points.size()); ++i) by_bone[s.bone[i]].push_back(i);
    for (auto& [b, ids] : by_bone) {
        int k = bone_dim.count(b) ? bone_dim.at(b) : 0;
        num::SpatialHash hash(radius, std::max(s.dim, 1));
        for (int i : ids) hash.insert(s.points[i], i);
        for (int i : ids) {
            std::vector<Vec> nb;
            hash.visit(s.points[i], radius, [&](int id) {
                if ((s.points[id] - s.points[i]).norm() <= radius) nb.push_back(s.points[id]);
            });
            if (k == 0 || static_cast<int>(nb.size()) <= k) {
                s.frames[i] = Mat(s.dim, 0);
                continue;
            }
            Vec c = Vec::Zero(s.dim);
            for (auto& p : nb) c += p;
            c /= static_cast<double>(nb.size());
            Mat M(nb.size(), s.dim);
            for (std::size_t j = 0; j < nb.size(); ++j) M.row(j) = (nb[j] - c).transpose();
            Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinV);
            s.frames[i] = svd.matrixV().leftCols(k);
        }
    }
}

/// Largest |omega(e_i, e_j)| over frame pairs: zero on isotropic pieces.
inline double isotropy_defect(const SkeletonSample& s) {
    if (s.dim % 2) return 0;
    Mat W = symplectic_matrix(s.dim / 2);
    double worst = 0;
    for (const auto& F : s.frames)
        if (F.cols() >= 2) worst = std::max(worst, (F.transpose() * W * F).cwiseAbs().maxCoeff());
    return worst;
}

/// Union of the stable sets of all zero components, labelled by component.
inline SkeletonSample skeleton(const VectorFieldModel& model, const Box& box, const SkeletonParams& params = {}) {
    ZeroOptions zo;
    zo.cell = params.cell;
    zo.extra_seeds = params.extra_seeds;
    auto scan = find_zero_components(model, box, zo);
    SkeletonSample out;
    out.dim = model.dim();
    out.components = scan.components;
    std::map<int, int> bone_dim;
    for (const auto& comp : scan.components) {
        auto part = stable_manifold_sample(model, comp, box, params.horizon, params.spacing, params.seed_radius);
        out.points.insert(out.points.end(), part.points.begin(), part.points.end());
        out.bone.insert(out.bone.end(), part.bone.begin(), part.bone.end());
        out.phi.insert(out.phi.end(), part.phi.begin(), part.phi.end());
        out.endpoint.insert(out.endpoint.end(), part.endpoint.begin(), part.endpoint.end());
        bone_dim[comp.label] = comp.dim + comp.index;
    }
    estimate_frames(out, 3 * params.spacing, bone_dim);
    return out;
}

/// Components whose stable set is half-dimensional.
inline std::vector<int> lagrangian_bones(const SkeletonSample& s) {
    std::vector<int> out;
    for (const auto& c : s.components)
        if (2 * (c.dim + c.index) == s.dim) out.push_back(c.label);
    return out;
}

struct JointReport {
    std::vector<Vec> points;            // joint points on the lower bone's zero set
    std::vector<Vec> front;             // the same in the lower marrow's tangent coordinates
    bool index_ok = true;               // index of the lower bone < n
    bool phi_ordered = true;            // phi strictly larger on the upper marrow
    double phi_hi = 0, phi_lo = 0;
};

/**
 * Where the closure of bone_hi meets bone_lo: trajectories of bone_hi are
 * followed backward until they settle, and those settling within
 * shell_radius of bone_lo's zero set are collected.
 */
inline JointReport joint_detect(const VectorFieldModel& model, const SkeletonSample& s, int bone_hi, int bone_lo,
                                double shell_radius, const Box& box) {
    const ZeroComponent* hi = nullptr;
    const ZeroComponent* lo = nullptr;
    for (const auto& c : s.components) {
        if (c.label == bone_hi) hi = &c;
        if (c.label == bone_lo) lo = &c;
    }
    if (!hi || !lo) throw validation_error("unknown bone label");
    JointReport rep;
    rep.index_ok = lo->index < model.pairs;
    if (bone_hi == bone_lo) return rep;
    rep.phi_hi = hi->phi;
    num::SpatialHash lo_hash(shell_radius, std::max(model.dim(), 1));
    for (int i = 0; i < static_cast<int>(lo->points.size()); ++i) lo_hash.insert(lo->points[i], i);
    auto back = [&](const Vec& y) { return Vec(-model.eval(y)); };
    double lo_phi = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(s.points.size()); ++i) {
        if (s.bone[i] != bone_hi) continue;
        auto res = num::dopri45(
            back, s.points[i], 40.0, [&](double, const Vec& y) { return !box.contains(y) || model.eval(y).norm() < 1e-9; },
            [](const Vec&, const Vec&) { return false; });
        const Vec& end = res.y.back();
        int near = -1;
        double best = shell_radius;
        lo_hash.visit(end, shell_radius, [&](int id) {
            double dd = (lo->points[id] - end).norm();
            if (dd <= best) {
                best = dd;
                near = id;
            }
        });
        if (near < 0) continue;
        const Vec& hit = lo->points[near];
        bool dup = false;
        for (const auto& q : rep.points)
            if ((q - hit).norm() <= shell_radius) dup = true;
        if (dup) continue;
        rep.points.push_back(hit);
        double pv = model.lyap(hit).value;
        lo_phi = std::max(lo_phi, pv);
        if (!(pv < hi->phi)) rep.phi_ordered = false;
    }
    rep.phi_lo = rep.points.empty() ? lo->phi : lo_phi;
    Mat E0 = lo->split.E_zero;
    for (const auto& p : rep.points) rep.front.push_back(E0.transpose() * (p - lo->representative));
    return rep;
}

/// Skeleton points as (q, p) clouds under (x_i, y_i) -> (q_i, p_i), for comparison with lagrangian_model.
inline std::vector<Vec> skeleton_as_cotangent(const SkeletonSample& s) {
    int n = s.dim / 2;
    std::vector<Vec> out;
    for (const auto& z : s.points) {
        Vec w(2 * n);
        for (int i = 0; i < n; ++i) {
            w[i] = z[2 * i];
            w[n + i] = z[2 * i + 1];
        }
        out.push_back(w);
    }
    return out;
}

}  // namespace arbor
