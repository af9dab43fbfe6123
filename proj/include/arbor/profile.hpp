#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"

namespace arbor {

/**
 * Planar smoothing function f(a, b) whose zero curve C follows {b = 0, a >= 1},
 * turns through a flat-step heading profile and crosses {a = 0} vertically at
 * (0, 1). The curve then turns back and leaves along {b = 2, a <= -1}.
 *
 * f is the diagonal offset: f(a, b) = t with (a - t, b - t) on C. Every
 * diagonal line meets C exactly once, so f is a global submersion with
 * |grad f| in [1/sqrt(2), 1]; f equals b on the flat part.
 */
class SmoothingProfile {
public:
    struct Eval {
        double value = 0;
        double da = 0, db = 0;
        double foot = 0;  // arclength parameter of the matched curve point
    };

    struct CurvePoint {
        double s, a, b;
        double na, nb;  // unit normal pointing to f > 0
    };

    explicit SmoothingProfile(double sharpness = 1.0, int panels = 4096) : k_(sharpness) {
        if (!(sharpness > 0 && sharpness <= 10)) throw validation_error("transition sharpness must lie in (0, 10]");
        double c = num::integrate([&](double t) { return std::cos(0.5 * num::pi * num::flat_step(t, k_)); }, 0, 1, 256);
        L_ = 1.0 / c;
        n_ = panels;
        h_ = 2 * L_ / n_;
        knots_.resize(n_ + 1);
        knots_[0] = {1.0, 0.0};
        for (int i = 0; i < n_; ++i) {
            double s0 = i * h_;
            double da = num::integrate([&](double s) { return std::cos(heading(s)); }, s0, s0 + h_, 2);
            double db = num::integrate([&](double s) { return std::sin(heading(s)); }, s0, s0 + h_, 2);
            knots_[i + 1] = {knots_[i].a + da, knots_[i].b + db};
        }
        // Pin the symmetric landmarks exactly.
        knots_[n_ / 2] = {0.0, 1.0};
        knots_[n_] = {-1.0, 2.0};
        for (int i = 0; i < n_; ++i) {
            for (int c2 = 0; c2 < 2; ++c2) {
                double s0 = i * h_, s1 = s0 + h_;
                auto jet = [&](double s, double p) {
                    double th = heading(s), dth = heading_d1(s);
                    return c2 == 0 ? num::Jet{p, std::cos(th), -std::sin(th) * dth}
                                   : num::Jet{p, std::sin(th), std::cos(th) * dth};
                };
                seg_[c2].push_back(num::QuinticSegment(s0, s1, jet(s0, c2 == 0 ? knots_[i].a : knots_[i].b),
                                                       jet(s1, c2 == 0 ? knots_[i + 1].a : knots_[i + 1].b)));
            }
        }
    }

    double sharpness() const { return k_; }
    /// Arclength of each turning half; the vertical crossing sits at s = L.
    double turn_length() const { return L_; }

    /// Heading of the zero curve at arclength s (pi on the first ray).
    double heading(double s) const {
        if (s <= 0 || s >= 2 * L_) return num::pi;
        if (s <= L_) return num::pi - 0.5 * num::pi * num::flat_step(s / L_, k_);
        return 0.5 * num::pi + 0.5 * num::pi * num::flat_step((s - L_) / L_, k_);
    }

    double heading_d1(double s) const {
        if (s <= 0 || s >= 2 * L_) return 0;
        double t = s <= L_ ? s / L_ : (s - L_) / L_;
        double sign = s <= L_ ? -1 : 1;
        return sign * 0.5 * num::pi * flat_step_d1(t) / L_;
    }

    /// Point of C at arclength s.
    std::pair<double, double> curve(double s) const {
        if (s <= 0) return {1 - s, 0};
        if (s >= 2 * L_) return {-1 - (s - 2 * L_), 2};
        int i = std::min(static_cast<int>(s / h_), n_ - 1);
        return {seg_[0][i].eval(s).v, seg_[1][i].eval(s).v};
    }

    Eval eval(double a, double b) const {
        double d = a - b;
        double s = foot_of(d);
        auto [ca, cb] = curve(s);
        double th = heading(s);
        double dp = std::cos(th) - std::sin(th);
        Eval e;
        e.value = a - ca;
        e.da = -std::sin(th) / dp;
        e.db = std::cos(th) / dp;
        e.foot = s;
        return e;
    }

    double operator()(double a, double b) const { return eval(a, b).value; }

    /// Sampled zero curve for s in [s_lo, s_hi].
    std::vector<CurvePoint> zero_curve(double s_lo, double s_hi, int count) const {
        std::vector<CurvePoint> out;
        for (int i = 0; i < count; ++i) {
            double s = s_lo + (s_hi - s_lo) * i / std::max(1, count - 1);
            auto [a, b] = curve(s);
            double th = heading(s);
            out.push_back({s, a, b, -std::sin(th), std::cos(th)});
        }
        return out;
    }

private:
    double flat_step_d1(double t) const {
        if (t <= 0 || t >= 1) return 0;
        double a = std::exp(-k_ / t), b = std::exp(-k_ / (1 - t));
        double den = a + b;
        return a * b * (k_ / (t * t) + k_ / ((1 - t) * (1 - t))) / (den * den);
    }

    // Arclength s on C with c_a(s) - c_b(s) = d; that difference decreases with slope <= -1.
    double foot_of(double d) const {
        if (d >= 1) return 1 - d;
        if (d <= -3) return 2 * L_ + (-3 - d);
        int lo = 0, hi = n_;
        while (hi - lo > 1) {
            int mid = (lo + hi) / 2;
            if (knots_[mid].a - knots_[mid].b > d) lo = mid;
            else hi = mid;
        }
        double s = lo * h_ + h_ * ((knots_[lo].a - knots_[lo].b) - d) /
                                 ((knots_[lo].a - knots_[lo].b) - (knots_[hi].a - knots_[hi].b));
        for (int it = 0; it < 30; ++it) {
            auto ja = seg_[0][lo].eval(s), jb = seg_[1][lo].eval(s);
            double r = ja.v - jb.v - d;
            double step = r / (ja.d1 - jb.d1);
            s = std::clamp(s - step, lo * h_, hi * h_);
            if (std::abs(step) < 1e-15) break;
        }
        return s;
    }

    struct Knot {
        double a, b;
    };

    double k_;
    double L_;
    int n_;
    double h_;
    std::vector<Knot> knots_;
    std::vector<num::QuinticSegment> seg_[2];
};

inline SmoothingProfile make_default_profile(double transition_sharpness = 1.0) {
    return SmoothingProfile(transition_sharpness);
}

}  // namespace arbor
