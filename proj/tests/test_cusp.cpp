#include <gtest/gtest.h>

#include <cmath>

#include <arbor/cusp.hpp>

using namespace arbor;
using namespace arbor::cusp;

namespace {

// Unsmoothed broken parabola written out independently of the library.
double h_oracle(double eps, int sign, double u) {
    bool linear = sign > 0 ? u <= 2 * eps : u >= -2 * eps;
    return linear ? sign * 4 * eps * u - 4 * eps * eps : u * u;
}

// Plain symplectic pairing on (q, u, v, s, r, p) with one q coordinate.
double omega1(const Vec& a, const Vec& b) {
    return a[0] * b[5] - a[5] * b[0] + a[1] * b[2] - a[2] * b[1] + a[3] * b[4] - a[4] * b[3];
}

}  // namespace

TEST(HProfile, BranchesMeetAtTwoEpsilon) {
    for (double eps : {0.2, 0.1, 0.05}) {
        EXPECT_NEAR(h_oracle(eps, 1, 2 * eps), 4 * eps * eps, 1e-15);
        EXPECT_NEAR(h_oracle(eps, 1, 2 * eps + 1e-12), 4 * eps * eps, 1e-11);
        EXPECT_NEAR(h_oracle(eps, -1, -2 * eps), 4 * eps * eps, 1e-15);
        auto hp = make_h(eps, 1), hm = make_h(eps, -1);
        EXPECT_DOUBLE_EQ(hm(0), -4 * eps * eps);
        EXPECT_DOUBLE_EQ(hp(0), -4 * eps * eps);
    }
}

TEST(HProfile, EqualsRawOutsideWindow) {
    const double eps = 0.1;
    for (int sign : {1, -1}) {
        auto h = make_h(eps, sign);
        EXPECT_NEAR(h.window_hi() - h.window_lo(), eps / 8, 1e-15);
        for (double u = -1; u <= 1; u += 1.0 / 512) {
            if (u > h.window_lo() && u < h.window_hi()) continue;
            EXPECT_EQ(h(u), h_oracle(eps, sign, u)) << u;
        }
    }
}

TEST(HProfile, SmoothAcrossWindow) {
    const double eps = 0.1;
    for (int sign : {1, -1}) {
        auto h = make_h(eps, sign);
        for (double e : {h.window_lo(), h.window_hi()}) {
            auto a = h.eval(e - 1e-9), b = h.eval(e + 1e-9);
            EXPECT_NEAR(a.v, b.v, 1e-8);
            EXPECT_NEAR(a.d1, b.d1, 1e-7);
            EXPECT_NEAR(a.d2, b.d2, 1e-5);
        }
        // End slopes are 4 eps and 4 eps + width; the blend stays close to that range.
        for (double u = h.window_lo(); u <= h.window_hi(); u += h.width() / 64) {
            double d = h.eval(u).d1;
            EXPECT_NEAR(sign * d, 4 * eps + h.width() / 2, h.width());
            double fd = (h(u + 1e-7) - h(u - 1e-7)) / 2e-7;
            EXPECT_NEAR(d, fd, 1e-6);
        }
    }
    EXPECT_THROW(HProfile(0.1, 1, 0.1), validation_error);
    EXPECT_THROW(HProfile(0.1, 0, 0.01), validation_error);
    EXPECT_THROW(HProfile(0, 1, 0.01), validation_error);
}

TEST(Roots, DiagonalIntersections) {
    for (double eps : {0.2, 0.1, 0.05}) {
        auto m = cusp_intersections(eps);
        EXPECT_NEAR(m.u_plus, 4 * eps / 3, 1e-10);
        EXPECT_NEAR(m.u_minus, -4 * eps / 5, 1e-10);
        EXPECT_NEAR(m.v_plus, eps * m.u_plus, 1e-12);
        EXPECT_NEAR(m.v_minus, eps * m.u_minus, 1e-12);
        EXPECT_EQ(diagonal_roots(make_h(eps, 1), -3 * eps, 3 * eps).size(), 1u);
        EXPECT_EQ(diagonal_roots(make_h(eps, -1), -3 * eps, 3 * eps).size(), 1u);
    }
}

TEST(Resolution, StrataSatisfyTheirEquations) {
    const double eps = 0.1;
    auto res = resolve_sigma10(eps, {}, 1, 3000, 7);
    ASSERT_EQ(res.strata.size(), 3u);
    int total = 0;
    for (const auto& st : res.strata) {
        total += static_cast<int>(st.points.size());
        for (std::size_t i = 0; i < st.points.size(); ++i) {
            const Vec& x = st.points[i];
            double u = x[1], v = x[2];
            EXPECT_EQ(x[3], 0);
            EXPECT_EQ(x[4], 0);
            EXPECT_EQ(x[5], 0);
            if (st.name == "thickened") {
                EXPECT_LE(std::abs(u), 2 * eps + 1e-12);
                EXPECT_NEAR(v, eps * u, 1e-14);
            } else if (st.name == "sheet+") {
                EXPECT_GE(u, 4 * eps / 3 - 1e-10);
                EXPECT_NEAR(v, make_h(eps, 1)(u), 1e-14);
            } else {
                EXPECT_EQ(st.name, "sheet-");
                EXPECT_LE(u, -4 * eps / 5 + 1e-10);
                EXPECT_NEAR(v, make_h(eps, -1)(u), 1e-14);
            }
            // Strata are isotropic.
            const Mat& F = st.frames[i];
            for (int a = 0; a < F.cols(); ++a)
                for (int b = 0; b < F.cols(); ++b) EXPECT_NEAR(omega1(F.col(a), F.col(b)), 0, 1e-14);
        }
    }
    EXPECT_EQ(total, 3000);
    EXPECT_THROW(resolve_sigma10(0.3), validation_error);
    EXPECT_THROW(resolve_sigma10(0.1, {1.0, -0.2, 0.8}), validation_error);
}

TEST(Audit, ResolvedIsTransverse) {
    for (double eps : {0.2, 0.1, 0.05}) {
        auto res = resolve_sigma10(eps, {}, 1, 10000, 1);
        auto a = tangency_audit(res.strata, FoliationLocal{1});
        EXPECT_EQ(a.samples, 10000);
        EXPECT_EQ(a.flagged, 0);
        EXPECT_EQ(a.max_dim, 0);
        EXPECT_TRUE(a.tangential.empty());
        // The tilted direction d_u + h' d_v meets the leaf at angle atan|h'|; d_q is orthogonal to it.
        double oracle = std::numeric_limits<double>::infinity();
        for (const auto& st : res.strata)
            for (const Mat& F : st.frames) oracle = std::min(oracle, std::atan(std::abs(F(2, 1) / F(1, 1))));
        EXPECT_NEAR(a.min_angle, oracle, 1e-9);
        EXPECT_GE(a.min_angle, 0.9 * std::atan(eps));
    }
}

TEST(Audit, UnresolvedTouchesAtTheCuspEdge) {
    auto st = unresolved_cusp(1, 0.5, 1001, 3);
    auto a = tangency_audit({st}, FoliationLocal{1});
    EXPECT_EQ(a.max_dim, 1);
    ASSERT_FALSE(a.tangential.empty());
    for (auto [s, i] : a.tangential) EXPECT_NEAR(st.points[i][1], 0, 1e-12);
}

TEST(Closeness, ShrinksWithEpsilon) {
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        auto c = c1_closeness(eps);
        EXPECT_LT(c.hausdorff, prev);
        EXPECT_LE(c.hausdorff, 2 * eps);
        EXPECT_EQ(c.max_frame_angle, 0);
        prev = c.hausdorff;
    }
    EXPECT_THROW(c1_closeness(0.5, 1.0), validation_error);
}

TEST(Chart, Verdicts) {
    auto at = [](double q, double u) {
        Vec x(2);
        x << q, u;
        return x;
    };
    auto c = cusp_chart_check(cusp_front(), at(0.3, 0));
    EXPECT_EQ(c.verdict, ChartVerdict::sigma10);
    EXPECT_NEAR(std::abs(c.kernel[1]), 1, 1e-12);
    EXPECT_EQ(cusp_chart_check(fold_front(), at(0.3, 0)).verdict, ChartVerdict::not_sigma10);
    EXPECT_THROW(cusp_chart_check(immersion_front(), at(0, 0)), validation_error);
    EXPECT_THROW(cusp_chart_check(cusp_front(), at(0, 0.5)), validation_error);
    EXPECT_EQ(to_string(ChartVerdict::sigma10), "sigma10");
}

TEST(Stratify, CuspEdge) {
    auto tb = tb_stratify(cusp_front(), 0.01);
    ASSERT_FALSE(tb.sigma1.empty());
    EXPECT_LE(tb.max_offset(1), tb.spacing);
    EXPECT_EQ(tb.sigma1_codim, 1);
    EXPECT_TRUE(tb.sigma2plus.empty());
    EXPECT_TRUE(tb.all_sigma10());
}

TEST(Stratify, FoldAndImmersion) {
    auto fold = tb_stratify(fold_front(), 0.02);
    ASSERT_FALSE(fold.sigma1.empty());
    EXPECT_EQ(fold.sigma10_count, 0);
    EXPECT_FALSE(fold.all_sigma10());
    auto imm = tb_stratify(immersion_front(), 0.05);
    EXPECT_TRUE(imm.sigma1.empty());
    EXPECT_EQ(imm.sigma1_dim, -1);
}

TEST(Stratify, SwallowtailEdgeHasCodimOne) {
    auto tb = tb_stratify(swallowtail_front(0.5), 0.01);
    ASSERT_FALSE(tb.sigma1.empty());
    EXPECT_EQ(tb.sigma1_codim, 1);
    // Corank-one points lie near the cuspidal edge a = -6u^2.
    for (int i : tb.sigma1) {
        const Vec& x = tb.samples[i].x;
        EXPECT_LT(std::abs(x[0] + 6 * x[1] * x[1]), 0.1) << x.transpose();
    }
}

TEST(Stratify, GridCapacity) {
    EXPECT_THROW(tb_stratify(cusp_front(3), 0.001), capacity_error);
    EXPECT_THROW(tb_stratify(cusp_front(), 0), validation_error);
}
