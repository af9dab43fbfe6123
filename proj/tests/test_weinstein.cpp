#include <gtest/gtest.h>

#include <cmath>

#include <arbor/hypersurface.hpp>
#include <arbor/weinstein.hpp>

using namespace arbor;

namespace {

Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) out[i++] = x;
    return out;
}

SignedRootedTree tree_of(const std::string& code, int size) {
    for (const auto& t : enumerate_signed_rooted_trees(size))
        if (canonical_form(t) == code) return t;
    throw std::runtime_error("no tree " + code);
}

// Independent check of L_V omega = omega: with W the Gram matrix of omega and J = DV,
// the identity reads J^T W + W J = W.
double liouville_oracle(const VectorFieldModel& m, const Vec& z) {
    const int d = m.dim();
    const double h = 1e-6;
    Mat J(d, d);
    for (int j = 0; j < d; ++j) {
        Vec a = z, b = z;
        a[j] += h;
        b[j] -= h;
        J.col(j) = (m.eval(a) - m.eval(b)) / (2 * h);
    }
    Mat W = Mat::Zero(d, d);
    for (int i = 0; i < d / 2; ++i) {
        W(2 * i, 2 * i + 1) = 1;
        W(2 * i + 1, 2 * i) = -1;
    }
    return (J.transpose() * W + W * J - W).cwiseAbs().maxCoeff();
}

const ZeroComponent* near(const ZeroScan& s, const Vec& p, double tol) {
    for (const auto& c : s.components)
        for (const auto& q : c.points)
            if ((q - p).norm() < tol) return &c;
    return nullptr;
}

}  // namespace

TEST(Factors, YFormula) {
    auto y = make_factor(FactorKind::y);
    auto val = y.eval(0.3, 0.7);
    EXPECT_DOUBLE_EQ(val[0], 0);
    EXPECT_DOUBLE_EQ(val[1], 0.7);
    EXPECT_THROW(make_factor(FactorKind::xplus, 0), validation_error);
    EXPECT_THROW(make_factor(FactorKind::xplus, 0.3), validation_error);
}

TEST(Factors, XPlusZeros) {
    auto m = product_model({make_factor(FactorKind::xplus)});
    auto scan = find_zero_components(m, Box::cube(2, 3));
    auto* top = near(scan, v({0, 2}), 1e-8);
    auto* mid = near(scan, v({0, 1}), 1e-8);
    ASSERT_TRUE(top && mid);
    EXPECT_EQ(top->index, 0);
    EXPECT_EQ(mid->index, 1);
    EXPECT_EQ(top->dim, 0);
    EXPECT_EQ(mid->dim, 0);
}

TEST(Factors, XPlusIsRadialAwayFromSegment) {
    for (auto kind : {FactorKind::xplus, FactorKind::xminus}) {
        auto f = make_factor(kind);
        double sign = kind == FactorKind::xplus ? 1 : -1;
        for (double x = -3; x <= 3; x += 0.05)
            for (double y = -3; y <= 3; y += 0.05) {
                double yy = std::clamp(sign * y, 1.0, 2.0);
                if (std::hypot(x, sign * y - yy) < 1) continue;
                auto val = f.eval(x, y);
                EXPECT_NEAR(val[0], 0.5 * x, 1e-12);
                EXPECT_NEAR(val[1], 0.5 * y, 1e-12);
            }
    }
}

TEST(Model, SingleVertexHasNoPairs) {
    auto m = build_model(SignedRootedTree::single());
    EXPECT_EQ(m.pairs, 0);
    EXPECT_EQ(m.tag, "tree:()");
    EXPECT_THROW(build_model(enumerate_signed_rooted_trees(6).back()), capacity_error);
}

TEST(Model, LiouvilleIdentityAllSmallTrees) {
    for (const auto& t : enumerate_signed_rooted_trees(4)) {
        auto m = build_model(t);
        if (m.pairs == 0) continue;
        auto pts = random_points(m.dim(), 1000, 3, 7);
        double worst = 0;
        for (const auto& z : pts) worst = std::max(worst, liouville_oracle(m, z));
        EXPECT_LT(worst, 1e-5) << canonical_form(t);
        EXPECT_NEAR(liouville_residual(m, pts), worst, 1e-6);
    }
}

TEST(Model, LyapunovPositiveOffZeros) {
    for (const auto& t : enumerate_signed_rooted_trees(3)) {
        auto m = build_model(t);
        if (m.pairs == 0) continue;
        auto rep = lyapunov_check(m, random_points(m.dim(), 10000, 3, 3), 1e-12);
        EXPECT_TRUE(rep.holds) << canonical_form(t);
        EXPECT_GT(rep.delta_max, 0);
    }
}

TEST(Lyapunov, RadialMargin) {
    auto m = radial_model(2);
    auto pts = random_points(4, 1000, 3, 5);
    // dphi(V) = |z|^2 against |V|^2 + |dphi|^2 = 17/4 |z|^2.
    auto rep = lyapunov_check(m, pts, 4.0 / 17 - 1e-12);
    EXPECT_TRUE(rep.holds);
    EXPECT_NEAR(rep.delta_max, 4.0 / 17, 1e-12);
    EXPECT_FALSE(lyapunov_check(m, pts, 0.25).holds);
    auto at_zero = lyapunov_check(m, {Vec::Zero(4)}, 0.1);
    EXPECT_EQ(at_zero.excluded, 1);
    EXPECT_EQ(at_zero.checked, 0);
}

TEST(Zeros, RadialField) {
    auto scan = find_zero_components(radial_model(1), Box::cube(2, 1));
    ASSERT_EQ(scan.components.size(), 1u);
    const auto& c = scan.components[0];
    EXPECT_LT(c.representative.norm(), 1e-10);
    EXPECT_EQ(c.index, 0);
    EXPECT_EQ(c.split.E_zero.cols(), 0);
    EXPECT_EQ(c.split.E_plus.cols(), 2);
}

TEST(Zeros, ProductWithY) {
    auto m = product_model({make_factor(FactorKind::xplus), make_factor(FactorKind::y)});
    ZeroOptions zo;
    zo.cell = 0.25;
    auto scan = find_zero_components(m, Box::cube(4, 2.5), zo);
    auto* top = near(scan, v({0, 2, 0.5, 0}), 1e-6);
    auto* mid = near(scan, v({0, 1, 0.5, 0}), 1e-6);
    ASSERT_TRUE(top && mid);
    EXPECT_NE(top, mid);
    EXPECT_EQ(top->dim, 1);
    EXPECT_EQ(mid->dim, 1);
    EXPECT_EQ(top->index, 0);
    EXPECT_EQ(mid->index, 1);
    for (const auto* c : {top, mid}) {
        EXPECT_EQ(c->split.E_plus.cols() + c->split.E_minus.cols() + c->split.E_zero.cols(), 4);
        EXPECT_TRUE(c->morse_bott);
    }
}

TEST(Zeros, ThickenedDisk) {
    const double delta = 0.25;
    auto m = thicken_family(delta, 1.0, 2);
    EXPECT_LT(m.eval(v({std::sqrt(delta / 2), 0, 0, 0})).norm(), 1e-14);
    ZeroOptions zo;
    zo.cell = 0.1;
    auto scan = find_zero_components(m, Box::cube(4, 1.0), zo);
    ASSERT_EQ(scan.components.size(), 1u);
    const auto& c = scan.components[0];
    EXPECT_EQ(c.dim, 2);
    EXPECT_TRUE(c.morse_bott);
    EXPECT_TRUE(c.has_boundary);
    EXPECT_TRUE(c.boundary_repellent);
    // Zero points are cell-resolved: within two cells of the disk, and the disk is covered.
    double reach = 0;
    for (const auto& z : c.points) {
        EXPECT_LE(std::hypot(z[0], z[2]), std::sqrt(delta) + 2 * zo.cell);
        EXPECT_LT(std::hypot(z[1], z[3]), 2 * zo.cell);
        reach = std::max(reach, std::hypot(z[0], z[2]));
    }
    EXPECT_GE(reach, std::sqrt(delta) - 2 * zo.cell);
}

TEST(Thicken, EndpointsOfFamily) {
    auto m0 = thicken_family(0.25, 0.0, 2);
    for (const auto& z : random_points(4, 100, 1.0, 9)) {
        Vec q = z;
        q[1] = q[3] = 0;
        Vec val = m0.eval(q);
        EXPECT_NEAR(val[0], 0.5 * q[0], 1e-12);
        EXPECT_NEAR(val[2], 0.5 * q[2], 1e-12);
    }
    // At the origin the q-eigenvalues follow 1/2 (1 - t).
    for (double t : {0.0, 0.25, 0.5, 1.0}) {
        auto split = eigen_split(thicken_family(0.25, t, 2).jacobian(Vec::Zero(4), 1e-7));
        std::vector<double> re;
        for (auto e : split.eigenvalues) re.push_back(e.real());
        std::sort(re.begin(), re.end());
        EXPECT_NEAR(re[0], 0.5 * (1 - t), 1e-6) << t;
        EXPECT_NEAR(re[1], 0.5 * (1 - t), 1e-6) << t;
    }
    EXPECT_THROW(thicken_family(0.25, 1.5, 2), validation_error);
}

TEST(Thicken, LiouvilleAlongFamily) {
    for (double t : {0.0, 0.5, 1.0}) {
        auto m = thicken_family(0.25, t, 2);
        double worst = 0;
        for (const auto& z : random_points(4, 300, 1.5, 3)) worst = std::max(worst, liouville_oracle(m, z));
        EXPECT_LT(worst, 1e-5);
    }
}

TEST(StableManifold, RadialAndY) {
    auto sk = skeleton(radial_model(1), Box::cube(2, 3));
    ASSERT_FALSE(sk.points.empty());
    for (const auto& p : sk.points) EXPECT_LT(p.norm(), 1e-9);

    auto my = product_model({make_factor(FactorKind::y)});
    auto scan = find_zero_components(my, Box::cube(2, 1));
    ASSERT_EQ(scan.components.size(), 1u);
    auto part = stable_manifold_sample(my, scan.components[0], Box::cube(2, 1), 200, 0.05, 1e-3);
    for (const auto& p : part.points) EXPECT_LT(std::abs(p[1]), 1e-9);
}

TEST(StableManifold, XPlusSeparatrix) {
    auto m = product_model({make_factor(FactorKind::xplus)});
    Box box = Box::cube(2, 3);
    auto scan = find_zero_components(m, box);
    auto* mid = near(scan, v({0, 1}), 1e-8);
    ASSERT_TRUE(mid);
    auto part = stable_manifold_sample(m, *mid, box, 200, 0.05, 1e-3);
    double hi = -1;
    for (const auto& p : part.points) {
        EXPECT_LT(std::abs(p[0]), 1e-6);
        EXPECT_GE(p[1], -1e-6);
        EXPECT_LE(p[1], 2 + 1e-6);
        hi = std::max(hi, p[1]);
    }
    EXPECT_GT(hi, 1.9);
}

TEST(Skeleton, TwoVertexMatchesLagrangianModel) {
    auto t = tree_of("(())", 2);
    auto m = build_model(t);
    SkeletonParams sp;
    sp.cell = sp.spacing = 0.05;
    auto sk = skeleton(m, Box::cube(2, 3), sp);
    EXPECT_LT(isotropy_defect(sk), 1e-3);
    auto h = build_smoothed(delete_root(t), make_default_profile());
    auto lm = lagrangian_model(h, 0.05, 2.0);
    EXPECT_LE(num::hausdorff(skeleton_as_cotangent(sk), lm.points), 0.05);
}

TEST(Skeleton, ThreeVertexPathHasThreeBones) {
    for (const char* code : {"((+()))", "((-()))"}) {
        auto m = build_model(tree_of(code, 3));
        SkeletonParams sp;
        sp.cell = 0.2;
        sp.spacing = 0.1;
        auto sk = skeleton(m, Box::cube(4, 3), sp);
        EXPECT_EQ(lagrangian_bones(sk).size(), 3u) << code;
    }
}

TEST(Joints, RadialAndTwoVertex) {
    auto rad = skeleton(radial_model(1), Box::cube(2, 3));
    ASSERT_EQ(rad.components.size(), 1u);
    auto self = joint_detect(radial_model(1), rad, rad.components[0].label, rad.components[0].label, 0.1,
                             Box::cube(2, 3));
    EXPECT_TRUE(self.points.empty());

    auto m = build_model(tree_of("(())", 2));
    SkeletonParams sp;
    sp.cell = sp.spacing = 0.05;
    Box box = Box::cube(2, 3);
    auto sk = skeleton(m, box, sp);
    int root = -1, upper = -1;
    for (const auto& c : sk.components) {
        if (c.dim == 1) root = c.label;
        if (c.dim == 0 && c.index == 1) upper = c.label;
    }
    ASSERT_GE(root, 0);
    ASSERT_GE(upper, 0);
    auto j = joint_detect(m, sk, upper, root, 0.1, box);
    ASSERT_EQ(j.points.size(), 1u);
    EXPECT_LT(std::abs(j.points[0][1]), 0.1);
    EXPECT_TRUE(j.index_ok);
    EXPECT_TRUE(j.phi_ordered);
    EXPECT_LT(j.phi_lo, j.phi_hi);
}
