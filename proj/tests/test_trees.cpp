#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <arbor/trees.hpp>

using namespace arbor;

namespace {

// Brute-force oracle: every labeled tree on {0..n-1} rooted at 0 (parent arrays),
// every sign assignment on non-root edges, reduced by an independent encoding.
std::string oracle_code(const std::vector<int>& parent, const std::vector<int>& sign, int v) {
    std::vector<std::string> kids;
    for (int c = 1; c < static_cast<int>(parent.size()); ++c) {
        if (parent[c] != v) continue;
        char tag = v == 0 ? 'r' : (sign[c] > 0 ? 'p' : 'm');
        kids.push_back(tag + oracle_code(parent, sign, c));
    }
    std::sort(kids.begin(), kids.end());
    std::string s = "[";
    for (auto& k : kids) s += k;
    return s + "]";
}

std::string oracle_code(const SignedRootedTree& t) {
    std::map<int, int> idx;
    idx[t.root()] = 0;
    int next = 1;
    for (int v : t.vertices())
        if (v != t.root()) idx[v] = next++;
    std::vector<int> parent(t.size(), -1), sign(t.size(), 0);
    for (const auto& e : t.edges()) {
        parent[idx[e.to]] = idx[e.from];
        sign[idx[e.to]] = e.sign.value_or(0);
    }
    return oracle_code(parent, sign, 0);
}

std::set<std::string> oracle_classes(int n) {
    std::set<std::string> out;
    std::vector<int> parent(n, -1);
    std::function<void(int)> assign = [&](int i) {
        if (i == n) {
            for (int v = 1; v < n; ++v) {
                int u = v, steps = 0;
                while (u != 0 && steps <= n) u = parent[u], ++steps;
                if (u != 0) return;
            }
            std::vector<int> signed_edges;
            for (int v = 1; v < n; ++v)
                if (parent[v] != 0) signed_edges.push_back(v);
            for (int mask = 0; mask < (1 << signed_edges.size()); ++mask) {
                std::vector<int> sign(n, 0);
                for (std::size_t k = 0; k < signed_edges.size(); ++k) sign[signed_edges[k]] = (mask >> k) & 1 ? -1 : 1;
                out.insert(oracle_code(parent, sign, 0));
            }
            return;
        }
        for (int p = 0; p < n; ++p) {
            if (p == i) continue;
            parent[i] = p;
            assign(i + 1);
        }
    };
    if (n == 1) return {"[]"};
    assign(1);
    return out;
}

SignedRootedTree chain3(int sign) { return SignedRootedTree({0, 1, 2}, 0, {{0, 1, std::nullopt}, {1, 2, sign}}); }

}  // namespace

TEST(Enumerate, SmallCounts) {
    EXPECT_EQ(enumerate_signed_rooted_trees(1).size(), 1u);
    EXPECT_EQ(enumerate_signed_rooted_trees(2).size(), 2u);
    EXPECT_EQ(enumerate_signed_rooted_trees(3).size(), 5u);
}

TEST(Enumerate, MatchesBruteForceUpToFive) {
    for (int max = 1; max <= 5; ++max) {
        std::set<std::string> expected;
        for (int n = 1; n <= max; ++n) {
            auto c = oracle_classes(n);
            expected.insert(c.begin(), c.end());
        }
        auto trees = enumerate_signed_rooted_trees(max);
        std::set<std::string> got, canon;
        for (const auto& t : trees) {
            EXPECT_NO_THROW(t.validate());
            got.insert(oracle_code(t));
            canon.insert(canonical_form(t));
        }
        EXPECT_EQ(got.size(), trees.size()) << "duplicate class at max " << max;
        EXPECT_EQ(canon.size(), trees.size());
        EXPECT_EQ(got, expected) << "max " << max;
    }
}

TEST(Enumerate, CapacityBound) {
    EXPECT_THROW(enumerate_signed_rooted_trees(kMaxEnumerationVertices + 1), capacity_error);
    EXPECT_THROW(enumerate_signed_rooted_trees(0), validation_error);
}

TEST(Validate, RejectsMalformedTrees) {
    EXPECT_THROW(SignedRootedTree({0, 1}, 0, {{0, 1, 1}}).validate(), validation_error);
    EXPECT_THROW(chain3(0).validate(), validation_error);
    EXPECT_THROW(SignedRootedTree({0, 1, 2}, 0, {{0, 1, std::nullopt}, {1, 2, std::nullopt}}).validate(),
                 validation_error);
    EXPECT_THROW(SignedRootedTree({0, 1, 2}, 0, {{0, 1, std::nullopt}, {2, 1, 1}}).validate(), validation_error);
    EXPECT_THROW(SignedRootedTree({0, 1, 2}, 0, {{0, 1, std::nullopt}, {1, 2, 1}, {2, 1, 1}}).validate(),
                 validation_error);
    EXPECT_NO_THROW(chain3(-1).validate());
}

TEST(DeleteRoot, Examples) {
    EXPECT_TRUE(delete_root(SignedRootedTree::single()).components.empty());
    auto f2 = delete_root(SignedRootedTree({0, 1}, 0, {{0, 1, std::nullopt}}));
    ASSERT_EQ(f2.components.size(), 1u);
    EXPECT_EQ(f2.size(), 1u);
    auto f3 = delete_root(chain3(1));
    ASSERT_EQ(f3.components.size(), 1u);
    const auto& c = f3.components[0];
    EXPECT_EQ(c.size(), 2u);
    ASSERT_EQ(c.edges().size(), 1u);
    EXPECT_EQ(c.edges()[0].sign, std::optional<int>(1));
}

TEST(DeleteRoot, AttachRootRoundTrip) {
    for (const auto& t : enumerate_signed_rooted_trees(5)) {
        auto back = attach_root(delete_root(t), t.root());
        EXPECT_NO_THROW(back.validate());
        EXPECT_EQ(canonical_form(back), canonical_form(t));
    }
}

TEST(LeafyExtend, Examples) {
    SignedForest one{{SignedRootedTree::single(0)}};
    auto e1 = leafy_extend({one, {0}});
    EXPECT_EQ(e1.size(), 2u);
    EXPECT_EQ(canonical_form(e1.components[0]), "(+())");
    EXPECT_EQ(leafy_extend({one, {}}).size(), 1u);
    SignedForest two{{SignedRootedTree({0, 1}, 0, {{0, 1, -1}})}};
    auto e2 = leafy_extend({two, {1}});
    EXPECT_EQ(e2.size(), 3u);
    EXPECT_EQ(chain_to_root(e2, 2).vertices, (std::vector<int>{0, 1, 2}));
    EXPECT_THROW(leafy_extend({two, {0}}), validation_error);
}

TEST(LeafyExtend, VertexCountAddsMarked) {
    for (const auto& t : enumerate_signed_rooted_trees(5)) {
        auto f = delete_root(t);
        std::set<int> leaves;
        for (int v : f.vertices())
            if (f.is_leaf(v)) leaves.insert(v);
        EXPECT_EQ(leafy_extend({f, leaves}).size(), f.size() + leaves.size());
    }
}

TEST(Canonical, IsomorphicLabelingsAgree) {
    SignedRootedTree a({0, 1, 2}, 0, {{0, 1, std::nullopt}, {0, 2, std::nullopt}});
    SignedRootedTree b({5, 9, 7}, 5, {{5, 7, std::nullopt}, {5, 9, std::nullopt}});
    EXPECT_EQ(canonical_form(a), canonical_form(b));
    EXPECT_EQ(canonical_form(SignedRootedTree::single()), "()");
    EXPECT_NE(canonical_form(chain3(1)), canonical_form(chain3(-1)));
    EXPECT_NE(canonical_form(chain3(1), {2}), canonical_form(chain3(1)));
}

TEST(ChainToRoot, Examples) {
    SignedForest f = delete_root(SignedRootedTree({0, 1, 2, 3}, 0, {{0, 1, std::nullopt}, {1, 2, -1}, {2, 3, 1}}));
    auto c0 = chain_to_root(f, 1);
    EXPECT_EQ(c0.vertices, std::vector<int>{1});
    EXPECT_TRUE(c0.signs.empty());
    auto c1 = chain_to_root(f, 2);
    EXPECT_EQ(c1.vertices, (std::vector<int>{1, 2}));
    EXPECT_EQ(c1.signs, std::vector<int>{-1});
    auto c2 = chain_to_root(f, 3);
    EXPECT_EQ(c2.vertices, (std::vector<int>{1, 2, 3}));
    EXPECT_EQ(c2.signs, (std::vector<int>{-1, 1}));
    EXPECT_THROW(chain_to_root(f, 7), validation_error);
}
