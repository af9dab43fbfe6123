#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace arbor {

struct Edge {
    int from = 0;
    int to = 0;
    std::optional<int> sign;  // empty only on root-adjacent edges

    bool operator==(const Edge&) const = default;
};

/**
 * Rooted tree whose non-root-adjacent edges carry a sign in {+1,-1}.
 *
 * Used both for full trees (root-adjacent edges unsigned) and for the
 * components of a signed forest (all edges signed).
 */
class SignedRootedTree {
public:
    SignedRootedTree() = default;
    SignedRootedTree(std::vector<int> vertices, int root, std::vector<Edge> edges)
        : vertices_(std::move(vertices)), root_(root), edges_(std::move(edges)) {}

    static SignedRootedTree single(int id = 0) { return SignedRootedTree({id}, id, {}); }

    const std::vector<int>& vertices() const { return vertices_; }
    int root() const { return root_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t size() const { return vertices_.size(); }

    bool contains(int v) const {
        return std::find(vertices_.begin(), vertices_.end(), v) != vertices_.end();
    }

    std::optional<int> parent(int v) const {
        for (const auto& e : edges_)
            if (e.to == v) return e.from;
        return std::nullopt;
    }

    const Edge* edge_into(int v) const {
        for (const auto& e : edges_)
            if (e.to == v) return &e;
        return nullptr;
    }

    std::vector<int> children(int v) const {
        std::vector<int> out;
        for (const auto& e : edges_)
            if (e.from == v) out.push_back(e.to);
        std::sort(out.begin(), out.end());
        return out;
    }

    int depth(int v) const {
        int d = 0;
        for (auto p = parent(v); p; p = parent(*p)) ++d;
        return d;
    }

    /// Throws validation_error unless the tree is connected, acyclic and
    /// signed according to `root_edges_signed`.
    void validate(bool root_edges_signed = false) const {
        if (vertices_.empty()) throw validation_error("tree has no vertices");
        std::set<int> ids(vertices_.begin(), vertices_.end());
        if (ids.size() != vertices_.size()) throw validation_error("duplicate vertex id");
        if (!ids.count(root_)) throw validation_error("root not among vertices");
        if (edges_.size() + 1 != vertices_.size())
            throw validation_error("edge count must be vertex count minus one");
        std::map<int, int> parent_of;
        for (const auto& e : edges_) {
            if (!ids.count(e.from) || !ids.count(e.to)) throw validation_error("edge endpoint unknown");
            if (e.to == root_) throw validation_error("edge into root");
            if (!parent_of.emplace(e.to, e.from).second)
                throw validation_error("vertex with two parents");
            bool root_adjacent = e.from == root_;
            if (e.sign && *e.sign != 1 && *e.sign != -1) throw validation_error("sign must be +1 or -1");
            if (root_adjacent && !root_edges_signed && e.sign)
                throw validation_error("root-adjacent edge must be unsigned");
            if ((!root_adjacent || root_edges_signed) && !e.sign)
                throw validation_error("non-root edge requires a sign");
        }
        for (int v : vertices_) {
            int steps = 0;
            for (int u = v; u != root_; ++steps) {
                auto it = parent_of.find(u);
                if (it == parent_of.end() || steps > static_cast<int>(vertices_.size()))
                    throw validation_error("tree is disconnected or cyclic");
                u = it->second;
            }
        }
    }

    bool operator==(const SignedRootedTree&) const = default;

private:
    std::vector<int> vertices_;
    int root_ = 0;
    std::vector<Edge> edges_;
};

struct SignedForest {
    std::vector<SignedRootedTree> components;

    std::vector<int> vertices() const {
        std::vector<int> out;
        for (const auto& c : components) out.insert(out.end(), c.vertices().begin(), c.vertices().end());
        std::sort(out.begin(), out.end());
        return out;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& c : components) n += c.size();
        return n;
    }

    const SignedRootedTree* component_of(int v) const {
        for (const auto& c : components)
            if (c.contains(v)) return &c;
        return nullptr;
    }

    /// Coordinate index of a vertex: its rank among the sorted vertex ids.
    int coordinate(int v) const {
        auto vs = vertices();
        auto it = std::lower_bound(vs.begin(), vs.end(), v);
        if (it == vs.end() || *it != v) throw validation_error("unknown vertex " + std::to_string(v));
        return static_cast<int>(it - vs.begin());
    }

    bool is_leaf(int v) const {
        auto* c = component_of(v);
        return c && c->children(v).empty();
    }

    void validate() const {
        std::set<int> seen;
        for (const auto& c : components) {
            c.validate(true);
            for (int v : c.vertices())
                if (!seen.insert(v).second) throw validation_error("components share a vertex");
        }
    }
};

struct LeafyForest {
    SignedForest forest;
    std::set<int> marked;

    void validate() const {
        forest.validate();
        for (int v : marked) {
            if (!forest.component_of(v)) throw validation_error("marked vertex not in forest");
            if (!forest.is_leaf(v)) throw validation_error("marked vertex " + std::to_string(v) + " is not a leaf");
        }
    }
};

struct VertexChain {
    std::vector<int> vertices;  // component root first
    std::vector<int> signs;     // signs[k] belongs to edge vertices[k] -> vertices[k+1]
};

namespace detail {

inline std::string encode(const SignedRootedTree& t, int v, const std::set<int>* marked) {
    std::vector<std::string> parts;
    for (int c : t.children(v)) {
        const Edge* e = t.edge_into(c);
        std::string prefix = !e->sign ? "" : (*e->sign > 0 ? "+" : "-");
        parts.push_back(prefix + encode(t, c, marked));
    }
    std::sort(parts.begin(), parts.end());
    std::string s = "(";
    for (const auto& p : parts) s += p;
    s += ")";
    if (marked && marked->count(v)) s += "*";
    return s;
}

}  // namespace detail

/// Root- and sign-preserving canonical encoding; "()" is a single vertex.
inline std::string canonical_form(const SignedRootedTree& t) {
    return detail::encode(t, t.root(), nullptr);
}

/// Canonical encoding that also records marked vertices with a trailing '*'.
inline std::string canonical_form(const SignedRootedTree& t, const std::set<int>& marked) {
    return detail::encode(t, t.root(), &marked);
}

/**
 * Relabel a tree so that ids follow a pre-order walk with children visited
 * in canonical order; the root becomes 0.
 */
inline SignedRootedTree relabel_canonical(const SignedRootedTree& t) {
    std::map<int, int> ids;
    std::vector<Edge> edges;
    std::vector<int> vertices;
    auto visit = [&](auto&& self, int v) -> void {
        int id = static_cast<int>(vertices.size());
        ids[v] = id;
        vertices.push_back(id);
        std::vector<std::pair<std::string, int>> kids;
        for (int c : t.children(v)) {
            const Edge* e = t.edge_into(c);
            std::string prefix = !e->sign ? "" : (*e->sign > 0 ? "+" : "-");
            kids.emplace_back(prefix + detail::encode(t, c, nullptr), c);
        }
        std::sort(kids.begin(), kids.end());
        for (auto& [key, c] : kids) {
            self(self, c);
            edges.push_back({id, ids[c], t.edge_into(c)->sign});
        }
    };
    visit(visit, t.root());
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.to < b.to; });
    return SignedRootedTree(vertices, 0, edges);
}

inline constexpr int kMaxEnumerationVertices = 8;

/// One representative per isomorphism class, ordered by (size, encoding).
inline std::vector<SignedRootedTree> enumerate_signed_rooted_trees(int max_vertices) {
    if (max_vertices > kMaxEnumerationVertices)
        throw capacity_error("enumeration supports at most " + std::to_string(kMaxEnumerationVertices) +
                             " vertices, got " + std::to_string(max_vertices));
    if (max_vertices < 1) throw validation_error("max_vertices must be at least 1");

    std::vector<SignedRootedTree> out;
    std::map<std::string, SignedRootedTree> layer{{"()", SignedRootedTree::single(0)}};
    for (int size = 1; size <= max_vertices; ++size) {
        for (auto& [code, t] : layer) out.push_back(relabel_canonical(t));
        if (size == max_vertices) break;
        std::map<std::string, SignedRootedTree> next;
        for (auto& [code, t] : layer) {
            for (int v : t.vertices()) {
                std::vector<std::optional<int>> signs;
                if (v == t.root()) signs = {std::nullopt};
                else signs = {1, -1};
                for (auto s : signs) {
                    auto vs = t.vertices();
                    auto es = t.edges();
                    int id = static_cast<int>(vs.size());
                    vs.push_back(id);
                    es.push_back({v, id, s});
                    SignedRootedTree grown(vs, t.root(), es);
                    next.emplace(canonical_form(grown), std::move(grown));
                }
            }
        }
        layer = std::move(next);
    }
    return out;
}

/// Components are the subtrees hanging off the root's children; ids are kept.
inline SignedForest delete_root(const SignedRootedTree& t) {
    t.validate();
    SignedForest f;
    for (int c : t.children(t.root())) {
        std::vector<int> vs;
        std::vector<Edge> es;
        auto collect = [&](auto&& self, int v) -> void {
            vs.push_back(v);
            for (int k : t.children(v)) {
                es.push_back(*t.edge_into(k));
                self(self, k);
            }
        };
        collect(collect, c);
        std::sort(vs.begin(), vs.end());
        f.components.emplace_back(vs, c, es);
    }
    return f;
}

/// Inverse of delete_root: hang every component root off a new root.
inline SignedRootedTree attach_root(const SignedForest& f, int root_id) {
    std::vector<int> vs{root_id};
    std::vector<Edge> es;
    for (const auto& c : f.components) {
        vs.insert(vs.end(), c.vertices().begin(), c.vertices().end());
        es.push_back({root_id, c.root(), std::nullopt});
        es.insert(es.end(), c.edges().begin(), c.edges().end());
    }
    return SignedRootedTree(vs, root_id, es);
}

/// F+: one new +1 child above each marked leaf, with fresh ids.
inline SignedForest leafy_extend(const LeafyForest& lf) {
    lf.validate();
    SignedForest out = lf.forest;
    auto all = lf.forest.vertices();
    int next = all.empty() ? 0 : all.back() + 1;
    for (int v : lf.marked) {
        for (auto& c : out.components) {
            if (!c.contains(v)) continue;
            auto vs = c.vertices();
            auto es = c.edges();
            vs.push_back(next);
            es.push_back({v, next, 1});
            c = SignedRootedTree(vs, c.root(), es);
            ++next;
            break;
        }
    }
    return out;
}

/// Vertices added by leafy_extend, in the order of their marked leaves.
inline std::vector<int> leafy_extension_vertices(const LeafyForest& lf) {
    auto all = lf.forest.vertices();
    int next = all.empty() ? 0 : all.back() + 1;
    std::vector<int> out;
    for (std::size_t k = 0; k < lf.marked.size(); ++k) out.push_back(next + static_cast<int>(k));
    return out;
}

inline VertexChain chain_to_root(const SignedForest& f, int v) {
    const SignedRootedTree* c = f.component_of(v);
    if (!c) throw validation_error("unknown vertex " + std::to_string(v));
    VertexChain ch;
    for (int u = v;;) {
        ch.vertices.push_back(u);
        const Edge* e = c->edge_into(u);
        if (!e) break;
        ch.signs.push_back(e->sign.value_or(1));
        u = e->from;
    }
    std::reverse(ch.vertices.begin(), ch.vertices.end());
    std::reverse(ch.signs.begin(), ch.signs.end());
    return ch;
}

}  // namespace arbor
