#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "classifier.hpp"
#include "cusp.hpp"
#include "errors.hpp"
#include "hypersurface.hpp"
#include "trees.hpp"
#include "weinstein.hpp"

namespace arbor::io {

using json = nlohmann::json;
using num::Mat;
using num::Vec;

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw numeric_error("sha256 digest failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

/// Digest of the canonical (key-sorted, compact) serialization.
inline std::string config_digest(const json& config) { return sha256_hex(config.dump()); }

inline json to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

/// Matrix as a list of columns.
inline json columns_to_json(const Mat& m) {
    json a = json::array();
    for (int j = 0; j < m.cols(); ++j) a.push_back(to_json(Vec(m.col(j))));
    return a;
}

inline Vec vec_from_json(const json& j, int expected = -1) {
    if (!j.is_array()) throw validation_error("expected a numeric array");
    Vec v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) {
        if (!j[i].is_number()) throw validation_error("expected a numeric array");
        v[i] = j[i].get<double>();
    }
    if (expected >= 0 && v.size() != expected) throw validation_error("array has wrong length");
    return v;
}

inline Mat columns_from_json(const json& j, int rows) {
    if (!j.is_array()) throw validation_error("frame must be a list of columns");
    Mat m(rows, static_cast<int>(j.size()));
    for (int c = 0; c < m.cols(); ++c) m.col(c) = vec_from_json(j[c], rows);
    return m;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw validation_error(path + ": " + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot write " + path);
    out << text;
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

inline json tree_to_json(const SignedRootedTree& t, const std::set<int>& marked = {}) {
    json j;
    j["vertices"] = t.vertices();
    j["root"] = t.root();
    json edges = json::array();
    for (const auto& e : t.edges()) {
        json je{{"from", e.from}, {"to", e.to}};
        je["sign"] = e.sign ? json(*e.sign) : json(nullptr);
        edges.push_back(je);
    }
    j["edges"] = edges;
    j["marked"] = std::vector<int>(marked.begin(), marked.end());
    return j;
}

struct TreeRecord {
    SignedRootedTree tree;
    std::set<int> marked;
};

inline TreeRecord tree_from_json(const json& j) {
    auto need = [&](const char* key) -> const json& {
        if (!j.is_object() || !j.contains(key)) throw validation_error(std::string("tree is missing \"") + key + "\"");
        return j.at(key);
    };
    const json& vs = need("vertices");
    const json& root = need("root");
    const json& es = need("edges");
    if (!vs.is_array() || !root.is_number_integer() || !es.is_array()) throw validation_error("malformed tree");
    std::vector<int> vertices;
    for (const auto& v : vs) {
        if (!v.is_number_integer()) throw validation_error("vertex ids must be integers");
        vertices.push_back(v.get<int>());
    }
    std::vector<Edge> edges;
    for (const auto& e : es) {
        if (!e.is_object() || !e.contains("from") || !e.contains("to") || !e["from"].is_number_integer() ||
            !e["to"].is_number_integer())
            throw validation_error("malformed edge");
        Edge edge{e["from"].get<int>(), e["to"].get<int>(), std::nullopt};
        if (e.contains("sign") && !e["sign"].is_null()) {
            if (!e["sign"].is_number_integer()) throw validation_error("edge sign must be +1, -1 or null");
            edge.sign = e["sign"].get<int>();
        }
        edges.push_back(edge);
    }
    TreeRecord rec{SignedRootedTree(vertices, root.get<int>(), edges), {}};
    rec.tree.validate();
    if (j.contains("marked")) {
        if (!j["marked"].is_array()) throw validation_error("marked must be a list");
        for (const auto& m : j["marked"]) {
            if (!m.is_number_integer()) throw validation_error("marked ids must be integers");
            int v = m.get<int>();
            if (v == rec.tree.root() || !rec.tree.contains(v) || !rec.tree.children(v).empty())
                throw validation_error("marked vertex must be a non-root leaf");
            rec.marked.insert(v);
        }
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

inline json sample_record(const SamplePoint& s) {
    return json{{"p", to_json(s.p)}, {"stratum", s.stratum}, {"frame", columns_to_json(s.frame)},
                {"normal", to_json(s.normal)}};
}

inline json arrangement_to_json(const Arrangement& arr) {
    json j;
    j["dim"] = arr.dim;
    j["spacing"] = arr.spacing;
    j["box"] = {{"lo", to_json(arr.box.lo)}, {"hi", to_json(arr.box.hi)}};
    json names = json::array(), samples = json::array();
    for (int i = 0; i < static_cast<int>(arr.sheets.size()); ++i) {
        names.push_back(arr.sheets[i].name);
        for (auto s : arr.sheets[i].points) {
            s.stratum = i;
            samples.push_back(sample_record(s));
        }
    }
    j["strata"] = names;
    j["samples"] = samples;
    return j;
}

/// Inverse of arrangement_to_json. A missing normal is recovered from the frame.
inline Arrangement arrangement_from_json(const json& j) {
    if (!j.is_object() || !j.contains("dim") || !j.contains("spacing") || !j.contains("samples") ||
        !j.contains("box"))
        throw validation_error("sample file must carry dim, spacing, box and samples");
    Arrangement arr;
    if (!j["dim"].is_number_integer() || !j["spacing"].is_number()) throw validation_error("malformed header");
    arr.dim = j["dim"].get<int>();
    arr.spacing = j["spacing"].get<double>();
    if (arr.dim < 1 || arr.dim > 6) throw validation_error("dimension out of range");
    if (!(arr.spacing > 0)) throw validation_error("spacing must be positive");
    arr.box = {vec_from_json(j["box"].value("lo", json()), arr.dim), vec_from_json(j["box"].value("hi", json()), arr.dim)};
    int count = 0;
    if (j.contains("strata")) {
        if (!j["strata"].is_array()) throw validation_error("strata must be a list");
        count = static_cast<int>(j["strata"].size());
    }
    if (!j["samples"].is_array()) throw validation_error("samples must be a list");
    std::vector<SamplePoint> pts;
    for (const auto& r : j["samples"]) {
        if (!r.is_object() || !r.contains("p") || !r.contains("stratum") || !r.contains("frame"))
            throw validation_error("sample record needs p, stratum and frame");
        SamplePoint s;
        s.p = vec_from_json(r["p"], arr.dim);
        if (!r["stratum"].is_number_integer() || r["stratum"].get<int>() < 0)
            throw validation_error("stratum id must be a non-negative integer");
        s.stratum = r["stratum"].get<int>();
        s.frame = columns_from_json(r["frame"], arr.dim);
        if (s.frame.cols() != arr.dim - 1) throw validation_error("frame must have dim - 1 columns");
        if (r.contains("normal")) {
            s.normal = vec_from_json(r["normal"], arr.dim);
        } else {
            Mat c = num::orth_complement(s.frame, arr.dim);
            if (c.cols() != 1) throw validation_error("degenerate frame");
            s.normal = c.col(0);
        }
        if (!(s.normal.norm() > 0.5)) throw validation_error("normal must be a unit vector");
        count = std::max(count, s.stratum + 1);
        pts.push_back(std::move(s));
    }
    arr.sheets.resize(count);
    for (int i = 0; i < count; ++i) {
        arr.sheets[i].name = j.contains("strata") && i < static_cast<int>(j["strata"].size()) && j["strata"][i].is_string()
                                 ? j["strata"][i].get<std::string>()
                                 : "s" + std::to_string(i);
    }
    for (auto& s : pts) arr.sheets[s.stratum].points.push_back(std::move(s));
    return arr;
}

inline json germ_report_to_json(const GermReport& r) {
    json j;
    j["verdict"] = to_string(r.verdict);
    j["tree"] = r.tree ? tree_to_json(*r.tree, r.marked) : json(nullptr);
    j["failed_condition"] = r.failed_condition;
    j["reason"] = r.reason;
    json w = json::array();
    for (const auto& p : r.witness_points) w.push_back(to_json(p));
    j["witness_points"] = w;
    j["sheet_vertex"] = r.sheet_vertex;
    return j;
}

inline json zero_component_to_json(const ZeroComponent& c) {
    return json{{"label", c.label},
                {"position", to_json(c.representative)},
                {"points", static_cast<int>(c.points.size())},
                {"dim", c.dim},
                {"index", c.index},
                {"morse_bott", c.morse_bott},
                {"max_angle", c.max_angle},
                {"has_boundary", c.has_boundary},
                {"boundary_repellent", c.boundary_repellent},
                {"phi", c.phi}};
}

inline json skeleton_to_json(const SkeletonSample& s) {
    json samples = json::array();
    for (int i = 0; i < static_cast<int>(s.points.size()); ++i) {
        json r{{"p", to_json(s.points[i])}, {"stratum", s.bone[i]}, {"bone", s.bone[i]}, {"phi", s.phi[i]}};
        r["frame"] = i < static_cast<int>(s.frames.size()) ? columns_to_json(s.frames[i]) : json::array();
        samples.push_back(r);
    }
    json comps = json::array();
    for (const auto& c : s.components) comps.push_back(zero_component_to_json(c));
    return json{{"dim", s.dim}, {"components", comps}, {"samples", samples}};
}

inline json cusp_strata_to_json(const std::vector<cusp::StratumSamples>& strata) {
    json names = json::array(), samples = json::array();
    for (int i = 0; i < static_cast<int>(strata.size()); ++i) {
        names.push_back(strata[i].name);
        for (int k = 0; k < static_cast<int>(strata[i].points.size()); ++k)
            samples.push_back(json{{"p", to_json(strata[i].points[k])},
                                   {"stratum", i},
                                   {"frame", columns_to_json(strata[i].frames[k])}});
    }
    return json{{"strata", names}, {"samples", samples}};
}

// ---------------------------------------------------------------------------
// Geometry export
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// Greedy chaining of planar samples into polylines; links never exceed max_gap.
inline std::vector<std::vector<int>> chain_points(const std::vector<Vec>& pts, double max_gap) {
    std::vector<std::vector<int>> lines;
    if (pts.empty()) return lines;
    num::SpatialHash hash(max_gap, 2);
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) hash.insert(pts[i], i);
    std::vector<bool> used(pts.size(), false);
    auto nearest_free = [&](int from) {
        int best = -1;
        double bd = max_gap;
        hash.visit(pts[from], max_gap, [&](int j) {
            double d = (pts[j] - pts[from]).norm();
            if (!used[j] && (d < bd || (d == bd && j < best))) {
                bd = d;
                best = j;
            }
        });
        return best;
    };
    for (int s = 0; s < static_cast<int>(pts.size()); ++s) {
        if (used[s]) continue;
        // Walk to one end first so the line is not split in the middle.
        int start = s;
        {
            std::vector<bool> seen(pts.size(), false);
            seen[s] = true;
            int cur = s;
            for (;;) {
                int best = -1;
                double bd = max_gap;
                hash.visit(pts[cur], max_gap, [&](int j) {
                    double d = (pts[j] - pts[cur]).norm();
                    if (!used[j] && !seen[j] && (d < bd || (d == bd && j < best))) {
                        bd = d;
                        best = j;
                    }
                });
                if (best < 0) break;
                seen[best] = true;
                cur = best;
            }
            start = cur;
        }
        std::vector<int> line{start};
        used[start] = true;
        for (int nxt = nearest_free(start); nxt >= 0; nxt = nearest_free(nxt)) {
            used[nxt] = true;
            line.push_back(nxt);
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

class SvgCanvas {
public:
    /// A positive aspect fixes height/width; otherwise both axes share one scale.
    SvgCanvas(double lo_x, double hi_x, double lo_y, double hi_y, int px = 600, double aspect = 0)
        : lx_(lo_x), hx_(hi_x), ly_(lo_y), hy_(hi_y) {
        sx_ = sy_ = px / std::max(hx_ - lx_, hy_ - ly_);
        if (aspect > 0) {
            sx_ = px / (hx_ - lx_);
            sy_ = aspect * px / (hy_ - ly_);
        }
    }

    double X(double x) const { return (x - lx_) * sx_; }
    double Y(double y) const { return (hy_ - y) * sy_; }

    void polyline(const std::vector<Vec>& pts, const std::string& color, double width = 1.5) {
        if (pts.size() < 2) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << fmt(width) << "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i)
            body_ << (i ? " " : "") << fmt(X(pts[i][0])) << "," << fmt(Y(pts[i][1]));
        body_ << "\"/>\n";
    }

    void arrow(const Vec& from, const Vec& dir, double len, const std::string& color) {
        Vec to = from + len * dir;
        body_ << "<line x1=\"" << fmt(X(from[0])) << "\" y1=\"" << fmt(Y(from[1])) << "\" x2=\"" << fmt(X(to[0]))
              << "\" y2=\"" << fmt(Y(to[1])) << "\" stroke=\"" << color << "\" stroke-width=\"1\" marker-end=\"url(#head)\"/>\n";
    }

    void text(double x, double y, const std::string& s) {
        body_ << "<text x=\"" << fmt(X(x)) << "\" y=\"" << fmt(Y(y)) << "\" font-size=\"10\">" << s << "</text>\n";
    }

    std::string str() const {
        std::ostringstream os;
        int w = static_cast<int>(std::ceil((hx_ - lx_) * sx_)), h = static_cast<int>(std::ceil((hy_ - ly_) * sy_));
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
           << "<defs><marker id=\"head\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\">"
           << "<path d=\"M0,0 L6,3 L0,6 z\"/></marker></defs>\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

private:
    double lx_, hx_, ly_, hy_;
    double sx_ = 1, sy_ = 1;
    std::ostringstream body_;
};

inline const char* palette(int i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    return colors[i % 6];
}

}  // namespace detail

/// Planar arrangement as polylines with co-normal arrows every few samples.
inline std::string arrangement_svg(const Arrangement& arr, int arrow_every = 8) {
    if (arr.dim != 2) throw validation_error("SVG export needs ambient dimension 2");
    detail::SvgCanvas canvas(arr.box.lo[0], arr.box.hi[0], arr.box.lo[1], arr.box.hi[1]);
    for (int i = 0; i < static_cast<int>(arr.sheets.size()); ++i) {
        std::vector<Vec> pts;
        for (const auto& s : arr.sheets[i].points) pts.push_back(s.p);
        for (const auto& line : detail::chain_points(pts, 2.5 * arr.spacing)) {
            std::vector<Vec> poly;
            for (int id : line) poly.push_back(pts[id]);
            canvas.polyline(poly, detail::palette(i));
            for (std::size_t k = 0; k < line.size(); k += arrow_every)
                canvas.arrow(pts[line[k]], arr.sheets[i].points[line[k]].normal, 3 * arr.spacing, detail::palette(i));
        }
    }
    return canvas.str();
}

/// Point cloud of a 3-dimensional arrangement, one group per stratum, with normals.
inline std::string arrangement_obj(const Arrangement& arr) {
    if (arr.dim != 3) throw validation_error("OBJ export needs ambient dimension 3");
    std::ostringstream os;
    int index = 1;
    for (int i = 0; i < static_cast<int>(arr.sheets.size()); ++i) {
        os << "g " << arr.sheets[i].name << "\n";
        int first = index;
        for (const auto& s : arr.sheets[i].points) {
            os << "v " << detail::fmt(s.p[0]) << " " << detail::fmt(s.p[1]) << " " << detail::fmt(s.p[2]) << "\n";
            os << "vn " << detail::fmt(s.normal[0]) << " " << detail::fmt(s.normal[1]) << " " << detail::fmt(s.normal[2])
               << "\n";
            ++index;
        }
        if (index > first) {
            os << "p";
            for (int k = first; k < index; ++k) os << " " << k << "//" << k;
            os << "\n";
        }
    }
    return os.str();
}

/// (u, v) slice of the resolved cusp: thickened stratum, both sheets, the original
/// parabola dashed, and horizontal traces of the foliation leaves.
inline std::string cusp_slice_svg(double eps, double u_half = 3.0) {
    double uh = u_half * eps;
    double vlo = -4 * eps * eps * 1.5, vhi = uh * uh;
    detail::SvgCanvas canvas(-uh, uh, vlo, vhi, 600, 0.6);
    auto hp = cusp::make_h(eps, +1), hm = cusp::make_h(eps, -1);
    auto meet = cusp::cusp_intersections(eps);
    for (int i = 0; i <= 12; ++i) {
        double v = vlo + (vhi - vlo) * i / 12.0;
        Vec a(2), b(2);
        a << -uh, v;
        b << uh, v;
        canvas.polyline({a, b}, "#dddddd", 0.75);
    }
    auto curve = [&](auto&& f, double lo, double hi, const std::string& color, double width) {
        std::vector<Vec> pts;
        for (int i = 0; i <= 200; ++i) {
            double u = lo + (hi - lo) * i / 200.0;
            Vec p(2);
            p << u, f(u);
            pts.push_back(p);
        }
        canvas.polyline(pts, color, width);
    };
    curve([](double u) { return u * u; }, -uh, uh, "#bbbbbb", 1.0);
    curve([&](double u) { return eps * u; }, -2 * eps, 2 * eps, "#000000", 2.5);
    curve([&](double u) { return hp(u); }, meet.u_plus, uh, detail::palette(0), 1.5);
    curve([&](double u) { return hm(u); }, -uh, meet.u_minus, detail::palette(1), 1.5);
    return canvas.str();
}

}  // namespace arbor::io
