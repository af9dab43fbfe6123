#include <gtest/gtest.h>

#include <sstream>

#include <arbor/io.hpp>

using namespace arbor;
using namespace arbor::io;

namespace {

const SmoothingProfile& profile() {
    static const SmoothingProfile p = make_default_profile();
    return p;
}

int count_prefix(const std::string& text, const std::string& prefix) {
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        if (line.rfind(prefix, 0) == 0) ++n;
    return n;
}

int count_substr(const std::string& text, const std::string& needle) {
    int n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, ConfigKeyOrderIrrelevant) {
    json a = json::parse(R"({"seed": 1, "epsilon": 0.1})");
    json b = json::parse(R"({"epsilon": 0.1, "seed": 1})");
    EXPECT_EQ(config_digest(a), config_digest(b));
    b["seed"] = 2;
    EXPECT_NE(config_digest(a), config_digest(b));
}

TEST(TreeJson, RoundTripAllSmallTrees) {
    for (const auto& t : enumerate_signed_rooted_trees(5)) {
        auto rec = tree_from_json(json::parse(tree_to_json(t).dump()));
        EXPECT_EQ(canonical_form(rec.tree), canonical_form(t));
        EXPECT_TRUE(rec.marked.empty());
    }
    SignedRootedTree chain({0, 1, 2}, 0, {{0, 1, std::nullopt}, {1, 2, -1}});
    auto rec = tree_from_json(tree_to_json(chain, {2}));
    EXPECT_EQ(rec.marked, std::set<int>{2});
    EXPECT_EQ(canonical_form(rec.tree, rec.marked), canonical_form(chain, {2}));
}

TEST(TreeJson, SchemaErrors) {
    auto bad = [](const char* text) { return json::parse(text); };
    EXPECT_THROW(tree_from_json(bad(R"({"root": 0, "edges": []})")), validation_error);
    EXPECT_THROW(tree_from_json(bad(R"({"vertices": [0], "root": "a", "edges": []})")), validation_error);
    EXPECT_THROW(tree_from_json(bad(R"({"vertices": [0, 1], "root": 0, "edges": [{"from": 0}]})")), validation_error);
    EXPECT_THROW(tree_from_json(bad(R"({"vertices": [0, 1, 2], "root": 0,
        "edges": [{"from": 0, "to": 1, "sign": null}, {"from": 1, "to": 2, "sign": 3}]})")),
                 validation_error);
    EXPECT_THROW(tree_from_json(bad(R"({"vertices": [0, 1, 2], "root": 0,
        "edges": [{"from": 0, "to": 1, "sign": null}, {"from": 1, "to": 2, "sign": "+"}]})")),
                 validation_error);
    EXPECT_THROW(tree_from_json(bad(R"({"vertices": [0, 1, 2], "root": 0, "marked": [1],
        "edges": [{"from": 0, "to": 1, "sign": null}, {"from": 1, "to": 2, "sign": 1}]})")),
                 validation_error);
    EXPECT_THROW(tree_from_json(bad("[1, 2]")), validation_error);
}

TEST(ArrangementJson, RoundTripPreservesVerdict) {
    SignedRootedTree chain({0, 1, 2}, 0, {{0, 1, std::nullopt}, {1, 2, 1}});
    auto arr = arrangement_from(build_smoothed(delete_root(chain), profile()), 0.1);
    auto back = arrangement_from_json(json::parse(arrangement_to_json(arr).dump()));
    ASSERT_EQ(back.sheets.size(), arr.sheets.size());
    EXPECT_EQ(back.dim, arr.dim);
    for (std::size_t s = 0; s < arr.sheets.size(); ++s) {
        EXPECT_EQ(back.sheets[s].name, arr.sheets[s].name);
        ASSERT_EQ(back.sheets[s].points.size(), arr.sheets[s].points.size());
        for (std::size_t i = 0; i < arr.sheets[s].points.size(); ++i) {
            EXPECT_EQ(back.sheets[s].points[i].p, arr.sheets[s].points[i].p);
            EXPECT_EQ(back.sheets[s].points[i].normal, arr.sheets[s].points[i].normal);
        }
    }
    auto r0 = check_arboreal(arr), r1 = check_arboreal(back);
    EXPECT_EQ(r0.verdict, r1.verdict);
    EXPECT_EQ(canonical_form(*r0.tree), canonical_form(*r1.tree));
}

TEST(ArrangementJson, NormalRecoveredFromFrame) {
    json j = json::parse(R"({"dim": 2, "spacing": 0.5, "box": {"lo": [-1, -1], "hi": [1, 1]},
        "samples": [{"p": [0, 0.5], "stratum": 0, "frame": [[0, 1]]}]})");
    auto arr = arrangement_from_json(j);
    ASSERT_EQ(arr.sheets.size(), 1u);
    EXPECT_EQ(arr.sheets[0].name, "s0");
    EXPECT_NEAR(std::abs(arr.sheets[0].points[0].normal[0]), 1, 1e-12);
}

TEST(ArrangementJson, SchemaErrors) {
    auto base = json::parse(R"({"dim": 2, "spacing": 0.5, "box": {"lo": [-1, -1], "hi": [1, 1]},
        "samples": [{"p": [0, 0.5], "stratum": 0, "frame": [[0, 1]]}]})");
    auto with = [&](const std::string& ptr, json v) {
        json j = base;
        j[json::json_pointer(ptr)] = v;
        return j;
    };
    EXPECT_NO_THROW(arrangement_from_json(base));
    EXPECT_THROW(arrangement_from_json(with("/dim", 0)), validation_error);
    EXPECT_THROW(arrangement_from_json(with("/spacing", -1)), validation_error);
    EXPECT_THROW(arrangement_from_json(with("/samples/0/p", json::array({0, 1, 2}))), validation_error);
    EXPECT_THROW(arrangement_from_json(with("/samples/0/stratum", -1)), validation_error);
    EXPECT_THROW(arrangement_from_json(with("/samples/0/frame", json::array())), validation_error);
    EXPECT_THROW(arrangement_from_json(with("/samples/0/normal", json::array({0, 0}))), validation_error);
    json missing = base;
    missing.erase("box");
    EXPECT_THROW(arrangement_from_json(missing), validation_error);
}

TEST(Files, ReadErrors) {
    EXPECT_THROW(read_json_file("/nonexistent/arbor.json"), validation_error);
    std::string path = ::testing::TempDir() + "arbor_truncated.json";
    write_text(path, "{\"vertices\": [0, 1");
    EXPECT_THROW(read_json_file(path), validation_error);
    write_text(path, "{\"a\": 1}");
    EXPECT_EQ(read_json_file(path)["a"], 1);
}

TEST(Export, ObjAndSvg) {
    SignedRootedTree chain({0, 1, 2}, 0, {{0, 1, std::nullopt}, {1, 2, -1}});
    auto arr = arrangement_from(build_smoothed(delete_root(chain), profile()), 0.1);
    SignedRootedTree chain4({0, 1, 2, 3}, 0, {{0, 1, std::nullopt}, {1, 2, 1}, {2, 3, -1}});
    auto arr3 = arrangement_from(build_smoothed(delete_root(chain4), profile()), 0.2);
    std::size_t total = 0;
    for (const auto& s : arr3.sheets) total += s.points.size();
    ASSERT_GT(total, 0u);

    auto obj = arrangement_obj(arr3);
    EXPECT_EQ(count_prefix(obj, "v "), static_cast<int>(total));
    EXPECT_EQ(count_prefix(obj, "vn "), static_cast<int>(total));
    EXPECT_EQ(count_prefix(obj, "g "), static_cast<int>(arr3.sheets.size()));
    EXPECT_THROW(arrangement_obj(arr), validation_error);
    EXPECT_THROW(arrangement_svg(arr3), validation_error);

    auto svg = arrangement_svg(arr);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_GE(count_substr(svg, "<polyline"), static_cast<int>(arr.sheets.size()));
    EXPECT_EQ(svg, arrangement_svg(arr));

    auto slice = cusp_slice_svg(0.1);
    EXPECT_EQ(slice.rfind("<svg", 0), 0u);
    EXPECT_EQ(slice, cusp_slice_svg(0.1));
}

TEST(Reports, CuspStrataJson) {
    auto res = cusp::resolve_sigma10(0.1, {}, 1, 30, 1);
    auto j = cusp_strata_to_json(res.strata);
    ASSERT_EQ(j["strata"].size(), 3u);
    EXPECT_EQ(j["strata"][0], "thickened");
    EXPECT_EQ(j["samples"].size(), 30u);
    EXPECT_EQ(j.dump(), cusp_strata_to_json(cusp::resolve_sigma10(0.1, {}, 1, 30, 1).strata).dump());
}
