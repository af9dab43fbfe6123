// arbor: command-line front end for the arborealization library.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <arbor/classifier.hpp>
#include <arbor/cusp.hpp>
#include <arbor/hypersurface.hpp>
#include <arbor/io.hpp>
#include <arbor/profile.hpp>
#include <arbor/trees.hpp>
#include <arbor/weinstein.hpp>

namespace {

using namespace arbor;
using io::json;

struct Outputs {
    std::string out;
    std::string svg;
    std::string obj;
};

// Exit status carried out of a command body.
struct numeric_failure {
    json artifact;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    json c = io::read_json_file(path);
    if (!c.is_object()) throw validation_error("config must be a JSON object");
    return c;
}

template <class T>
T get_or(json& cfg, const char* key, T fallback) {
    if (!cfg.contains(key)) {
        cfg[key] = fallback;
        return fallback;
    }
    try {
        return cfg[key].get<T>();
    } catch (const json::exception&) {
        throw validation_error(std::string("config field \"") + key + "\" has the wrong type");
    }
}

double positive(json& cfg, const char* key, double fallback) {
    double v = get_or<double>(cfg, key, fallback);
    if (!(v > 0)) throw validation_error(std::string("config field \"") + key + "\" must be positive");
    return v;
}

// Replace a tree path by its content so the digest does not depend on file location.
io::TreeRecord resolve_tree(json& cfg) {
    if (!cfg.contains("tree")) throw validation_error("a tree is required (--tree or config \"tree\")");
    if (cfg["tree"].is_string()) cfg["tree"] = io::read_json_file(cfg["tree"].get<std::string>());
    auto rec = io::tree_from_json(cfg["tree"]);
    cfg["tree"] = io::tree_to_json(rec.tree, rec.marked);
    return rec;
}

json envelope(const std::string& command, const json& cfg, json result) {
    std::uint64_t seed = cfg.value("seed", 1ull);
    return json{{"command", command},
                {"config", cfg},
                {"config_digest", io::config_digest(cfg)},
                {"seed", seed},
                {"result", std::move(result)}};
}

void emit(const json& artifact, const Outputs& o) {
    std::string text = artifact.dump(1) + "\n";
    if (o.out.empty()) std::cout << text;
    else io::write_text(o.out, text);
}

// Tables go to stdout when the artifact is written to a file, to stderr otherwise.
std::ostream& table_stream(const Outputs& o) { return o.out.empty() ? std::cerr : std::cout; }

std::string fmt(double v, int prec = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

std::string fmt_vec(const num::Vec& v) {
    std::string s = "(";
    for (int i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(std::abs(v[i]) < 1e-12 ? 0.0 : v[i], 8);
    return s + ")";
}

// ---------------------------------------------------------------------------

json cmd_enumerate(json& cfg) {
    int max = get_or<int>(cfg, "max_vertices", 3);
    if (max < 1) throw validation_error("max_vertices must be at least 1");
    auto trees = enumerate_signed_rooted_trees(max);
    json list = json::array();
    for (const auto& t : trees) {
        json j = io::tree_to_json(t);
        j["canonical"] = canonical_form(t);
        list.push_back(j);
    }
    return json{{"count", static_cast<int>(trees.size())}, {"trees", list}};
}

json cmd_build(json& cfg, const Outputs& o) {
    double spacing = positive(cfg, "spacing", 0.1);
    double sharpness = positive(cfg, "sharpness", 1.0);
    std::string fixture = get_or<std::string>(cfg, "fixture", "");
    Arrangement arr;
    json extra = json::object();
    if (fixture == "product") {
        arr = product_fixture(make_default_profile(sharpness), spacing);
    } else if (!fixture.empty()) {
        throw validation_error("unknown fixture \"" + fixture + "\"");
    } else {
        auto rec = resolve_tree(cfg);
        std::string mode = get_or<std::string>(cfg, "mode", "smoothed");
        double box_half = positive(cfg, "box_half", kDefaultBoxHalf);
        if (mode != "smoothed" && mode != "pl") throw validation_error("mode must be \"smoothed\" or \"pl\"");
        extra["canonical"] = canonical_form(rec.tree, rec.marked);
        if (rec.tree.size() == 1) {
            // No strata: the model is the zero section alone.
            return json{{"dim", 0}, {"strata", json::array()}, {"samples", json::array()}, {"zero_section_only", true},
                        {"canonical", extra["canonical"]}};
        }
        auto forest = delete_root(rec.tree);
        if (mode == "pl") {
            if (!rec.marked.empty()) throw validation_error("marked leaves need the smoothed mode");
            auto h = build_pl_strata(forest, box_half);
            arr = arrangement_from(h, spacing);
        } else if (rec.marked.empty()) {
            arr = arrangement_from(build_smoothed(forest, make_default_profile(sharpness), box_half), spacing);
        } else {
            LeafyForest lf{forest, rec.marked};
            arr = arrangement_from(build_smoothed(lf, make_default_profile(sharpness), box_half), spacing);
        }
    }
    if (!o.svg.empty()) io::write_text(o.svg, io::arrangement_svg(arr));
    if (!o.obj.empty()) io::write_text(o.obj, io::arrangement_obj(arr));
    json j = io::arrangement_to_json(arr);
    for (auto& [k, v] : extra.items()) j[k] = v;
    return j;
}

json cmd_classify(json& cfg) {
    if (!cfg.contains("samples")) throw validation_error("a sample file is required (--samples or config \"samples\")");
    json data;
    if (cfg["samples"].is_string()) {
        data = io::read_json_file(cfg["samples"].get<std::string>());
        cfg["samples"] = json{{"sha256", io::sha256_hex(data.dump())}};
    } else if (cfg["samples"].is_object() && cfg["samples"].contains("samples")) {
        data = cfg["samples"];
    } else {
        throw validation_error("config \"samples\" must be a path or an inline sample object");
    }
    if (data.is_object() && data.contains("result")) data = data["result"];
    ClassifierOptions opt;
    opt.tangent_angle = positive(cfg, "tangent_angle", opt.tangent_angle);
    opt.duplicate_fraction = positive(cfg, "duplicate_fraction", opt.duplicate_fraction);
    Arrangement arr = io::arrangement_from_json(data);
    return io::germ_report_to_json(check_arboreal(arr, opt));
}

json cmd_model(json& cfg, const Outputs& o) {
    auto rec = resolve_tree(cfg);
    if (!rec.marked.empty()) throw validation_error("model trees carry no marked leaves");
    if (static_cast<int>(rec.tree.size()) > kMaxModelVertices)
        throw capacity_error("model construction supports at most " + std::to_string(kMaxModelVertices) + " vertices");
    std::string action = get_or<std::string>(cfg, "action", "zeros");
    double box_half = positive(cfg, "box_half", 3.0);
    auto model = build_model(rec.tree);
    if (model.pairs == 0) throw validation_error("the single-vertex tree has no model field");
    Box box = Box::cube(model.dim(), box_half);
    json result{{"tag", model.tag}, {"dim", model.dim()}};
    auto& ts = table_stream(o);
    if (action == "zeros") {
        ZeroOptions zo;
        zo.cell = positive(cfg, "cell", model.dim() <= 2 ? 0.1 : 0.2);
        auto scan = find_zero_components(model, box, zo);
        json comps = json::array();
        ts << "label  position  dim  index  morse_bott*  phi\n";
        for (const auto& c : scan.components) {
            comps.push_back(io::zero_component_to_json(c));
            ts << c.label << "  " << fmt_vec(c.representative) << "  " << c.dim << "  " << c.index << "  "
               << (c.morse_bott ? "yes" : "no") << "  " << fmt(c.phi) << "\n";
        }
        result["components"] = comps;
        result["flagged_cells"] = scan.flagged_cells;
    } else if (action == "skeleton") {
        SkeletonParams sp;
        sp.cell = positive(cfg, "cell", model.dim() <= 2 ? 0.05 : 0.2);
        sp.spacing = positive(cfg, "spacing", 0.05);
        auto sk = skeleton(model, box, sp);
        result["skeleton"] = io::skeleton_to_json(sk);
        result["isotropy_defect"] = isotropy_defect(sk);
        ts << "bones: " << sk.components.size() << "  samples: " << sk.points.size()
           << "  isotropy defect: " << fmt(isotropy_defect(sk)) << "\n";
    } else if (action == "verify") {
        int count = get_or<int>(cfg, "points", 1000);
        if (count < 1) throw validation_error("points must be positive");
        double tol = positive(cfg, "liouville_tol", 1e-5);
        double delta = positive(cfg, "lyapunov_delta", 1e-12);
        auto seed = get_or<std::uint64_t>(cfg, "seed", 1);
        auto pts = random_points(model.dim(), count, box_half, static_cast<unsigned>(seed));
        double res = liouville_residual(model, pts);
        auto ly = lyapunov_check(model, pts, delta);
        result["liouville_residual"] = res;
        result["lyapunov"] = json{{"worst_margin", ly.worst_margin}, {"delta_max", ly.delta_max},
                                  {"checked", ly.checked}, {"excluded", ly.excluded}, {"holds", ly.holds}};
        bool ok = res < tol && ly.holds;
        result["ok"] = ok;
        ts << "Liouville residual: " << fmt(res) << " (tol " << fmt(tol) << ")\n"
           << "Lyapunov margin: " << fmt(ly.worst_margin) << " over " << ly.checked << " points\n";
        if (!ok) throw numeric_failure{envelope("model", cfg, result)};
    } else {
        throw validation_error("action must be zeros, skeleton or verify");
    }
    return result;
}

json cmd_cusp(json& cfg, const Outputs& o) {
    double eps = positive(cfg, "epsilon", 0.1);
    std::string action = get_or<std::string>(cfg, "action", "resolve");
    int q_dim = get_or<int>(cfg, "q_dim", 1);
    auto seed = get_or<std::uint64_t>(cfg, "seed", 1);
    json result;
    auto& ts = table_stream(o);
    if (action == "resolve") {
        int count = get_or<int>(cfg, "samples", 300);
        auto res = cusp::resolve_sigma10(eps, {}, q_dim, count, seed);
        result["epsilon"] = eps;
        result["intersections"] = json{{"plus", {res.meet.u_plus, res.meet.v_plus}},
                                       {"minus", {res.meet.u_minus, res.meet.v_minus}}};
        result["strata"] = io::cusp_strata_to_json(res.strata);
        ts << "sheet+ meets v = eps u at u = " << fmt(res.meet.u_plus, 12) << ", v = " << fmt(res.meet.v_plus, 12) << "\n"
           << "sheet- meets v = eps u at u = " << fmt(res.meet.u_minus, 12) << ", v = " << fmt(res.meet.v_minus, 12)
           << "\n";
    } else if (action == "audit") {
        bool resolved = get_or<bool>(cfg, "resolved", true);
        int count = get_or<int>(cfg, "samples", 10000);
        double tol = positive(cfg, "angle_tol", 1e-6);
        std::vector<cusp::StratumSamples> strata;
        if (resolved) strata = cusp::resolve_sigma10(eps, {}, q_dim, count, seed).strata;
        else strata = {cusp::unresolved_cusp(q_dim, 0.5, count, seed)};
        auto a = cusp::tangency_audit(strata, cusp::FoliationLocal{q_dim}, tol);
        json tang = json::array();
        for (auto [s, i] : a.tangential) tang.push_back(io::to_json(strata[s].points[i]));
        result = json{{"epsilon", eps},  {"resolved", resolved},         {"samples", a.samples},
                      {"flagged", a.flagged}, {"max_dim", a.max_dim},
                      {"min_angle", std::isfinite(a.min_angle) ? json(a.min_angle) : json(nullptr)},
                      {"stratum_max_dim", a.stratum_max_dim}, {"tangential_points", tang}};
        ts << (resolved ? "resolved" : "unresolved") << " strata: max intersection dimension " << a.max_dim
           << ", min angle " << fmt(a.min_angle) << " over " << a.samples << " samples\n";
    } else {
        throw validation_error("action must be resolve or audit");
    }
    if (!o.svg.empty()) io::write_text(o.svg, io::cusp_slice_svg(eps));
    return result;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"arbor: arboreal singularities, model Weinstein fields and cusp resolution"};
    app.require_subcommand(1);
    std::string config_path;
    Outputs o;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", o.out, "write the JSON artifact here instead of stdout");

    std::optional<int> max_vertices;
    auto* en = app.add_subcommand("enumerate", "list signed rooted trees up to a vertex count");
    en->add_option("--max", max_vertices, "largest vertex count");

    std::string tree_path, samples_path;
    bool pl = false, smoothed = false;
    std::optional<double> spacing, epsilon, cell;
    std::optional<std::uint64_t> seed;
    std::string fixture;
    auto* bu = app.add_subcommand("build", "sample an arboreal hypersurface");
    bu->add_option("--tree", tree_path, "tree JSON file");
    bu->add_flag("--pl", pl, "piecewise-linear strata");
    bu->add_flag("--smoothed", smoothed, "smoothed strata (default)");
    bu->add_option("--spacing", spacing, "sample spacing");
    bu->add_option("--fixture", fixture, "built-in fixture instead of a tree (product)");
    bu->add_option("--svg", o.svg, "SVG export (ambient dimension 2)");
    bu->add_option("--obj", o.obj, "OBJ export (ambient dimension 3)");

    auto* cl = app.add_subcommand("classify", "recognize an arboreal germ from samples");
    cl->add_option("--samples", samples_path, "sample JSON file");

    bool skel = false, zeros = false, verify = false;
    auto* mo = app.add_subcommand("model", "model Weinstein field of a tree");
    mo->add_option("--tree", tree_path, "tree JSON file");
    mo->add_flag("--skeleton", skel, "sample the skeleton");
    mo->add_flag("--zeros", zeros, "tabulate zero components");
    mo->add_flag("--verify", verify, "check the Liouville and Lyapunov conditions");
    mo->add_option("--cell", cell, "zero-search cell size");
    mo->add_option("--seed", seed, "random seed");

    bool resolve = false, audit = false, unresolved = false;
    auto* cu = app.add_subcommand("cusp", "cusp resolution model");
    cu->add_option("--epsilon", epsilon, "thickening parameter in (0, 0.2]");
    cu->add_flag("--resolve", resolve, "build the resolved strata");
    cu->add_flag("--audit", audit, "tangency audit against the foliation");
    cu->add_flag("--unresolved", unresolved, "audit the unresolved cusp");
    cu->add_option("--svg", o.svg, "SVG of the (u, v) slice");
    cu->add_option("--seed", seed, "random seed");

    for (auto* sub : {en, bu, cl, mo, cu}) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--out", o.out, "write the JSON artifact here instead of stdout");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::string command = app.get_subcommands().front()->get_name();
    try {
        json cfg = load_config(config_path);
        if (seed) cfg["seed"] = *seed;
        get_or<std::uint64_t>(cfg, "seed", 1);
        json result;
        if (command == "enumerate") {
            if (max_vertices) cfg["max_vertices"] = *max_vertices;
            result = cmd_enumerate(cfg);
        } else if (command == "build") {
            if (pl && smoothed) throw validation_error("--pl and --smoothed are exclusive");
            if (pl) cfg["mode"] = "pl";
            if (smoothed) cfg["mode"] = "smoothed";
            if (!tree_path.empty()) cfg["tree"] = tree_path;
            if (!fixture.empty()) cfg["fixture"] = fixture;
            if (spacing) cfg["spacing"] = *spacing;
            result = cmd_build(cfg, o);
        } else if (command == "classify") {
            if (!samples_path.empty()) cfg["samples"] = samples_path;
            result = cmd_classify(cfg);
        } else if (command == "model") {
            if (skel + zeros + verify > 1) throw validation_error("choose one of --skeleton, --zeros, --verify");
            if (skel) cfg["action"] = "skeleton";
            if (zeros) cfg["action"] = "zeros";
            if (verify) cfg["action"] = "verify";
            if (!tree_path.empty()) cfg["tree"] = tree_path;
            if (cell) cfg["cell"] = *cell;
            result = cmd_model(cfg, o);
        } else {
            if (resolve && audit) throw validation_error("choose one of --resolve, --audit");
            if (resolve) cfg["action"] = "resolve";
            if (audit) cfg["action"] = "audit";
            if (unresolved) cfg["resolved"] = false;
            if (epsilon) cfg["epsilon"] = *epsilon;
            result = cmd_cusp(cfg, o);
        }
        emit(envelope(command, cfg, std::move(result)), o);
        return 0;
    } catch (const numeric_failure& f) {
        emit(f.artifact, o);
        return 1;
    } catch (const validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 1;
    }
}
