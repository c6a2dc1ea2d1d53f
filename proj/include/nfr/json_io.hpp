#pragma once
// JSON serialization of scenes, refractors and reports. Objects serialize with
// sorted keys and shortest round-trip number formatting (nlohmann default), so
// equal inputs produce byte-identical documents and scene/refractor files
// survive export/import losslessly.

#include <fstream>
#include <string>

#include <json.hpp>

#include "analysis.hpp"
#include "errors.hpp"
#include "hypotheses.hpp"
#include "raytrace.hpp"
#include "refractor.hpp"
#include "scene.hpp"

namespace nfr {

using json = nlohmann::json;

inline json vec_to_json(const Vec& v, int n) {
    json a = json::array();
    for (int i = 0; i < n; ++i) a.push_back(v[static_cast<std::size_t>(i)]);
    return a;
}

inline Vec vec_from_json(const json& a) {
    if (!a.is_array() || a.size() < 2 || a.size() > 3)
        throw InvalidParameters("vector field must hold 2 or 3 numbers");
    Vec v;
    for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
    return v;
}

inline json scene_to_json(const Scene& s) {
    json j;
    j["n"] = s.n;
    j["kappa"] = s.kappa;
    j["c1"] = s.c1;
    j["c2"] = s.c2;
    j["omega"] = {{"axis", vec_to_json(s.omega.axis, s.n)}, {"half_angle", s.omega.half_angle}};
    json d;
    switch (s.density.kind) {
        case DensityKind::Uniform: d["kind"] = "uniform"; break;
        case DensityKind::Cosine: d["kind"] = "cosine"; break;
        case DensityKind::Table:
            d["kind"] = "table";
            d["values"] = s.density.table;
            break;
    }
    j["density"] = d;
    json t;
    if (s.target.kind == TargetKind::PlanarDisk) {
        t["kind"] = "planar_disk";
        t["R"] = s.target.R;
        t["M"] = s.target.M;
    } else {
        t["kind"] = "discrete_points";
        json pts = json::array();
        for (const Vec& p : s.target.points) pts.push_back(vec_to_json(p, s.n));
        t["points"] = pts;
        t["weights"] = s.target.weights;
    }
    j["target"] = t;
    j["seed"] = s.seed;
    return j;
}

inline Scene scene_from_json(const json& j) {
    Scene s;
    s.n = j.at("n").get<int>();
    s.kappa = j.at("kappa").get<double>();
    s.c1 = j.at("c1").get<double>();
    s.c2 = j.at("c2").get<double>();
    s.omega.axis = vec_from_json(j.at("omega").at("axis"));
    s.omega.half_angle = j.at("omega").at("half_angle").get<double>();
    const json& d = j.at("density");
    std::string dk = d.at("kind").get<std::string>();
    if (dk == "uniform") s.density.kind = DensityKind::Uniform;
    else if (dk == "cosine") s.density.kind = DensityKind::Cosine;
    else if (dk == "table") {
        s.density.kind = DensityKind::Table;
        s.density.table = d.at("values").get<std::vector<double>>();
    } else {
        throw InvalidParameters("unknown density kind: " + dk);
    }
    const json& t = j.at("target");
    std::string tk = t.at("kind").get<std::string>();
    if (tk == "planar_disk") {
        s.target.kind = TargetKind::PlanarDisk;
        s.target.R = t.at("R").get<double>();
        s.target.M = t.at("M").get<double>();
    } else if (tk == "discrete_points") {
        s.target.kind = TargetKind::DiscretePoints;
        for (const json& p : t.at("points")) s.target.points.push_back(vec_from_json(p));
        s.target.weights = t.at("weights").get<std::vector<double>>();
    } else {
        throw InvalidParameters("unknown target kind: " + tk);
    }
    s.seed = j.value("seed", std::uint64_t{0});
    validate_scene(s);
    return s;
}

/// Refractor file payload: the envelope plus solve diagnostics.
struct RefractorFile {
    DiscreteRefractor u;
    int n = 3;
    std::vector<double> residuals;
    int iterations = 0;
};

inline json refractor_to_json(const RefractorFile& rf) {
    json j;
    j["kappa"] = rf.u.kappa;
    j["n"] = rf.n;
    json ovals = json::array();
    for (const auto& o : rf.u.ovals)
        ovals.push_back({{"Y", vec_to_json(o.focus, rf.n)}, {"b", o.b}});
    j["ovals"] = ovals;
    j["residuals"] = rf.residuals;
    j["iterations"] = rf.iterations;
    return j;
}

inline RefractorFile refractor_from_json(const json& j) {
    RefractorFile rf;
    rf.u.kappa = j.at("kappa").get<double>();
    rf.n = j.at("n").get<int>();
    for (const json& o : j.at("ovals"))
        rf.u.ovals.push_back(OvalParams{vec_from_json(o.at("Y")), o.at("b").get<double>(), rf.u.kappa});
    rf.residuals = j.value("residuals", std::vector<double>{});
    rf.iterations = j.value("iterations", 0);
    return rf;
}

inline json subreport_to_json(const SubReport& r) {
    json j;
    j["id"] = r.id;
    j["passes"] = r.passes;
    j["samples"] = r.samples;
    j["margin"] = r.margin;
    j["witness"] = r.witness;
    j["constants"] = r.constants;
    return j;
}

inline json hypothesis_report_to_json(const HypothesisReport& rep) {
    json j;
    j["all_pass"] = rep.all_pass();
    json subs = json::array();
    for (const auto& s : rep.subs) subs.push_back(subreport_to_json(s));
    j["checks"] = subs;
    return j;
}

inline json lemma_report_to_json(const LemmaReport& r) {
    json j;
    j["lemma_id"] = r.lemma_id;
    j["samples_tested"] = r.samples_tested;
    j["samples_skipped"] = r.samples_skipped;
    j["violations"] = r.violations;
    j["worst_margin"] = r.worst_margin;
    j["empirical_constant"] = r.empirical_constant;
    j["empirical_constant_base"] = r.empirical_constant_base;
    j["drift"] = r.drift;
    j["stability_flag"] = r.stability_flag;
    j["passes"] = r.passes;
    j["seed"] = r.seed;
    j["extras"] = r.extras;
    return j;
}

inline json holder_report_to_json(const HolderReport& r) {
    json j;
    j["alpha_theoretical"] = r.alpha_theoretical;
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"t", row.t}, {"omega", row.omega}, {"ratio", row.ratio}, {"pairs", row.pairs}});
    j["scales"] = rows;
    j["fitted_ratio_sup"] = r.fitted_ratio_sup;
    j["best_fit_exponent"] = r.best_fit_exponent;
    j["ties_excluded"] = r.ties_excluded;
    j["gated_out"] = r.gated_out;
    j["lipschitz_sup"] = r.lipschitz_sup;
    return j;
}

inline json histogram_to_json(const Histogram& h) {
    json j;
    j["counts"] = h.counts;
    j["fraction"] = h.fraction;
    j["stderr"] = h.stderr_fraction;
    j["boundary_rays"] = h.boundary_rays;
    j["tir_rays"] = h.tir_rays;
    j["miss_rays"] = h.miss_rays;
    j["total_rays"] = h.total_rays;
    j["seed"] = h.seed;
    return j;
}

inline json measure_report_to_json(const MeasureConditionReport& r) {
    json j;
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"sigma", row.sigma}, {"measure", row.measure}, {"ratio", row.ratio}});
    j["rows"] = rows;
    j["sup_ratio"] = r.sup_ratio;
    j["passes"] = r.passes;
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidParameters("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidParameters("cannot open: " + path);
    return json::parse(in);
}

}  // namespace nfr
