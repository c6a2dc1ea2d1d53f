// Command-line front end: scene construction, hypothesis checks, the
// prescribed-energy solver, forward ray tracing, inequality suites and
// Hölder diagnostics. Machine-readable results go to files, diagnostics to
// stderr. Exit codes: 0 pass, 1 verification failure or no convergence,
// 2 usage/configuration error.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <nfr/analysis.hpp>
#include <nfr/export.hpp>
#include <nfr/json_io.hpp>
#include <nfr/manifest.hpp>

namespace {

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

std::string stem_of(const std::string& path) {
    std::size_t dot = path.find_last_of('.');
    std::size_t slash = path.find_last_of("/\\");
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path;
    return path.substr(0, dot);
}

void print_subreport(const nfr::SubReport& s) {
    std::fprintf(stderr, "  %-6s %-4s margin=%-12.4g", s.id.c_str(), s.passes ? "pass" : "FAIL",
                 s.margin);
    for (const auto& [k, v] : s.constants) std::fprintf(stderr, " %s=%.4g", k.c_str(), v);
    if (!s.witness.empty()) std::fprintf(stderr, "  [%s]", s.witness.c_str());
    std::fprintf(stderr, "\n");
}

void print_lemma_report(const nfr::LemmaReport& r) {
    std::fprintf(stderr,
                 "  suite %-4s %-4s tested=%zu skipped=%zu violations=%zu constant=%.6g "
                 "drift=%.3g%% stable=%d\n",
                 r.lemma_id.c_str(), r.passes ? "pass" : "FAIL", r.samples_tested,
                 r.samples_skipped, r.violations, r.empirical_constant, 100.0 * r.drift,
                 r.stability_flag ? 1 : 0);
}

void print_holder_report(const char* name, const nfr::HolderReport& r) {
    std::fprintf(stderr, "  %s: alpha=%.6g sup_ratio=%.6g best_fit_exponent=%.4g ties=%zu\n", name,
                 r.alpha_theoretical, r.fitted_ratio_sup, r.best_fit_exponent, r.ties_excluded);
    for (const auto& row : r.rows)
        std::fprintf(stderr, "    t=%-10.4g omega=%-12.6g ratio=%-12.6g pairs=%zu\n", row.t,
                     row.omega, row.ratio, row.pairs);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"near-field refractor design and verification toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: REFRACTOR_LAB_THREADS or all cores)")
        ->envname("REFRACTOR_LAB_THREADS");

    // ---- example-scene ----
    auto* sc_example = app.add_subcommand("example-scene", "build the canonical disk-target scene");
    double ex_kappa = 0.5, ex_c2 = 2.0, ex_C = 0.0, ex_rfrac = 1.0;
    int ex_n = 3;
    std::uint64_t ex_seed = 0;
    std::string ex_out;
    sc_example->add_option("--kappa", ex_kappa, "index ratio n2/n1 in (0,1)");
    sc_example->add_option("--c2", ex_c2, "outer radial bound (c1 = 1)");
    sc_example->add_option("--C", ex_C, "target height offset; 0 = minimal value satisfying separation");
    sc_example->add_option("--r-fraction", ex_rfrac, "fraction of the largest admissible disk radius");
    sc_example->add_option("--n", ex_n, "dimension, 2 or 3");
    sc_example->add_option("--seed", ex_seed, "seed stored in the scene");
    sc_example->add_option("--emit", ex_out, "output scene JSON")->required();

    // ---- check-hypotheses ----
    auto* sc_check = app.add_subcommand("check-hypotheses", "run the structural checkers on a scene");
    std::string ch_scene, ch_out;
    std::size_t ch_samples = 10000;
    std::uint64_t ch_seed = 1;
    double ch_mu = 0.0, ch_tau = -1.0, ch_mu0 = 0.0;
    sc_check->add_option("--scene", ch_scene, "scene JSON")->required();
    sc_check->add_option("--samples", ch_samples, "samples per checker");
    sc_check->add_option("--seed", ch_seed, "RNG seed");
    sc_check->add_option("--mu", ch_mu, "concavity parameter in [0, kappa)");
    sc_check->add_option("--tau", ch_tau, "also check the tau-based sufficient conditions");
    sc_check->add_option("--mu0", ch_mu0, "tube neighborhood size; 0 = derive from curvature");
    sc_check->add_option("--out", ch_out, "report JSON path");

    // ---- design ----
    auto* sc_design = app.add_subcommand("design", "solve the prescribed-energy problem");
    std::string de_scene, de_out, de_obj, de_csv, de_trace;
    std::size_t de_targets = 0, de_rings = 0, de_sectors = 0, de_quad = 0;
    double de_tol = 1e-3;
    int de_sweeps = 200;
    std::vector<double> de_fractions;
    sc_design->add_option("--scene", de_scene, "scene JSON")->required();
    sc_design->add_option("--out", de_out, "refractor JSON output")->required();
    sc_design->add_option("--targets", de_targets, "discretize a disk target into this many points");
    sc_design->add_option("--rings", de_rings, "polar rings of the discretization (n = 3)");
    sc_design->add_option("--sectors", de_sectors, "sectors per ring (n = 3)");
    sc_design->add_option("--fractions", de_fractions, "per-target energy fractions")->expected(-1);
    sc_design->add_option("--tol", de_tol, "max relative energy residual");
    sc_design->add_option("--quad-nodes", de_quad, "quadrature nodes (0 = default)");
    sc_design->add_option("--max-sweeps", de_sweeps, "outer iteration cap");
    sc_design->add_option("--obj", de_obj, "surface mesh path (n = 3; default <out>.obj)");
    sc_design->add_option("--csv", de_csv, "surface polyline path (n = 2; default <out>_polyline.csv)");
    sc_design->add_option("--trace", de_trace, "convergence trace CSV (default <out>_trace.csv)");

    // ---- trace ----
    auto* sc_trace = app.add_subcommand("trace", "Monte Carlo irradiance histogram");
    std::string tr_scene, tr_refractor, tr_out, tr_dump, tr_json;
    std::uint64_t tr_rays = 1000000, tr_seed = 1;
    sc_trace->add_option("--scene", tr_scene, "scene JSON")->required();
    sc_trace->add_option("--refractor", tr_refractor, "refractor JSON")->required();
    sc_trace->add_option("--rays", tr_rays, "ray count");
    sc_trace->add_option("--seed", tr_seed, "RNG seed");
    sc_trace->add_option("--out", tr_out, "histogram CSV")->required();
    sc_trace->add_option("--dump", tr_dump, "optional per-ray dump CSV");
    sc_trace->add_option("--json", tr_json, "optional histogram JSON");

    // ---- verify-lemmas ----
    auto* sc_verify = app.add_subcommand("verify-lemmas", "run inequality suites");
    std::string vl_scene, vl_refractor, vl_suite = "all", vl_out;
    std::size_t vl_samples = 10000;
    std::uint64_t vl_seed = 7;
    sc_verify->add_option("--scene", vl_scene, "scene JSON")->required();
    sc_verify->add_option("--refractor", vl_refractor, "refractor JSON (needed for suites 5.x)");
    sc_verify->add_option("--suite", vl_suite, "suite id (3.1 .. 5.2) or 'all'");
    sc_verify->add_option("--samples", vl_samples, "base sample budget N (suites also run at 4N)");
    sc_verify->add_option("--seed", vl_seed, "RNG seed");
    sc_verify->add_option("--out", vl_out, "report JSON path");

    // ---- estimate-holder ----
    auto* sc_holder = app.add_subcommand("estimate-holder", "dyadic Hölder modulus diagnostics");
    std::string eh_scene, eh_refractor, eh_out, eh_csv;
    int eh_scales = 6;
    std::size_t eh_pairs = 2000;
    std::uint64_t eh_seed = 11;
    double eh_delta = 0.0, eh_gate = 1.0;
    sc_holder->add_option("--scene", eh_scene, "scene JSON")->required();
    sc_holder->add_option("--refractor", eh_refractor, "refractor JSON")->required();
    sc_holder->add_option("--scales", eh_scales, "number of dyadic strata");
    sc_holder->add_option("--pairs", eh_pairs, "pairs per stratum");
    sc_holder->add_option("--seed", eh_seed, "RNG seed");
    sc_holder->add_option("--delta", eh_delta, "ball half-size (0 = derive from cap)");
    sc_holder->add_option("--gate", eh_gate, "gate factor: keep pairs with |dY| >= gate |dx|");
    sc_holder->add_option("--out", eh_out, "report JSON path");
    sc_holder->add_option("--csv", eh_csv, "plot data CSV (scale, modulus, ratio)");

    // ---- export ----
    auto* sc_export = app.add_subcommand("export", "re-emit scenes/refractors and export meshes");
    std::string xp_scene, xp_refractor, xp_emit_scene, xp_emit_refractor, xp_obj, xp_csv;
    sc_export->add_option("--scene", xp_scene, "scene JSON input");
    sc_export->add_option("--refractor", xp_refractor, "refractor JSON input");
    sc_export->add_option("--emit-scene", xp_emit_scene, "write the parsed scene back out");
    sc_export->add_option("--emit-refractor", xp_emit_refractor, "write the parsed refractor back out");
    sc_export->add_option("--obj", xp_obj, "surface mesh output (needs scene + refractor, n = 3)");
    sc_export->add_option("--csv", xp_csv, "surface polyline output (n = 2)");

    CLI11_PARSE(app, argc, argv);
    int nthreads = nfr::resolve_threads(threads);

    try {
        Timer timer;
        nfr::RunManifest manifest;

        if (*sc_example) {
            manifest.command = "example-scene";
            double C = ex_C;
            if (C <= 0.0) C = nfr::example_min_C_for_HB(ex_kappa, ex_c2, ex_rfrac, ex_n);
            auto [scene, info] = nfr::build_example_scene(ex_kappa, ex_c2, C, ex_rfrac, ex_n);
            scene.seed = ex_seed;
            nfr::write_json_file(ex_out, nfr::scene_to_json(scene));
            std::fprintf(stderr,
                         "example scene: n=%d kappa=%g c2=%g C=%.10g M=%.10g R=%.10g "
                         "half_angle=%.10g min_C_for_HB=%.10g\n",
                         ex_n, ex_kappa, ex_c2, C, info.M, info.R, scene.omega.half_angle,
                         info.min_C_for_HB);
            manifest.config = {{"kappa", ex_kappa}, {"c2", ex_c2}, {"C", C},
                               {"r_fraction", ex_rfrac}, {"n", ex_n}};
            manifest.seed = ex_seed;
            manifest.outputs = {ex_out};
            manifest.wall_time_s = timer.seconds();
            manifest.finalize_and_write(ex_out + ".manifest.json");
            return 0;
        }

        if (*sc_check) {
            manifest.command = "check-hypotheses";
            manifest.add_input(ch_scene);
            nfr::Scene scene = nfr::scene_from_json(nfr::read_json_file(ch_scene));
            nfr::HypothesisReport rep;
            rep.subs.push_back(nfr::check_HA(scene, ch_samples, ch_seed));
            rep.subs.push_back(nfr::check_HB(scene, ch_samples, ch_seed));
            rep.subs.push_back(nfr::check_HC(scene, ch_mu, ch_samples, ch_seed));
            if (scene.target.kind == nfr::TargetKind::PlanarDisk) {
                double mu0 = ch_mu0 > 0.0 ? ch_mu0 : nfr::default_mu0(scene, 16, ch_seed);
                rep.subs.push_back(nfr::check_HD(scene, mu0,
                                                 std::min<std::size_t>(ch_samples, 48), ch_seed));
            }
            if (ch_tau > 0.0) rep.subs.push_back(nfr::check_H1H2(scene, ch_tau, ch_samples, ch_seed));
            std::fprintf(stderr, "hypothesis checks (%zu samples, seed %llu):\n", ch_samples,
                         static_cast<unsigned long long>(ch_seed));
            for (const auto& s : rep.subs) print_subreport(s);
            manifest.config = {{"samples", ch_samples}, {"mu", ch_mu}, {"tau", ch_tau}};
            manifest.seed = ch_seed;
            if (!ch_out.empty()) {
                nfr::write_json_file(ch_out, nfr::hypothesis_report_to_json(rep));
                manifest.outputs = {ch_out};
                manifest.wall_time_s = timer.seconds();
                manifest.finalize_and_write(ch_out + ".manifest.json");
            }
            return rep.all_pass() ? 0 : 1;
        }

        if (*sc_design) {
            manifest.command = "design";
            manifest.add_input(de_scene);
            nfr::Scene scene = nfr::scene_from_json(nfr::read_json_file(de_scene));
            nfr::SolverConfig config;
            config.tol_energy = de_tol;
            config.quad_nodes = de_quad;
            config.max_outer_iterations = de_sweeps;
            config.threads = nthreads;
            if (scene.target.kind == nfr::TargetKind::PlanarDisk) {
                std::size_t rings = de_rings, sectors = de_sectors;
                if (scene.n == 2) {
                    sectors = de_targets ? de_targets : 16;
                    rings = 1;
                } else if (rings == 0 || sectors == 0) {
                    std::size_t N = de_targets ? de_targets : 16;
                    rings = 1;
                    while ((rings + 1) * (rings + 1) * 4 <= N) ++rings;
                    sectors = (N + rings - 1) / rings;
                }
                auto grid = nfr::cap_grid(scene.omega, scene.n,
                                          config.quad_nodes ? config.quad_nodes
                                                            : nfr::default_quad_nodes(scene.n));
                double total = nfr::integrate_density(grid, scene.density);
                scene = nfr::discretize_disk_target(scene, rings, sectors, total,
                                                    de_fractions.empty() ? nullptr : &de_fractions);
                std::fprintf(stderr, "discretized disk target: %zu points\n",
                             scene.target.points.size());
            }
            nfr::SolveResult result = nfr::solve(scene, config);
            nfr::RefractorFile rf{result.u, scene.n, result.residuals, result.sweeps};
            nfr::write_json_file(de_out, nfr::refractor_to_json(rf));
            manifest.outputs = {de_out};
            // the solved (discretized) scene is what trace and the verifiers need
            std::string scene_out = stem_of(de_out) + "_scene.json";
            nfr::write_json_file(scene_out, nfr::scene_to_json(scene));
            manifest.outputs.push_back(scene_out);
            std::string trace_path = de_trace.empty() ? stem_of(de_out) + "_trace.csv" : de_trace;
            nfr::write_convergence_csv(trace_path, result.trace);
            manifest.outputs.push_back(trace_path);
            if (scene.n == 3) {
                std::string obj = de_obj.empty() ? stem_of(de_out) + ".obj" : de_obj;
                nfr::write_obj(obj, result.u, scene);
                manifest.outputs.push_back(obj);
            } else {
                std::string csv = de_csv.empty() ? stem_of(de_out) + "_polyline.csv" : de_csv;
                nfr::write_polyline_csv(csv, result.u, scene);
                manifest.outputs.push_back(csv);
            }
            double worst = 0.0;
            for (double r : result.residuals) worst = std::max(worst, r);
            std::fprintf(stderr, "design: %d sweeps, max residual %.3g, %zu quadrature nodes\n",
                         result.sweeps, worst, result.grid_nodes);
            manifest.config = {{"tol", de_tol}, {"quad_nodes", config.quad_nodes},
                               {"max_sweeps", de_sweeps}, {"threads", nthreads}};
            manifest.seed = scene.seed;
            manifest.wall_time_s = timer.seconds();
            manifest.finalize_and_write(de_out + ".manifest.json");
            return 0;
        }

        if (*sc_trace) {
            manifest.command = "trace";
            manifest.add_input(tr_scene);
            manifest.add_input(tr_refractor);
            nfr::Scene scene = nfr::scene_from_json(nfr::read_json_file(tr_scene));
            nfr::RefractorFile rf = nfr::refractor_from_json(nfr::read_json_file(tr_refractor));
            nfr::Histogram hist =
                nfr::irradiance_histogram(rf.u, scene, tr_rays, tr_seed, nthreads);
            nfr::write_histogram_csv(tr_out, hist, scene.target.weights);
            manifest.outputs = {tr_out};
            if (!tr_json.empty()) {
                nfr::write_json_file(tr_json, nfr::histogram_to_json(hist));
                manifest.outputs.push_back(tr_json);
            }
            if (!tr_dump.empty()) {
                nfr::write_ray_dump_csv(tr_dump, rf.u, scene, std::min<std::uint64_t>(tr_rays, 100000),
                                        tr_seed);
                manifest.outputs.push_back(tr_dump);
            }
            std::fprintf(stderr, "trace: %llu rays, %llu boundary, %llu TIR, %llu missed\n",
                         static_cast<unsigned long long>(hist.total_rays),
                         static_cast<unsigned long long>(hist.boundary_rays),
                         static_cast<unsigned long long>(hist.tir_rays),
                         static_cast<unsigned long long>(hist.miss_rays));
            manifest.config = {{"rays", tr_rays}, {"threads", nthreads}};
            manifest.seed = tr_seed;
            manifest.wall_time_s = timer.seconds();
            manifest.finalize_and_write(tr_out + ".manifest.json");
            return 0;
        }

        if (*sc_verify) {
            manifest.command = "verify-lemmas";
            manifest.add_input(vl_scene);
            nfr::Scene scene = nfr::scene_from_json(nfr::read_json_file(vl_scene));
            nfr::DiscreteRefractor refr;
            bool have_refr = false;
            if (!vl_refractor.empty()) {
                manifest.add_input(vl_refractor);
                refr = nfr::refractor_from_json(nfr::read_json_file(vl_refractor)).u;
                have_refr = true;
            }
            std::vector<std::string> ids =
                vl_suite == "all" ? nfr::all_suite_ids() : std::vector<std::string>{vl_suite};
            nfr::json out = nfr::json::array();
            bool all_pass = true;
            for (const std::string& id : ids) {
                if ((id == "5.1" || id == "5.2") && !have_refr) {
                    if (vl_suite == "all") continue;  // skip refractor suites in bulk runs
                    throw nfr::InvalidParameters("suite " + id + " needs --refractor");
                }
                nfr::LemmaReport rep = nfr::run_lemma_suite(id, scene, have_refr ? &refr : nullptr,
                                                            vl_samples, vl_seed);
                print_lemma_report(rep);
                out.push_back(nfr::lemma_report_to_json(rep));
                all_pass = all_pass && rep.passes;
            }
            manifest.config = {{"suite", vl_suite}, {"samples", vl_samples}};
            manifest.seed = vl_seed;
            if (!vl_out.empty()) {
                nfr::write_json_file(vl_out, out);
                manifest.outputs = {vl_out};
                manifest.wall_time_s = timer.seconds();
                manifest.finalize_and_write(vl_out + ".manifest.json");
            }
            return all_pass ? 0 : 1;
        }

        if (*sc_holder) {
            manifest.command = "estimate-holder";
            manifest.add_input(eh_scene);
            manifest.add_input(eh_refractor);
            nfr::Scene scene = nfr::scene_from_json(nfr::read_json_file(eh_scene));
            nfr::RefractorFile rf = nfr::refractor_from_json(nfr::read_json_file(eh_refractor));
            nfr::HolderConfig cfg;
            cfg.scales = eh_scales;
            cfg.pairs_per_scale = eh_pairs;
            cfg.seed = eh_seed;
            cfg.delta = eh_delta;
            cfg.gate_factor = eh_gate;
            nfr::HolderReport map_rep = nfr::estimate_holder_map(rf.u, scene, cfg);
            nfr::HolderReport grad_rep = nfr::estimate_holder_gradient(rf.u, scene, cfg);
            print_holder_report("map", map_rep);
            print_holder_report("gradient", grad_rep);
            nfr::json out;
            out["map"] = nfr::holder_report_to_json(map_rep);
            out["gradient"] = nfr::holder_report_to_json(grad_rep);
            manifest.config = {{"scales", eh_scales}, {"pairs", eh_pairs}, {"gate", eh_gate}};
            manifest.seed = eh_seed;
            if (!eh_out.empty()) {
                nfr::write_json_file(eh_out, out);
                manifest.outputs.push_back(eh_out);
            }
            if (!eh_csv.empty()) {
                nfr::write_holder_csv(eh_csv, map_rep);
                manifest.outputs.push_back(eh_csv);
            }
            if (!manifest.outputs.empty()) {
                manifest.wall_time_s = timer.seconds();
                manifest.finalize_and_write(manifest.outputs.front() + ".manifest.json");
            }
            bool ok = std::isfinite(map_rep.fitted_ratio_sup) &&
                      std::isfinite(grad_rep.fitted_ratio_sup);
            return ok ? 0 : 1;
        }

        if (*sc_export) {
            manifest.command = "export";
            nfr::Scene scene;
            bool have_scene = false;
            nfr::RefractorFile rf;
            bool have_refr = false;
            if (!xp_scene.empty()) {
                manifest.add_input(xp_scene);
                scene = nfr::scene_from_json(nfr::read_json_file(xp_scene));
                have_scene = true;
            }
            if (!xp_refractor.empty()) {
                manifest.add_input(xp_refractor);
                rf = nfr::refractor_from_json(nfr::read_json_file(xp_refractor));
                have_refr = true;
            }
            if (!xp_emit_scene.empty()) {
                if (!have_scene) throw nfr::InvalidParameters("--emit-scene needs --scene");
                nfr::write_json_file(xp_emit_scene, nfr::scene_to_json(scene));
                manifest.outputs.push_back(xp_emit_scene);
            }
            if (!xp_emit_refractor.empty()) {
                if (!have_refr) throw nfr::InvalidParameters("--emit-refractor needs --refractor");
                nfr::write_json_file(xp_emit_refractor, nfr::refractor_to_json(rf));
                manifest.outputs.push_back(xp_emit_refractor);
            }
            if (!xp_obj.empty()) {
                if (!have_scene || !have_refr)
                    throw nfr::InvalidParameters("--obj needs --scene and --refractor");
                nfr::write_obj(xp_obj, rf.u, scene);
                manifest.outputs.push_back(xp_obj);
            }
            if (!xp_csv.empty()) {
                if (!have_scene || !have_refr)
                    throw nfr::InvalidParameters("--csv needs --scene and --refractor");
                nfr::write_polyline_csv(xp_csv, rf.u, scene);
                manifest.outputs.push_back(xp_csv);
            }
            if (!manifest.outputs.empty()) {
                manifest.wall_time_s = timer.seconds();
                manifest.finalize_and_write(manifest.outputs.front() + ".manifest.json");
            }
            return 0;
        }
    } catch (const nfr::InvalidParameters& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const nfr::NotConverged& e) {
        std::fprintf(stderr, "solver did not converge: %s\n", e.what());
        for (double r : e.residual_trace) std::fprintf(stderr, "  residual %.6g\n", r);
        return 1;
    } catch (const nfr::Error& e) {
        std::fprintf(stderr, "verification failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
