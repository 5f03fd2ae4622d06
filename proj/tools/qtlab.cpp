// qtlab: batch front-end for minimization, closure, relaxation, simulation and limit sweeps.

#include "qt/closure_table.hpp"
#include "qt/config.hpp"
#include "qt/dynamics.hpp"
#include "qt/equilibrium.hpp"
#include "qt/limit_lab.hpp"
#include "qt/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace qt;
using ojson = nlohmann::ordered_json;

namespace {

struct Common {
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string format = "json";
};

struct BulkOverrides {
    std::optional<double> c02, c03, c04, nu;
    std::optional<std::string> entropy;
};

// Numerical failures map to exit code 2.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RunConfig resolve(const Common& c, const BulkOverrides* b = nullptr) {
    RunConfig rc = c.config.empty() ? parse_config(nlohmann::json::object()) : load_config(c.config);
    if (c.seed) rc.sim.seed = *c.seed;
    if (c.threads) {
        rc.sim.threads = *c.threads;
    } else {
        // QT_THREADS applies when --threads is absent.
        if (const char* env = std::getenv("QT_THREADS")) {
            try {
                rc.sim.threads = std::stoi(env);
            } catch (const std::exception&) {
                throw ConfigError("QT_THREADS: expected an integer");
            }
        }
    }
    if (b) {
        if (b->c02) rc.sim.bulk.c02 = *b->c02;
        if (b->c03) rc.sim.bulk.c03 = *b->c03;
        if (b->c04) rc.sim.bulk.c04 = *b->c04;
        if (b->entropy) {
            if (*b->entropy == "original")
                rc.sim.bulk.kind = EntropyKind::original();
            else if (*b->entropy == "quasi")
                rc.sim.bulk.kind = EntropyKind::quasi(rc.sim.bulk.kind.nu);
            else
                throw ConfigError("--entropy: expected quasi or original");
        }
        if (b->nu) {
            if (!rc.sim.bulk.kind.is_quasi()) throw ConfigError("--nu applies to the quasi entropy only");
            try {
                rc.sim.bulk.kind = EntropyKind::quasi(*b->nu);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("--nu: ") + e.what());
            }
        }
    }
    try {
        rc.sim.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return rc;
}

std::filesystem::path out_dir(const Common& c) {
    std::filesystem::path p(c.out);
    std::filesystem::create_directories(p);
    return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error(path.string() + ": cannot write");
    f << text;
}

void flatten_csv(const ojson& j, const std::string& prefix, std::string& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten_csv(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten_csv(j[i], prefix + "[" + std::to_string(i) + "]", out);
    } else if (j.is_number_float()) {
        out += prefix + "," + (std::isfinite(j.get<double>()) ? fmt(j.get<double>()) : "nan") + "\n";
    } else if (j.is_string()) {
        out += prefix + "," + j.get<std::string>() + "\n";
    } else {
        out += prefix + "," + j.dump() + "\n";
    }
}

void emit(const Common& c, const std::string& name, const ojson& report) {
    const auto dir = out_dir(c);
    if (c.format == "csv") {
        std::string text = "key,value\n";
        flatten_csv(report, "", text);
        write_text(dir / (name + ".csv"), text);
    } else {
        write_text(dir / (name + ".json"), dump_json(report));
    }
}

ojson coeff_json(const BulkCoefficients& b) {
    return ojson{{"c02", b.c02}, {"c03", b.c03}, {"c04", b.c04},
                 {"entropy", b.kind.is_quasi() ? "quasi" : "original"}, {"nu", b.kind.nu}};
}

ojson form_json(const BiaxialForm& f) {
    ojson frame = ojson::array();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) frame.push_back(f.frame.matrix()(i, j));
    return ojson{{"s1", f.s1}, {"b1", f.b1}, {"s2", f.s2}, {"b2", f.b2}, {"frame", frame}};
}

template <class V>
ojson vec_json(const V& v) {
    ojson a = ojson::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

QuadratureRule rule_for(const RunConfig& rc) { return build_rule(rc.sim.quad_beta, rc.sim.quad_torus); }

int cmd_minimize(const Common& c, const BulkOverrides& b) {
    const RunConfig rc = resolve(c, &b);
    const QuadratureRule rule = rule_for(rc);
    const MinimizerResult mr = find_minimizer(rc.sim.bulk, rule, rc.starts, rc.sim.seed);
    const bool ok = mr.grad_norm < 1e-8;
    ojson r;
    r["coefficients"] = coeff_json(rc.sim.bulk);
    r["minimizer"] = form_json(mr.form);
    r["q"] = vec_json(mr.q.vec());
    r["energy"] = mr.energy;
    r["grad_norm"] = mr.grad_norm;
    r["converged_starts"] = mr.converged_starts;
    r["pass"] = ok;
    emit(c, "minimize", r);
    std::printf("minimize: s1=%s b1=%s s2=%s b2=%s F=%s |J|=%.3g\n", fmt(mr.form.s1).c_str(), fmt(mr.form.b1).c_str(),
                fmt(mr.form.s2).c_str(), fmt(mr.form.b2).c_str(), fmt(mr.energy).c_str(), mr.grad_norm);
    return ok ? 0 : 2;
}

int cmd_spectrum(const Common& c, const BulkOverrides& b) {
    const RunConfig rc = resolve(c, &b);
    const QuadratureRule rule = rule_for(rc);
    const MinimizerResult mr = find_minimizer(rc.sim.bulk, rule, rc.starts, rc.sim.seed);
    const HessianSpectrum hs = hessian_spectrum(mr.form, rc.sim.bulk, rule);
    const double hn = hs.hessian.norm();
    ojson ratios = ojson::array();
    for (const QPair& x : hs.xi) {
        const double xn = x.norm();
        ratios.push_back(xn > 0 ? (hs.hessian * x.vec()).norm() / (hn * xn) : 0.0);
    }
    ojson r;
    r["coefficients"] = coeff_json(rc.sim.bulk);
    r["minimizer"] = form_json(mr.form);
    r["eigenvalues"] = vec_json(hs.eigenvalues);
    r["kernel_dim"] = hs.kernel_dim;
    r["xi_angle"] = hs.xi_angle;
    r["smallest_positive"] = hs.kernel_dim < 10 ? hs.smallest_positive() : 0.0;
    r["h_xi_ratio"] = ratios;
    emit(c, "spectrum", r);
    std::printf("spectrum: kernel_dim=%d smallest_positive=%s xi_angle=%.3g\n", hs.kernel_dim,
                fmt(hs.kernel_dim < 10 ? hs.smallest_positive() : 0.0).c_str(), hs.xi_angle);
    return 0;
}

int cmd_verify(const Common& c, const BulkOverrides& b) {
    const RunConfig rc = resolve(c, &b);
    const QuadratureRule rule = rule_for(rc);
    const Assumption1Report a = verify_assumption1(rc.sim.bulk, rule, rc.starts, rc.sim.seed);
    ojson r;
    r["coefficients"] = coeff_json(a.coefficients);
    r["minimizer"] = form_json(a.minimizer);
    r["eigenvalues"] = vec_json(a.eigenvalues);
    r["kernel_dim"] = a.kernel_dim;
    r["xi_angle"] = a.xi_angle;
    r["pass"] = a.pass;
    emit(c, "verify", r);
    std::printf("verify: kernel_dim=%d xi_angle=%.3g pass=%s\n", a.kernel_dim, a.xi_angle, a.pass ? "true" : "false");
    return a.pass ? 0 : 2;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": cannot parse '" + item + "'");
        }
    }
    return out;
}

// Rotated minimizers with small perturbations; shared by the table checks.
std::vector<QPair> near_manifold_samples(const BiaxialForm& f, std::uint64_t seed, int n, double amp) {
    Rng rng(seed);
    std::vector<QPair> out;
    for (int i = 0; i < n; ++i) {
        const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
        const Frame fr = Frame::from_axis_angle(axis, rng.uniform(0.0, 3.0));
        Vec10 p;
        for (int k = 0; k < 10; ++k) p(k) = rng.normal();
        out.push_back(biaxial_pair(f.s1, f.b1, f.s2, f.b2, fr) + QPair::from_vec(p.normalized() * amp * rng.uniform()));
    }
    return out;
}

int cmd_closure(const Common& c, const std::string& qlist, const std::string& route, bool validate, int samples) {
    RunConfig rc = resolve(c);
    if (!route.empty()) rc.sim.closure_route = parse_route(route);
    const QuadratureRule rule = rule_for(rc);
    QPair q;
    std::optional<MinimizerResult> mr;
    if (!qlist.empty()) {
        const std::vector<double> v = parse_list(qlist, "--q");
        if (v.size() != 10) throw ConfigError("--q: expected 10 coordinates");
        Vec10 x;
        for (int i = 0; i < 10; ++i) x(i) = v[i];
        q = QPair::from_vec(x);
    } else {
        mr = find_minimizer(rc.sim.bulk, rule, rc.starts, rc.sim.seed);
        q = mr->q;
    }
    const ClosureTensors ct = closure_tensors(q, rc.sim.closure_route, rule, rc.sim.params.e1);
    const auto dir = out_dir(c);
    write_text(dir / "closure.csv", closure_csv(ct));
    int code = 0;
    if (validate) {
        if (!mr) mr = find_minimizer(rc.sim.bulk, rule, rc.starts, rc.sim.seed);
        SimConfig sc = rc.sim;
        sc.closure_mode = ClosureMode::Table;
        auto table = make_provider(sc, rule);
        auto direct = make_direct_provider(sc.closure_route, sc.params, rule, sc.threads);
        const std::vector<QPair> pts = near_manifold_samples(mr->form, sc.seed, samples, 0.01);
        const double err = compare_providers(*table, *direct, pts);
        ojson r;
        r["route"] = route_name(sc.closure_route);
        r["spacing"] = sc.table_spacing;
        r["samples"] = samples;
        r["max_rel_error"] = err;
        r["pass"] = err <= 1e-3;
        emit(c, "table_validation", r);
        std::printf("closure-table: max relative error %.3e over %d nodes\n", err, samples);
        code = err <= 1e-3 ? 0 : 2;
    } else {
        std::printf("closure-table: wrote closure.csv (%s)\n", route_name(rc.sim.closure_route).c_str());
    }
    return code;
}

int cmd_relax(const Common& c) {
    const RunConfig rc = resolve(c);
    const SimConfig& s = rc.sim;
    const QuadratureRule rule = rule_for(rc);
    const LimitContext ctx = make_limit_context(s.bulk, rule, s.seed);
    Vec10 dir;
    dir << 1.0, -0.5, 0.3, 0.2, -0.4, 0.6, 0.1, -0.3, 0.5, -0.2;
    QPair q = rotate(ctx.q0, Frame::from_axis_angle(Vec3(0.3, 0.5, 1.0), s.init.frame_amplitude).matrix()) +
              QPair::from_vec(s.init.perturbation * dir.normalized());
    const double dt = s.time_step();
    std::string csv = "time,bulk,grad_norm\n";
    double t = 0.0, g = bulk_gradient(q, s.bulk, rule).norm();
    csv += fmt(t) + "," + fmt(bulk_energy(q, s.bulk, rule)) + "," + fmt(g) + "\n";
    while (t < s.t_end - 1e-12 && g >= 1e-8) {
        q = step_homogeneous(q, s, dt, rule);
        t += dt;
        g = bulk_gradient(q, s.bulk, rule).norm();
        csv += fmt(t) + "," + fmt(bulk_energy(q, s.bulk, rule)) + "," + fmt(g) + "\n";
    }
    const auto d = out_dir(c);
    write_text(d / "relax.csv", csv);
    const ManifoldProjection mp = project_to_manifold(q, ctx);
    const bool ok = g < 1e-8 && mp.distance < 1e-6;
    ojson r;
    r["time"] = t;
    r["q"] = vec_json(q.vec());
    r["grad_norm"] = g;
    r["manifold_distance"] = mp.distance;
    r["pass"] = ok;
    emit(c, "relax", r);
    std::printf("relax: t=%s |J|=%.3g distance=%.3g\n", fmt(t).c_str(), g, mp.distance);
    return ok ? 0 : 2;
}

std::string energy_row(const EnergyReport& e) {
    return fmt(e.time) + "," + fmt(e.kinetic) + "," + fmt(e.bulk) + "," + fmt(e.elastic) + "," + fmt(e.total) + "," +
           fmt(e.diss_mu) + "," + fmt(e.diss_visc) + "," + fmt(e.diss_p) + "\n";
}

int cmd_simulate(const Common& c) {
    const RunConfig rc = resolve(c);
    const SimConfig& s = rc.sim;
    const QuadratureRule rule = rule_for(rc);
    const LimitContext ctx = make_limit_context(s.bulk, rule, s.seed);
    PdeSolver solver(s, rule);
    FieldState state = initial_state(s, ctx, solver);
    const auto dir = out_dir(c);

    double table_err = 0.0;
    bool table_ok = true;
    if (s.closure_mode == ClosureMode::Table && s.validate_table) {
        Rng rng(s.seed);
        std::vector<QPair> pts;
        for (int i = 0; i < 100; ++i) pts.push_back(state.q[rng.next() % state.q.size()]);
        auto direct = make_direct_provider(s.closure_route, s.params, rule, s.threads);
        table_err = compare_providers(solver.provider(), *direct, pts);
        table_ok = table_err <= 1e-3;
    }

    const double dt = s.time_step();
    const long steps = std::lround(s.t_end / dt);
    std::string csv = "time,kinetic,bulk,elastic,total,diss_mu,diss_visc,diss_p\n";
    const EnergyReport e0 = solver.energy(state);
    csv += energy_row(e0);
    double e_prev = e0.total, diss = 0.0, worst_rate = -std::numeric_limits<double>::infinity();
    int halvings = 0;
    if (s.snapshot_every > 0) write_snapshot((dir / "snap_00000.bin").string(), state);
    for (long n = 1; n <= steps; ++n) {
        PdeSolver::StepInfo info;
        state = solver.step(state, &info);
        state.time = n * dt;
        diss += info.dissipation;
        halvings += info.halvings;
        const bool out = n % s.output_every == 0 || n == steps;
        const EnergyReport e = out ? solver.energy(state) : solver.free_energy(state);
        worst_rate = std::max(worst_rate, (e.total - e_prev) / dt);
        e_prev = e.total;
        if (out) csv += energy_row(e);
        if (s.snapshot_every > 0 && n % s.snapshot_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "snap_%05ld.bin", n);
            write_snapshot((dir / name).string(), state);
        }
    }
    write_text(dir / "energy.csv", csv);
    write_snapshot((dir / "final.bin").string(), state);
    const double residual = e_prev + diss - e0.total;
    const bool monotone = worst_rate <= 1e-9;
    ojson r;
    r["steps"] = steps;
    r["dt"] = dt;
    r["halvings"] = halvings;
    r["initial_energy"] = e0.total;
    r["final_energy"] = e_prev;
    r["dissipated"] = diss;
    r["energy_residual"] = residual;
    r["max_energy_rate"] = worst_rate;
    r["monotone"] = monotone;
    r["divergence"] = solver.divergence_norm(state.v);
    r["table_error"] = table_err;
    r["pass"] = monotone && table_ok;
    emit(c, "summary", r);
    std::printf("simulate: steps=%ld residual=%.3e max dE/dt=%.3e table_err=%.2e\n", steps, residual, worst_rate,
                table_err);
    return monotone && table_ok ? 0 : 2;
}

int cmd_sweep(const Common& c, const std::string& eps) {
    RunConfig rc = resolve(c);
    if (!eps.empty()) rc.sweep_eps = parse_list(eps, "--eps");
    for (std::size_t i = 0; i < rc.sweep_eps.size(); ++i)
        if (!(rc.sweep_eps[i] > 0) || (i > 0 && !(rc.sweep_eps[i] < rc.sweep_eps[i - 1])))
            throw ConfigError("--eps: values must be positive and descending");
    const QuadratureRule rule = rule_for(rc);
    SweepOptions opt;
    opt.sample_interval = rc.sample_interval;
    const SweepReport rep = epsilon_sweep(rc.sim, rc.sweep_eps, rule, opt);
    ojson runs = ojson::array();
    bool all_ok = true;
    for (const SweepRun& s : rep.runs) {
        all_ok = all_ok && s.ok;
        ojson r;
        r["eps"] = s.eps;
        r["sup_dist"] = s.sup_dist;
        r["sup_pout"] = s.sup_pout;
        r["frame_res_l2"] = {s.frame_res_l2[0], s.frame_res_l2[1], s.frame_res_l2[2]};
        r["frak_e_sup"] = s.frak_e_sup;
        r["fit_order"] = rep.fit_order;
        r["fit_r2"] = rep.fit_r2;
        r["pout_err"] = s.pout_err;
        r["e_norm_sup"] = s.e_norm_sup;
        r["f_norm_sup"] = s.f_norm_sup;
        r["max_in_fraction"] = s.max_in_fraction;
        r["samples"] = s.samples;
        r["ok"] = s.ok;
        r["failure"] = s.failure;
        runs.push_back(r);
    }
    ojson r;
    r["runs"] = runs;
    r["fit_order"] = rep.fit_order;
    r["fit_r2"] = rep.fit_r2;
    r["pout_order"] = rep.pout_order;
    r["pout_r2"] = rep.pout_r2;
    emit(c, "sweep", r);
    std::printf("sweep: fit_order=%.4f r2=%.4f pout_order=%.4f\n", rep.fit_order, rep.fit_r2, rep.pout_order);
    return all_ok ? 0 : 2;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "seed (overrides the config)");
    sub->add_option("--threads", c.threads, "worker threads (falls back to QT_THREADS)")->check(CLI::PositiveNumber);
    sub->add_option("--format", c.format, "report format")->check(CLI::IsMember({"json", "csv"}));
}

void add_bulk(CLI::App* sub, BulkOverrides& b) {
    sub->add_option("--c02", b.c02);
    sub->add_option("--c03", b.c03);
    sub->add_option("--c04", b.c04);
    sub->add_option("--nu", b.nu);
    sub->add_option("--entropy", b.entropy)->check(CLI::IsMember({"quasi", "original"}));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qtlab: two-tensor biaxial nematic toolkit"};
    app.require_subcommand(1, 1);
    Common common;
    BulkOverrides bulk;
    std::string qlist, route, eps;
    bool validate = false;
    int samples = 100;

    auto* minimize = app.add_subcommand("minimize", "find the bulk minimizer");
    add_common(minimize, common);
    add_bulk(minimize, bulk);
    auto* spectrum = app.add_subcommand("spectrum", "Hessian spectrum at the minimizer");
    add_common(spectrum, common);
    add_bulk(spectrum, bulk);
    auto* verify = app.add_subcommand("verify", "check the kernel structure at the minimizer");
    add_common(verify, common);
    add_bulk(verify, bulk);
    auto* closure = app.add_subcommand("closure-table", "closure tensors at a point, optional table validation");
    add_common(closure, common);
    closure->add_option("--q", qlist, "10 comma-separated coordinates (default: the minimizer)");
    closure->add_option("--route", route)->check(CLI::IsMember({"maxent", "quasi"}));
    closure->add_flag("--validate", validate, "compare the lattice table against direct evaluation");
    closure->add_option("--samples", samples)->check(CLI::PositiveNumber);
    auto* relax = app.add_subcommand("relax", "homogeneous relaxation");
    add_common(relax, common);
    auto* simulate = app.add_subcommand("simulate", "2D periodic simulation");
    add_common(simulate, common);
    auto* sweep = app.add_subcommand("sweep", "epsilon sweep from well-prepared data");
    add_common(sweep, common);
    sweep->add_option("--eps", eps, "descending comma-separated list");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*minimize) return cmd_minimize(common, bulk);
        if (*spectrum) return cmd_spectrum(common, bulk);
        if (*verify) return cmd_verify(common, bulk);
        if (*closure) return cmd_closure(common, qlist, route, validate, samples);
        if (*relax) return cmd_relax(common);
        if (*simulate) return cmd_simulate(common);
        if (*sweep) return cmd_sweep(common, eps);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    }
    return 1;
}
