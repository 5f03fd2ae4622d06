#include "common.hpp"

#include "qt/closure_table.hpp"
#include "qt/limit_lab.hpp"

#include <doctest.h>

using namespace qt;
using namespace qt::test;

namespace {

const LimitContext& context() {
    static const LimitContext ctx = make_limit_context(appendix_coefficients(), rule(), 0);
    return ctx;
}

SimConfig small_config(int n) {
    SimConfig cfg;
    cfg.grid = Grid{n, n, 2 * M_PI, 2 * M_PI};
    cfg.closure_mode = ClosureMode::Direct;
    cfg.init.frame_amplitude = 0.3;
    cfg.init.velocity_amplitude = 0.1;
    return cfg;
}

std::unique_ptr<PdeSolver> solver_for(const SimConfig& cfg) {
    return std::make_unique<PdeSolver>(cfg, rule(), make_direct_provider(cfg.closure_route, cfg.params, rule(), 1));
}

std::vector<Mat3> signed_permutations() {
    std::vector<Mat3> out;
    int perm[3] = {0, 1, 2};
    do {
        for (int s = 0; s < 8; ++s) {
            Mat3 p = Mat3::Zero();
            for (int i = 0; i < 3; ++i) p(perm[i], i) = (s >> i & 1) ? -1.0 : 1.0;
            if (p.determinant() > 0) out.push_back(p);
        }
    } while (std::next_permutation(perm, perm + 3));
    return out;
}

double l2_of(const std::vector<double>& f) {
    double s = 0.0;
    for (double x : f) s += x * x;
    return std::sqrt(s);
}

QPair unit_normal(const LimitContext& ctx, const Mat3& r, Rng& rng) {
    const Mat10 b = block_rotation(r);
    const Vec10 x = (Mat10::Identity() - b * ctx.p_in * b.transpose()) * random_vec10(rng);
    return QPair::from_vec(x.normalized());
}

}  // namespace

TEST_SUITE("limit_lab") {

TEST_CASE("projection of a manifold point") {
    Rng rng(1);
    const Mat3 r = random_rotation(rng);
    const QPair q = rotate(context().q0, r);
    const ManifoldProjection p = project_to_manifold(q, context());
    CHECK(p.converged);
    CHECK(p.distance < 1e-10);
    CHECK((p.q0 - q).norm() < 1e-10);
}

TEST_CASE("normal perturbation is recovered as the distance") {
    Rng rng(2);
    for (int t = 0; t < 5; ++t) {
        const Mat3 r = random_rotation(rng);
        const QPair q = rotate(context().q0, r) + unit_normal(context(), r, rng) * 0.01;
        const ManifoldProjection p = project_to_manifold(q, context());
        CHECK(std::abs(p.distance - 0.01) < 1e-6);
    }
}

TEST_CASE("projection distance is rotation invariant and never worse than the seed") {
    Rng rng(3);
    const std::vector<Mat3> perms = signed_permutations();
    REQUIRE(perms.size() == 24u);
    for (int t = 0; t < 10; ++t) {
        const Mat3 r = random_rotation(rng);
        const QPair q = rotate(context().q0, r) + QPair(random_vec5(rng, 0.02), random_vec5(rng, 0.02));
        const ManifoldProjection p = project_to_manifold(q, context());
        const Mat3 r2 = random_rotation(rng);
        CHECK(std::abs(project_to_manifold(rotate(q, r2), context()).distance - p.distance) < 1e-9);

        const Mat3 seed = joint_diagonalize(q.m1(), q.m2());
        double best = 1e300;
        for (const Mat3& s : perms) {
            const Mat3 c = seed * s;
            if (c.determinant() > 0) best = std::min(best, (q - rotate(context().q0, c)).norm());
        }
        CHECK(p.distance <= best + 1e-14);
    }
}

TEST_CASE("rotating the Hessian along a frame path") {
    Rng rng(4);
    const Mat3 r = random_rotation(rng);
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Mat10& h = context().spectrum.hessian;
    auto h_at = [&](double t) {
        const Mat10 b = block_rotation(Frame::from_axis_angle(axis, t).matrix() * r);
        return Mat10(b * h * b.transpose());
    };
    // Generator of the rotation on coordinates: X -> [w, X] blockwise.
    Mat3 w;
    w << 0, -axis(2), axis(1), axis(2), 0, -axis(0), -axis(1), axis(0), 0;
    Mat10 gen = Mat10::Zero();
    for (int a = 0; a < 5; ++a) {
        const Mat3& e = sym_basis()[a];
        const Vec5 c = coords_of(w * e - e * w);
        gen.block<5, 1>(0, a) = c;
        gen.block<5, 1>(5, 5 + a) = c;
    }
    const Mat10 h0 = h_at(0.0);
    const Mat10 exact = gen * h0 - h0 * gen;
    const double e3 = ((h_at(1e-3) - h_at(-1e-3)) / 2e-3 - exact).norm();
    const double e4 = ((h_at(1e-4) - h_at(-1e-4)) / 2e-4 - exact).norm();
    CHECK(e3 < 1e-4 * exact.norm());
    CHECK(e3 / e4 > 50.0);
}

TEST_CASE("leading-order correction is orthogonal to the kernel and solves the linear system") {
    SimConfig cfg = small_config(8);
    auto solver = solver_for(cfg);
    const FieldState s = initial_state(cfg, context(), *solver);
    std::vector<ManifoldProjection> proj(s.q.size());
    for (std::size_t i = 0; i < s.q.size(); ++i) proj[i] = project_to_manifold(s.q[i], context());
    std::vector<QPair> q0(s.q.size());
    for (std::size_t i = 0; i < q0.size(); ++i) q0[i] = proj[i].q0;
    std::vector<KineticOperators> ops;
    solver->provider().evaluate(q0, ops);
    const std::vector<QPair> zero(s.q.size());
    const std::vector<Vec3> rest(s.q.size(), Vec3::Zero());
    const LimitFields lf = limit_fields(proj, zero, rest, ops, context(), *solver);
    const std::vector<QPair> g = elastic_force(solver->spectral(), q0, cfg.elastic);

    double max_q1 = 0.0;
    for (std::size_t i = 0; i < q0.size(); ++i) {
        const Mat10 b = block_rotation(proj[i].frame.matrix());
        const Mat10 pin = b * context().p_in * b.transpose();
        const Mat10 hn = b * context().spectrum.hessian * b.transpose();
        const Vec10 q1 = lf.q1_perp[i].vec();
        CHECK((pin * q1).norm() <= 1e-10 * std::max(1.0, q1.norm()));
        CHECK((hn * q1 + (Mat10::Identity() - pin) * g[i].vec()).norm() < 1e-10);
        max_q1 = std::max(max_q1, q1.norm());
    }
    CHECK(max_q1 > 1e-3);
}

TEST_CASE("static equilibrium has no correction and no frame residual") {
    SimConfig cfg = small_config(8);
    cfg.init.kind = "uniform";
    cfg.init.velocity_amplitude = 0.0;
    auto solver = solver_for(cfg);
    const FieldState s = initial_state(cfg, context(), *solver);
    const LimitFields lf = analyze_states(s, s, s, 0.01, context(), *solver);
    for (const QPair& q : lf.q1_perp) CHECK(q.norm() < 1e-10);
    for (const auto& r : lf.frame_residual) CHECK(l2_of(r) < 1e-10);
}

TEST_CASE("frame residual of a random field is order one") {
    SimConfig cfg = small_config(8);
    auto solver = solver_for(cfg);
    Rng rng(5);
    FieldState s;
    s.grid = cfg.grid;
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        s.q.push_back(rotate(context().q0, random_rotation(rng)));
        s.v.push_back(Vec3::Zero());
    }
    const auto res = frame_residual(s, s, s, 0.01, context(), *solver);
    const double rms = std::sqrt((std::pow(l2_of(res[0]), 2) + std::pow(l2_of(res[1]), 2) + std::pow(l2_of(res[2]), 2)) /
                                 static_cast<double>(s.q.size()));
    CHECK(rms > 0.1);
}

TEST_CASE("frame residual is invariant under a quarter turn of the configuration") {
    SimConfig cfg = small_config(8);
    auto solver = solver_for(cfg);
    const FieldState s = initial_state(cfg, context(), *solver);
    const int n = cfg.grid.nx;
    Mat3 rz;
    rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    FieldState t = s;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const std::size_t src = static_cast<std::size_t>(j) * n + (n - i) % n;
            t.q[i * n + j] = rotate(s.q[src], rz);
            t.v[i * n + j] = rz * s.v[src];
        }
    const auto a = frame_residual(s, s, s, 0.01, context(), *solver);
    const auto b = frame_residual(t, t, t, 0.01, context(), *solver);
    double na = 0.0, nb = 0.0;
    for (int k = 0; k < 3; ++k) {
        na += std::pow(l2_of(a[k]), 2);
        nb += std::pow(l2_of(b[k]), 2);
    }
    CHECK(na > 1e-6);
    CHECK(std::abs(std::sqrt(na) - std::sqrt(nb)) < 1e-8 * std::sqrt(na));
}

TEST_CASE("remainder functional") {
    SimConfig cfg = small_config(8);
    cfg.epsilon = 0.05;
    auto solver = solver_for(cfg);
    const FieldState s = initial_state(cfg, context(), *solver);
    std::vector<ManifoldProjection> proj(s.q.size());
    std::vector<QPair> q0(s.q.size());
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        proj[i] = project_to_manifold(s.q[i], context());
        q0[i] = proj[i].q0;
    }
    std::vector<KineticOperators> ops;
    solver->provider().evaluate(q0, ops);

    const std::size_t n = s.q.size();
    const RemainderDiagnostics zero =
        remainder_energy(std::vector<QPair>(n), std::vector<Vec3>(n, Vec3::Zero()), proj, ops, context(), *solver);
    CHECK(zero.frak_e == 0.0);
    CHECK(zero.e_norm == 0.0);
    CHECK(zero.f_norm == 0.0);
    CHECK(zero.pout_l2 == 0.0);

    Rng rng(6);
    for (int t = 0; t < 3; ++t) {
        std::vector<QPair> qr(n), qr2(n);
        std::vector<Vec3> vr(n), vr2(n);
        for (std::size_t i = 0; i < n; ++i) {
            qr[i] = QPair::from_vec(random_vec10(rng, 0.01));
            vr[i] = Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.01;
            qr2[i] = qr[i] * 2.0;
            vr2[i] = vr[i] * 2.0;
        }
        const RemainderDiagnostics a = remainder_energy(qr, vr, proj, ops, context(), *solver);
        const RemainderDiagnostics b = remainder_energy(qr2, vr2, proj, ops, context(), *solver);
        CHECK(a.frak_e > 0.0);
        CHECK(rel_err(b.frak_e, 4.0 * a.frak_e) < 1e-12);
        CHECK(rel_err(b.e_norm, 2.0 * a.e_norm) < 1e-12);
        CHECK(rel_err(b.f_norm, 2.0 * a.f_norm) < 1e-12);
        CHECK(rel_err(b.pout_l2, 2.0 * a.pout_l2) < 1e-12);
    }
}

TEST_CASE("remainder of a kernel field stays bounded as eps shrinks") {
    auto frak_e = [](double eps, bool kernel) {
        SimConfig cfg = small_config(8);
        cfg.epsilon = eps;
        cfg.init.kind = "uniform";
        auto solver = solver_for(cfg);
        const FieldState s = initial_state(cfg, context(), *solver);
        const std::size_t n = s.q.size();
        std::vector<ManifoldProjection> proj(n);
        std::vector<QPair> q0(n), qr(n);
        for (std::size_t i = 0; i < n; ++i) {
            proj[i] = project_to_manifold(s.q[i], context());
            q0[i] = proj[i].q0;
            const double w = 0.01 * std::cos(cfg.grid.x(static_cast<int>(i) / cfg.grid.ny));
            const Vec10 dir = kernel ? context().spectrum.xi_basis[0] : context().spectrum.positive_basis[0];
            qr[i] = QPair::from_vec(w * dir);
        }
        std::vector<KineticOperators> ops;
        solver->provider().evaluate(q0, ops);
        return remainder_energy(qr, std::vector<Vec3>(n, Vec3::Zero()), proj, ops, context(), *solver).frak_e;
    };
    const double k3 = frak_e(1e-3, true), k4 = frak_e(1e-4, true);
    CHECK(rel_err(k4, k3) < 1e-2);
    const double o3 = frak_e(1e-3, false), o4 = frak_e(1e-4, false);
    CHECK(o4 / o3 > 5.0);
}

TEST_CASE("well-prepared data sits at distance eps |Q1_perp| from the manifold") {
    SimConfig cfg = small_config(8);
    cfg.init.well_prepared = true;
    cfg.epsilon = 0.05;
    auto solver = solver_for(cfg);
    const FieldState wp = initial_state(cfg, context(), *solver);
    cfg.init.well_prepared = false;
    const FieldState base = initial_state(cfg, context(), *solver);
    for (std::size_t i = 0; i < wp.q.size(); i += 7) {
        const double d = project_to_manifold(wp.q[i], context()).distance;
        const double want = (wp.q[i] - base.q[i]).norm();
        CHECK(std::abs(d - want) < 1e-6 * std::max(1e-3, want));
    }
    CHECK(solver->divergence_norm(wp.v) < 1e-12);
}

TEST_CASE("log-log fit") {
    const std::vector<double> x = {0.1, 0.05, 0.025, 0.0125};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, 1.5));
    const auto [slope, r2] = loglog_fit(x, y);
    CHECK(std::abs(slope - 1.5) < 1e-12);
    CHECK(std::abs(r2 - 1.0) < 1e-12);
    CHECK_THROWS_AS(loglog_fit({1.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(loglog_fit({1.0, 2.0}, {1.0, -1.0}), std::invalid_argument);
}

TEST_CASE("sweep rejects a non-descending list") {
    SimConfig cfg = small_config(8);
    CHECK_THROWS_AS(epsilon_sweep(cfg, {0.05, 0.1}, rule()), std::invalid_argument);
}

}  // TEST_SUITE
