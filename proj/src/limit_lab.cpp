#include "qt/limit_lab.hpp"

#include "qt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qt {

namespace {

using Field = std::vector<double>;

Mat3 cross_matrix(int k) {
    Mat3 w = Mat3::Zero();
    const int i = (k + 1) % 3, j = (k + 2) % 3;
    w(j, i) = 1.0;
    w(i, j) = -1.0;
    return w;
}

// The 24 proper signed permutation matrices.
const std::vector<Mat3>& proper_permutations() {
    static const std::vector<Mat3> perms = [] {
        std::vector<Mat3> out;
        int p[3] = {0, 1, 2};
        do {
            for (int s = 0; s < 8; ++s) {
                Mat3 m = Mat3::Zero();
                for (int c = 0; c < 3; ++c) m(p[c], c) = (s >> c) & 1 ? -1.0 : 1.0;
                if (m.determinant() > 0) out.push_back(m);
            }
        } while (std::next_permutation(p, p + 3));
        return out;
    }();
    return perms;
}

// Spectral gradient of every coordinate of a QPair field.
void qpair_gradient(const Spectral& sp, const std::vector<QPair>& q, std::vector<Vec10>& gx, std::vector<Vec10>& gy) {
    const std::size_t n = q.size();
    gx.assign(n, Vec10::Zero());
    gy.assign(n, Vec10::Zero());
    Field buf(n), dx(n), dy(n);
    for (int a = 0; a < 10; ++a) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = q[i].vec()(a);
        sp.gradient(buf.data(), dx.data(), dy.data());
        for (std::size_t i = 0; i < n; ++i) {
            gx[i](a) = dx[i];
            gy[i](a) = dy[i];
        }
    }
}

std::vector<QPair> qpair_laplacian(const Spectral& sp, const std::vector<QPair>& q) {
    const std::size_t n = q.size(), nc = sp.spectral_size();
    std::vector<QPair> out(n);
    Field buf(n);
    std::vector<cplx> f(nc);
    for (int a = 0; a < 10; ++a) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = q[i].vec()(a);
        sp.forward(buf.data(), f.data());
        for (std::size_t m = 0; m < nc; ++m) f[m] *= -(sp.kx(m) * sp.kx(m) + sp.ky(m) * sp.ky(m));
        sp.backward(f.data(), buf.data());
        for (std::size_t i = 0; i < n; ++i) {
            Vec10 v = out[i].vec();
            v(a) = buf[i];
            out[i] = QPair::from_vec(v);
        }
    }
    return out;
}

std::vector<Vec3> vec3_laplacian(const Spectral& sp, const std::vector<Vec3>& v) {
    const std::size_t n = v.size(), nc = sp.spectral_size();
    std::vector<Vec3> out(n, Vec3::Zero());
    Field buf(n);
    std::vector<cplx> f(nc);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = v[i](c);
        sp.forward(buf.data(), f.data());
        for (std::size_t m = 0; m < nc; ++m) f[m] *= -(sp.kx(m) * sp.kx(m) + sp.ky(m) * sp.ky(m));
        sp.backward(f.data(), buf.data());
        for (std::size_t i = 0; i < n; ++i) out[i](c) = buf[i];
    }
    return out;
}

// L2 norm of the spectral gradient of a vector field given per component.
template <class Get>
double gradient_l2(const Spectral& sp, std::size_t n, int comps, Get get) {
    Field buf(n), dx(n), dy(n);
    double s = 0.0;
    for (int c = 0; c < comps; ++c) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = get(i, c);
        sp.gradient(buf.data(), dx.data(), dy.data());
        for (std::size_t i = 0; i < n; ++i) s += dx[i] * dx[i] + dy[i] * dy[i];
    }
    return std::sqrt(s * sp.grid().cell_area());
}

class SharedProvider : public ClosureProvider {
public:
    explicit SharedProvider(ClosureProvider& p) : p_(p) {}
    void evaluate(const std::vector<QPair>& q, std::vector<KineticOperators>& out) override { p_.evaluate(q, out); }

private:
    ClosureProvider& p_;
};

std::vector<QPair> projected_field(const std::vector<ManifoldProjection>& proj) {
    std::vector<QPair> out(proj.size());
    for (std::size_t i = 0; i < proj.size(); ++i) out[i] = proj[i].q0;
    return out;
}

std::vector<ManifoldProjection> project_field(const std::vector<QPair>& q, const LimitContext& ctx, int threads,
                                              const std::vector<ManifoldProjection>* prefer) {
    std::vector<ManifoldProjection> out(q.size());
    parallel_for(q.size(), threads, [&](std::size_t i) {
        out[i] = prefer ? project_to_manifold(q[i], ctx, (*prefer)[i].frame.matrix()) : project_to_manifold(q[i], ctx);
    });
    return out;
}

double l2(const std::vector<QPair>& q, double area) {
    double s = 0.0;
    for (const auto& x : q) s += x.dot(x);
    return std::sqrt(s * area);
}

}  // namespace

LimitContext make_limit_context(const BulkCoefficients& c, const QuadratureRule& rule, std::uint64_t seed) {
    LimitContext ctx;
    const MinimizerResult mr = find_minimizer(c, rule, 8, seed);
    ctx.form = mr.form;
    ctx.form.frame = Frame();
    ctx.q0 = ctx.form.q();
    ctx.spectrum = hessian_spectrum(ctx.form, c, rule);
    ctx.h_pinv.setZero();
    for (std::size_t j = 0; j < ctx.spectrum.positive_basis.size(); ++j) {
        const Vec10& e = ctx.spectrum.positive_basis[j];
        ctx.h_pinv += e * e.transpose() / ctx.spectrum.positive_values[j];
    }
    ctx.p_in.setZero();
    for (const Vec10& u : ctx.spectrum.xi_basis) ctx.p_in += u * u.transpose();
    for (int k = 0; k < 3; ++k) ctx.xi.col(k) = ctx.spectrum.xi[k].vec();
    return ctx;
}

ManifoldProjection project_to_manifold(const QPair& q, const LimitContext& ctx, const std::optional<Mat3>& prefer) {
    const Mat3 base = joint_diagonalize(q.m1(), q.m2());
    auto dist = [&](const Mat3& r) { return (q - rotate(ctx.q0, r)).norm(); };
    Mat3 r = base;
    double best = std::numeric_limits<double>::infinity();
    for (const Mat3& p : proper_permutations()) {
        const Mat3 cand = base * p;
        double score = dist(cand);
        // Among equally close labellings keep the one nearest the preferred frame.
        if (prefer) score += 1e-9 * (cand - *prefer).norm();
        if (score < best) {
            best = score;
            r = cand;
        }
    }
    ManifoldProjection out;
    out.frame = Frame::orthonormalize(r);
    out.q0 = rotate(ctx.q0, out.frame.matrix());
    out.distance = (q - out.q0).norm();
    for (int it = 0; it < 50; ++it) {
        const Vec10 res = (q - out.q0).vec();
        Eigen::Matrix<double, 10, 3> jac;
        const Mat3 a = out.q0.m1(), b = out.q0.m2();
        for (int k = 0; k < 3; ++k) {
            const Mat3 w = cross_matrix(k);
            jac.col(k) = QPair::from_matrices(w * a - a * w, w * b - b * w).vec();
        }
        const Vec3 omega = jac.completeOrthogonalDecomposition().solve(res);
        const double angle = omega.norm();
        if (!(angle > 1e-15)) {
            out.converged = true;
            break;
        }
        const Mat3 rn = Frame::from_axis_angle(omega / angle, angle).matrix() * out.frame.matrix();
        const Frame fn = Frame::orthonormalize(rn);
        const QPair qn = rotate(ctx.q0, fn.matrix());
        const double dn = (q - qn).norm();
        if (!(dn < out.distance)) {
            // No further decrease: the step is below roundoff.
            out.converged = angle < 1e-8;
            break;
        }
        out.frame = fn;
        out.q0 = qn;
        out.distance = dn;
        if (angle < 1e-13) {
            out.converged = true;
            break;
        }
    }
    return out;
}

LimitFields limit_fields(const std::vector<ManifoldProjection>& proj, const std::vector<QPair>& dq0_dt,
                         const std::vector<Vec3>& v, const std::vector<KineticOperators>& ops,
                         const LimitContext& ctx, const PdeSolver& solver) {
    const std::size_t n = proj.size();
    const Spectral& sp = solver.spectral();
    const std::vector<QPair> q0 = projected_field(proj);
    std::vector<Vec10> gx, gy;
    qpair_gradient(sp, q0, gx, gy);
    const std::vector<QPair> g = elastic_force(sp, q0, solver.config().elastic);
    const std::vector<Mat3> kappa = solver.velocity_gradient(v);

    LimitFields out;
    out.proj = proj;
    out.q1_perp.resize(n);
    for (auto& f : out.frame_residual) f.assign(n, 0.0);
    std::vector<double> frac(n, 0.0);
    parallel_for(n, solver.config().threads, [&](std::size_t i) {
        const Mat10 b = block_rotation(proj[i].frame.matrix());
        const Vec10 qdot = dq0_dt[i].vec() + v[i](0) * gx[i] + v[i](1) * gy[i];
        const Vec9 k = flatten(kappa[i]);
        const Vec10 rhs = ops[i].m.ldlt().solve(qdot - ops[i].v * k) + g[i].vec();
        const Eigen::Matrix<double, 10, 3> xi = b * ctx.xi;
        for (int j = 0; j < 3; ++j) out.frame_residual[j][i] = xi.col(j).dot(rhs);
        out.q1_perp[i] = QPair::from_vec(-(b * ctx.h_pinv * b.transpose()) * rhs);
        const double rn = rhs.norm();
        frac[i] = rn > 0 ? (b * ctx.p_in * b.transpose() * rhs).norm() / rn : 0.0;
    });
    for (double f : frac) out.max_in_fraction = std::max(out.max_in_fraction, f);
    return out;
}

LimitFields analyze_states(const FieldState& prev, const FieldState& cur, const FieldState& next, double h,
                           const LimitContext& ctx, PdeSolver& solver) {
    if (!(h > 0)) throw std::invalid_argument("snapshot spacing must be positive");
    const int threads = solver.config().threads;
    const std::vector<ManifoldProjection> pc = project_field(cur.q, ctx, threads, nullptr);
    const std::vector<ManifoldProjection> pp = project_field(prev.q, ctx, threads, &pc);
    const std::vector<ManifoldProjection> pn = project_field(next.q, ctx, threads, &pc);
    std::vector<QPair> dq(cur.q.size());
    for (std::size_t i = 0; i < dq.size(); ++i) dq[i] = (1.0 / (2.0 * h)) * (pn[i].q0 - pp[i].q0);
    std::vector<KineticOperators> ops;
    solver.provider().evaluate(projected_field(pc), ops);
    return limit_fields(pc, dq, cur.v, ops, ctx, solver);
}

std::vector<QPair> q1_perp(const FieldState& prev, const FieldState& cur, const FieldState& next, double h,
                           const LimitContext& ctx, PdeSolver& solver) {
    return analyze_states(prev, cur, next, h, ctx, solver).q1_perp;
}

std::array<std::vector<double>, 3> frame_residual(const FieldState& prev, const FieldState& cur,
                                                  const FieldState& next, double h, const LimitContext& ctx,
                                                  PdeSolver& solver) {
    return analyze_states(prev, cur, next, h, ctx, solver).frame_residual;
}

RemainderDiagnostics remainder_energy(const std::vector<QPair>& qr, const std::vector<Vec3>& vr,
                                      const std::vector<ManifoldProjection>& proj,
                                      const std::vector<KineticOperators>& ops, const LimitContext& ctx,
                                      const PdeSolver& solver) {
    const std::size_t n = qr.size();
    const Spectral& sp = solver.spectral();
    const ElasticCoefficients& ec = solver.config().elastic;
    const double eps = solver.config().epsilon, area = sp.grid().cell_area();
    const int threads = solver.config().threads;

    std::vector<Mat10> hnode(n), minv(n), pout(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const Mat10 b = block_rotation(proj[i].frame.matrix());
        hnode[i] = b * ctx.spectrum.hessian * b.transpose();
        minv[i] = ops[i].m.inverse();
        pout[i] = Mat10::Identity() - b * ctx.p_in * b.transpose();
    });
    // (1/eps) int (H^eps x) . x with H^eps x = H x + eps G(x)
    auto heps_form = [&](const std::vector<QPair>& x) {
        const std::vector<QPair> gx = elastic_force(sp, x, ec);
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const Vec10 xv = x[i].vec();
            s += (hnode[i] * xv + eps * gx[i].vec()).dot(xv);
        }
        return s * area / eps;
    };

    std::vector<Vec10> gx, gy;
    qpair_gradient(sp, qr, gx, gy);
    std::vector<QPair> dx(n), dy(n);
    for (std::size_t i = 0; i < n; ++i) {
        dx[i] = QPair::from_vec(gx[i]);
        dy[i] = QPair::from_vec(gy[i]);
    }
    const std::vector<QPair> lap = qpair_laplacian(sp, qr);
    const std::vector<Vec3> vlap = vec3_laplacian(sp, vr);

    double v2 = 0.0, mq = 0.0, vl2 = 0.0, po = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec10 x = qr[i].vec();
        v2 += vr[i].squaredNorm();
        mq += (minv[i] * x).dot(x);
        vl2 += vlap[i].squaredNorm();
        po += (pout[i] * x).squaredNorm();
    }
    v2 *= area;
    mq *= area;
    vl2 *= area;
    const double gv = gradient_l2(sp, n, 3, [&](std::size_t i, int c) { return vr[i](c); });

    RemainderDiagnostics r;
    r.frak_e = 0.5 * ((v2 + mq + heps_form(qr)) + eps * eps * (gv * gv + heps_form(dx) + heps_form(dy)) +
                      std::pow(eps, 4) * (vl2 + heps_form(lap)));
    r.pout_l2 = std::sqrt(po * area);

    const double q_l2 = l2(qr, area);
    const double q_grad = std::sqrt(std::pow(l2(dx, area), 2) + std::pow(l2(dy, area), 2));
    const double lap_l2 = l2(lap, area);
    const double grad_lap = gradient_l2(sp, n, 10, [&](std::size_t i, int c) { return lap[i].vec()(c); });
    const double vlap_l2 = std::sqrt(vl2);
    r.e_norm = std::sqrt(q_l2 * q_l2 + q_grad * q_grad) + eps * lap_l2 + eps * eps * grad_lap + std::sqrt(v2) +
               eps * gv + eps * eps * vlap_l2;

    const std::vector<QPair> gq = elastic_force(sp, qr, ec);
    const double grad_g = gradient_l2(sp, n, 10, [&](std::size_t i, int c) { return gq[i].vec()(c); });
    const double lap_g = l2(qpair_laplacian(sp, gq), area);
    const double grad_vlap = gradient_l2(sp, n, 3, [&](std::size_t i, int c) { return vlap[i](c); });
    r.f_norm = eps * grad_g + eps * eps * lap_g + eps * eps * grad_vlap;
    return r;
}

namespace {

Vec3 init_axis() { return Vec3(0.3, 0.5, 1.0).normalized(); }

std::vector<Vec3> shear_velocity(const SimConfig& cfg) {
    const Grid& g = cfg.grid;
    const double kx = 2.0 * M_PI * cfg.init.mode_x / g.lx, ky = 2.0 * M_PI * cfg.init.mode_y / g.ly;
    const double u = cfg.init.velocity_amplitude;
    std::vector<Vec3> v(g.size());
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j)
            v[static_cast<std::size_t>(i) * g.ny + j] =
                Vec3(u * std::sin(ky * g.y(j)), u * std::sin(kx * g.x(i)), 0.5 * u * std::sin(kx * g.x(i)));
    return v;
}

std::vector<ManifoldProjection> frame_wave(const SimConfig& cfg, const LimitContext& ctx) {
    const Grid& g = cfg.grid;
    const double kx = 2.0 * M_PI * cfg.init.mode_x / g.lx, ky = 2.0 * M_PI * cfg.init.mode_y / g.ly;
    const double amp = cfg.init.kind == "uniform" ? 0.0 : cfg.init.frame_amplitude;
    std::vector<ManifoldProjection> out(g.size());
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) {
            auto& p = out[static_cast<std::size_t>(i) * g.ny + j];
            const double theta = amp * (std::sin(kx * g.x(i)) + std::cos(ky * g.y(j)));
            p.frame = Frame::from_axis_angle(init_axis(), theta);
            p.q0 = rotate(ctx.q0, p.frame.matrix());
            p.converged = true;
        }
    return out;
}

}  // namespace

FieldState well_prepared_state(const SimConfig& cfg, const LimitContext& ctx, PdeSolver& solver) {
    const std::vector<ManifoldProjection> proj = frame_wave(cfg, ctx);
    const std::vector<QPair> q0 = projected_field(proj);
    const std::vector<Vec3> v = solver.project_divergence_free(shear_velocity(cfg));
    const std::size_t n = q0.size();

    std::vector<KineticOperators> ops;
    solver.provider().evaluate(q0, ops);
    std::vector<Vec10> gx, gy;
    qpair_gradient(solver.spectral(), q0, gx, gy);
    const std::vector<QPair> g = elastic_force(solver.spectral(), q0, solver.config().elastic);
    const std::vector<Mat3> kappa = solver.velocity_gradient(v);

    // Frame velocity from xi_j . [M^-1 (dQ0/dt + v.grad Q0 - V kappa) + G] = 0.
    const int r = static_cast<int>(ctx.spectrum.xi_basis.size());
    Eigen::MatrixXd kb(10, r);
    for (int c = 0; c < r; ++c) kb.col(c) = ctx.spectrum.xi_basis[c];
    std::vector<QPair> dq(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const Mat10 b = block_rotation(proj[i].frame.matrix());
        const Eigen::MatrixXd k = b * kb;
        const auto ldlt = ops[i].m.ldlt();
        const Eigen::MatrixXd mk = ldlt.solve(k);
        const Vec10 conv = v[i](0) * gx[i] + v[i](1) * gy[i];
        const Vec10 known = ldlt.solve(conv - ops[i].v * flatten(kappa[i])) + g[i].vec();
        const Eigen::VectorXd alpha = (k.transpose() * mk).ldlt().solve(-k.transpose() * known);
        dq[i] = QPair::from_vec(k * alpha);
    });
    const LimitFields lf = limit_fields(proj, dq, v, ops, ctx, solver);

    FieldState s;
    s.grid = cfg.grid;
    s.v = v;
    s.q.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.q[i] = q0[i] + cfg.epsilon * lf.q1_perp[i];
    return s;
}

FieldState initial_state(const SimConfig& cfg, const LimitContext& ctx, PdeSolver& solver) {
    if (cfg.init.kind != "frame_wave" && cfg.init.kind != "uniform")
        throw std::invalid_argument("init.kind must be frame_wave or uniform");
    if (cfg.init.well_prepared) return well_prepared_state(cfg, ctx, solver);
    const std::vector<ManifoldProjection> proj = frame_wave(cfg, ctx);
    FieldState s;
    s.grid = cfg.grid;
    s.v = solver.project_divergence_free(shear_velocity(cfg));
    s.q = projected_field(proj);
    if (cfg.init.perturbation != 0.0) {
        // A smooth mode along a fixed direction in coordinate space.
        Vec10 dir;
        dir << 1.0, -0.5, 0.3, 0.2, -0.4, 0.6, 0.1, -0.3, 0.5, -0.2;
        dir.normalize();
        const Grid& g = cfg.grid;
        const double kx = 2.0 * M_PI * cfg.init.mode_x / g.lx, ky = 2.0 * M_PI * cfg.init.mode_y / g.ly;
        for (int i = 0; i < g.nx; ++i)
            for (int j = 0; j < g.ny; ++j) {
                const double w = cfg.init.perturbation * std::cos(kx * g.x(i)) * std::cos(ky * g.y(j));
                auto& q = s.q[static_cast<std::size_t>(i) * g.ny + j];
                q = q + QPair::from_vec(w * dir);
            }
    }
    return s;
}

std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_fit needs two or more points");
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw std::invalid_argument("loglog_fit needs positive data");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    const double slope = sxy / sxx;
    const double r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
    return {slope, r2};
}

SweepReport epsilon_sweep(const SimConfig& base, const std::vector<double>& eps, const QuadratureRule& rule,
                          const SweepOptions& opt) {
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0)) throw std::invalid_argument("eps values must be positive");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw std::invalid_argument("eps list must be descending");
    }
    base.validate();
    const LimitContext ctx = make_limit_context(base.bulk, rule, base.seed);
    std::unique_ptr<ClosureProvider> shared = make_provider(base, rule);

    SweepReport rep;
    for (double e : eps) {
        SweepRun run;
        run.eps = e;
        SimConfig cfg = base;
        cfg.epsilon = e;
        if (base.dt > 0) cfg.dt = base.dt * e / base.epsilon;
        cfg.init.well_prepared = true;
        try {
            PdeSolver solver(cfg, rule, std::make_unique<SharedProvider>(*shared));
            const double dt = cfg.time_step(), area = cfg.grid.cell_area();
            const long steps = std::lround(cfg.t_end / dt);
            const long stride = std::max(1L, std::lround(opt.sample_interval / dt));
            FieldState prev = well_prepared_state(cfg, ctx, solver);
            FieldState cur = solver.step(prev);
            std::array<double, 3> res_acc{};
            for (long n = 1; n < steps; ++n) {
                FieldState next = solver.step(cur);
                if (n % stride == 0) {
                    const LimitFields lf = analyze_states(prev, cur, next, dt, ctx, solver);
                    std::vector<KineticOperators> ops;
                    solver.provider().evaluate(projected_field(lf.proj), ops);
                    const std::size_t nn = cur.q.size();
                    std::vector<QPair> pout_scaled(nn), diff(nn), qr(nn);
                    double dmax = 0.0, pout2 = 0.0;
                    for (std::size_t i = 0; i < nn; ++i) {
                        const Mat10 b = block_rotation(lf.proj[i].frame.matrix());
                        const QPair d = cur.q[i] - lf.proj[i].q0;
                        const Vec10 po = d.vec() - b * ctx.p_in * b.transpose() * d.vec();
                        pout2 += po.squaredNorm();
                        pout_scaled[i] = QPair::from_vec(po / e);
                        diff[i] = pout_scaled[i] - lf.q1_perp[i];
                        qr[i] = (1.0 / e) * (d - e * lf.q1_perp[i]);
                        dmax = std::max(dmax, lf.proj[i].distance);
                    }
                    run.sup_dist = std::max(run.sup_dist, dmax);
                    run.sup_pout = std::max(run.sup_pout, std::sqrt(pout2 * area));
                    const double ref = l2(lf.q1_perp, area);
                    if (ref > 0) run.pout_err = std::max(run.pout_err, l2(diff, area) / ref);
                    for (int j = 0; j < 3; ++j) {
                        double s = 0.0;
                        for (double r : lf.frame_residual[j]) s += r * r;
                        res_acc[j] += s * area;
                    }
                    const std::vector<Vec3> vr(nn, Vec3::Zero());
                    const RemainderDiagnostics rd = remainder_energy(qr, vr, lf.proj, ops, ctx, solver);
                    run.frak_e_sup = std::max(run.frak_e_sup, rd.frak_e);
                    run.e_norm_sup = std::max(run.e_norm_sup, rd.e_norm);
                    run.f_norm_sup = std::max(run.f_norm_sup, rd.f_norm);
                    run.max_in_fraction = std::max(run.max_in_fraction, lf.max_in_fraction);
                    ++run.samples;
                }
                prev = std::move(cur);
                cur = std::move(next);
            }
            if (run.samples == 0) throw std::runtime_error("no diagnostic samples (t_end shorter than sample interval)");
            for (int j = 0; j < 3; ++j) run.frame_res_l2[j] = std::sqrt(res_acc[j] / run.samples);
            run.ok = true;
        } catch (const std::exception& ex) {
            run.ok = false;
            run.failure = ex.what();
        }
        rep.runs.push_back(run);
    }
    std::vector<double> xs, ds, ps;
    for (const auto& r : rep.runs)
        if (r.ok) {
            xs.push_back(r.eps);
            ds.push_back(r.sup_dist);
            ps.push_back(r.pout_err);
        }
    if (xs.size() >= 2) {
        std::tie(rep.fit_order, rep.fit_r2) = loglog_fit(xs, ds);
        if (std::all_of(ps.begin(), ps.end(), [](double p) { return p > 0; }))
            std::tie(rep.pout_order, rep.pout_r2) = loglog_fit(xs, ps);
    }
    return rep;
}

}  // namespace qt
