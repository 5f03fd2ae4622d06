#include "qt/dynamics.hpp"

#include "qt/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace qt {

void ElasticCoefficients::validate() const {
    if (!(c22 > 0 && c23 > 0 && c28 > 0 && c29 > 0))
        throw std::invalid_argument("elastic: c22, c23, c28, c29 must be positive");
    if (!(c24 * c24 < c22 * c23)) throw std::invalid_argument("elastic: c24^2 < c22*c23 violated");
    if (!(c210 * c210 < c28 * c29)) throw std::invalid_argument("elastic: c210^2 < c28*c29 violated");
}

void SimConfig::validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("epsilon must be positive");
    if (dt < 0 || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive (or 0 for the default)");
    if (!(t_end > 0)) throw std::invalid_argument("t_end must be positive");
    if (!(delta > 0 && delta < 1.0 / 3.0)) throw std::invalid_argument("delta must lie in (0, 1/3)");
    if (!(table_spacing > 0)) throw std::invalid_argument("table_spacing must be positive");
    if (!(energy_tol >= 0)) throw std::invalid_argument("energy_tol must be nonnegative");
    if (quad_beta < 2 || quad_torus < 2) throw std::invalid_argument("quadrature sizes must be >= 2");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (output_every < 1 || snapshot_every < 0) throw std::invalid_argument("output cadence must be positive");
    grid.validate();
    params.validate();
    elastic.validate();
    if (bulk.kind.is_quasi()) EntropyKind::quasi(bulk.kind.nu);
}

namespace {

using Field = std::vector<double>;
using CField = std::vector<cplx>;

// S_ab(k) = (E_a k).(E_b k)
Mat5 wave_block(double kx, double ky) {
    const auto& e = sym_basis();
    Eigen::Matrix<double, 3, 5> ek;
    for (int a = 0; a < 5; ++a) ek.col(a) = kx * e[a].col(0) + ky * e[a].col(1);
    return ek.transpose() * ek;
}

// Symbol of the elastic operator on (Q1, Q2) coordinates.
Mat10 elastic_symbol(double kx, double ky, const ElasticCoefficients& ec) {
    const double k2 = kx * kx + ky * ky;
    const Mat5 s = wave_block(kx, ky), id = Mat5::Identity();
    Mat10 l;
    l.block<5, 5>(0, 0) = ec.c22 * k2 * id + ec.c28 * s;
    l.block<5, 5>(0, 5) = ec.c24 * k2 * id + ec.c210 * s;
    l.block<5, 5>(5, 0) = ec.c24 * k2 * id + ec.c210 * s;
    l.block<5, 5>(5, 5) = ec.c23 * k2 * id + ec.c29 * s;
    return l;
}

// Applies the symbol mode by mode to ten spectral components.
void apply_elastic(const Spectral& sp, const ElasticCoefficients& ec, const std::vector<CField>& qh,
                   std::vector<CField>& gh) {
    const std::size_t nc = sp.spectral_size();
    gh.assign(10, CField(nc));
    for (std::size_t m = 0; m < nc; ++m) {
        const Mat10 l = elastic_symbol(sp.kx(m), sp.ky(m), ec);
        Eigen::Matrix<cplx, 10, 1> x;
        for (int a = 0; a < 10; ++a) x(a) = qh[a][m];
        const Eigen::Matrix<cplx, 10, 1> y = l.cast<cplx>() * x;
        for (int a = 0; a < 10; ++a) gh[a][m] = y(a);
    }
}

std::vector<Vec10> to_vec10(const std::vector<QPair>& q) {
    std::vector<Vec10> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = q[i].vec();
    return out;
}

std::vector<QPair> to_qpairs(const std::vector<Vec10>& q) {
    std::vector<QPair> out(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) out[i] = QPair::from_vec(q[i]);
    return out;
}

std::vector<Vec10> elastic_force_vec(const Spectral& sp, const std::vector<Vec10>& q, const ElasticCoefficients& ec) {
    const std::size_t n = q.size(), nc = sp.spectral_size();
    std::vector<CField> qh(10, CField(nc)), gh;
    Field buf(n);
    for (int a = 0; a < 10; ++a) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = q[i](a);
        sp.forward(buf.data(), qh[a].data());
    }
    apply_elastic(sp, ec, qh, gh);
    std::vector<Vec10> out(n);
    for (int a = 0; a < 10; ++a) {
        sp.backward(gh[a].data(), buf.data());
        for (std::size_t i = 0; i < n; ++i) out[i](a) = buf[i];
    }
    return out;
}

std::string node_message(const Grid& g, std::size_t idx, const QPair& q, double bound) {
    const auto m = domain_margins(q);
    char buf[256];
    std::snprintf(buf, sizeof buf, "node %zu (i=%zu, j=%zu) left the domain: margins %.6g %.6g %.6g < %.6g", idx,
                  idx / static_cast<std::size_t>(g.ny), idx % static_cast<std::size_t>(g.ny), m[0], m[1], m[2], bound);
    return buf;
}

}  // namespace

std::vector<QPair> elastic_force(const Spectral& sp, const std::vector<QPair>& q, const ElasticCoefficients& ec) {
    if (q.size() != sp.grid().size()) throw std::invalid_argument("field size does not match grid");
    return to_qpairs(elastic_force_vec(sp, to_vec10(q), ec));
}

std::vector<QPair> elastic_force(const Grid& g, const std::vector<QPair>& q, const ElasticCoefficients& ec) {
    Spectral sp(g);
    return elastic_force(sp, q, ec);
}

std::unique_ptr<ClosureProvider> make_provider(const SimConfig& cfg, const QuadratureRule& rule) {
    if (cfg.closure_mode == ClosureMode::Direct)
        return make_direct_provider(cfg.closure_route, cfg.params, rule, cfg.threads);
    // Lattice cells are centred on the bulk minimizer.
    const MinimizerResult mr = find_minimizer(cfg.bulk, rule, 8, cfg.seed);
    const std::array<double, 4> sb = {mr.form.s1, mr.form.b1, mr.form.s2, mr.form.b2};
    std::array<double, 4> origin;
    for (int i = 0; i < 4; ++i) origin[i] = sb[i] - 0.5 * cfg.table_spacing;
    return std::make_unique<ClosureTable>(cfg.closure_route, cfg.params, rule, cfg.table_spacing, origin, cfg.threads);
}

PdeSolver::PdeSolver(const SimConfig& cfg, const QuadratureRule& rule, std::unique_ptr<ClosureProvider> provider)
    : cfg_(cfg), rule_(rule), sp_(std::make_unique<Spectral>(cfg.grid)), provider_(std::move(provider)) {
    cfg_.validate();
    if (!provider_) provider_ = make_provider(cfg_, rule_);
}

void PdeSolver::check_domain(const std::vector<Vec10>& q) const {
    const double bound = 0.5 * cfg_.delta;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const QPair p = QPair::from_vec(q[i]);
        if (!domain_membership(p, bound)) throw DomainError(node_message(cfg_.grid, i, p, bound));
    }
}

std::vector<QPair> PdeSolver::chemical_potential(const std::vector<QPair>& q) const {
    const std::vector<Vec10> qv = to_vec10(q);
    check_domain(qv);
    std::vector<Vec10> g = elastic_force_vec(*sp_, qv, cfg_.elastic);
    const double inv = 1.0 / cfg_.epsilon;
    std::vector<QPair> out(q.size());
    parallel_for(q.size(), cfg_.threads, [&](std::size_t i) {
        out[i] = QPair::from_vec(inv * bulk_gradient(q[i], cfg_.bulk, rule_).vec() + g[i]);
    });
    return out;
}

std::vector<Mat3> PdeSolver::velocity_gradient(const std::vector<Vec3>& v) const {
    const std::size_t n = v.size();
    std::vector<Mat3> out(n, Mat3::Zero());
    Field buf(n), dx(n), dy(n);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = v[i](c);
        sp_->gradient(buf.data(), dx.data(), dy.data());
        for (std::size_t i = 0; i < n; ++i) {
            out[i](c, 0) = dx[i];
            out[i](c, 1) = dy[i];
        }
    }
    return out;
}

std::vector<Vec3> PdeSolver::project_divergence_free(const std::vector<Vec3>& v) const {
    const std::size_t n = v.size(), nc = sp_->spectral_size();
    std::vector<CField> vh(2, CField(nc));
    Field buf(n);
    for (int c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = v[i](c);
        sp_->forward(buf.data(), vh[c].data());
    }
    for (std::size_t m = 0; m < nc; ++m) {
        const double kx = sp_->kx(m), ky = sp_->ky(m), k2 = kx * kx + ky * ky;
        if (k2 == 0.0) continue;
        const cplx d = (kx * vh[0][m] + ky * vh[1][m]) / k2;
        vh[0][m] -= kx * d;
        vh[1][m] -= ky * d;
    }
    std::vector<Vec3> out = v;
    for (int c = 0; c < 2; ++c) {
        sp_->backward(vh[c].data(), buf.data());
        for (std::size_t i = 0; i < n; ++i) out[i](c) = buf[i];
    }
    return out;
}

double PdeSolver::divergence_norm(const std::vector<Vec3>& v) const {
    const std::size_t n = v.size(), nc = sp_->spectral_size();
    CField a(nc), b(nc);
    Field buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = v[i](0);
    sp_->forward(buf.data(), a.data());
    for (std::size_t i = 0; i < n; ++i) buf[i] = v[i](1);
    sp_->forward(buf.data(), b.data());
    double s = 0.0;
    for (std::size_t m = 0; m < nc; ++m) s += std::norm(sp_->kx(m) * a[m] + sp_->ky(m) * b[m]);
    return std::sqrt(s) / static_cast<double>(n);
}

void PdeSolver::rhs(const std::vector<Vec10>& q, const std::vector<Vec3>& v, Deriv& out) {
    check_domain(q);
    const Spectral& sp = *sp_;
    const std::size_t n = q.size(), nc = sp.spectral_size();
    const cplx I(0.0, 1.0);
    const double inv_eps = 1.0 / cfg_.epsilon, area = cfg_.grid.cell_area(), eta = cfg_.params.eta;

    // Spatial derivatives of Q and the elastic force.
    std::vector<CField> qh(10, CField(nc)), gh;
    std::vector<Field> dqx(10, Field(n)), dqy(10, Field(n)), gf(10, Field(n));
    Field buf(n);
    CField tmp(nc);
    for (int a = 0; a < 10; ++a) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = q[i](a);
        sp.forward(buf.data(), qh[a].data());
        for (std::size_t m = 0; m < nc; ++m) tmp[m] = I * sp.kx(m) * qh[a][m];
        sp.backward(tmp.data(), dqx[a].data());
        for (std::size_t m = 0; m < nc; ++m) tmp[m] = I * sp.ky(m) * qh[a][m];
        sp.backward(tmp.data(), dqy[a].data());
    }
    apply_elastic(sp, cfg_.elastic, qh, gh);
    for (int a = 0; a < 10; ++a) sp.backward(gh[a].data(), gf[a].data());

    // Velocity spectrum and gradient.
    std::vector<CField> vh(3, CField(nc));
    std::vector<Field> dvx(3, Field(n)), dvy(3, Field(n));
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = v[i](c);
        sp.forward(buf.data(), vh[c].data());
        for (std::size_t m = 0; m < nc; ++m) tmp[m] = I * sp.kx(m) * vh[c][m];
        sp.backward(tmp.data(), dvx[c].data());
        for (std::size_t m = 0; m < nc; ++m) tmp[m] = I * sp.ky(m) * vh[c][m];
        sp.backward(tmp.data(), dvy[c].data());
    }

    // Closure operators at every node.
    const std::vector<QPair> qp = to_qpairs(q);
    provider_->evaluate(qp, ops_);

    // Pointwise algebra.
    out.dq.assign(n, Vec10::Zero());
    std::vector<Vec9> sigma(n);
    std::vector<Vec3> force(n);
    std::vector<double> dmu(n), dvisc(n), dp(n);
    parallel_for(n, cfg_.threads, [&](std::size_t i) {
        Vec10 mu = inv_eps * bulk_gradient(qp[i], cfg_.bulk, rule_).vec();
        Vec10 qx, qy;
        for (int a = 0; a < 10; ++a) {
            mu(a) += gf[a][i];
            qx(a) = dqx[a][i];
            qy(a) = dqy[a][i];
        }
        Vec9 kappa = Vec9::Zero();
        for (int c = 0; c < 3; ++c) {
            kappa(3 * c) = dvx[c][i];
            kappa(3 * c + 1) = dvy[c][i];
        }
        const KineticOperators& k = ops_[i];
        const Vec10 mmu = k.m * mu;
        const Vec9 pk = k.p * kappa;
        out.dq[i] = -(v[i](0) * qx + v[i](1) * qy) - mmu + k.v * kappa;
        sigma[i] = pk + k.n * mu;
        force[i] = Vec3(mu.dot(qx), mu.dot(qy), 0.0);
        dmu[i] = mu.dot(mmu);
        dvisc[i] = eta * kappa.squaredNorm();
        dp[i] = kappa.dot(pk);
    });
    out.diss_mu = out.diss_visc = out.diss_p = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.diss_mu += dmu[i];
        out.diss_visc += dvisc[i];
        out.diss_p += dp[i];
    }
    out.diss_mu *= area;
    out.diss_visc *= area;
    out.diss_p *= area;

    // Momentum: skew-symmetric convection, stress divergence, force, viscosity, projection.
    std::vector<CField> wh(3, CField(nc, cplx(0.0)));
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i)
            buf[i] = force[i](c) - 0.5 * (v[i](0) * dvx[c][i] + v[i](1) * dvy[c][i]);
        sp.forward(buf.data(), tmp.data());
        for (std::size_t m = 0; m < nc; ++m) wh[c][m] += tmp[m];
        for (int j = 0; j < 2; ++j) {
            const bool jx = j == 0;
            for (std::size_t i = 0; i < n; ++i) buf[i] = sigma[i](3 * c + j) - 0.5 * v[i](j) * v[i](c);
            sp.forward(buf.data(), tmp.data());
            for (std::size_t m = 0; m < nc; ++m) wh[c][m] += I * (jx ? sp.kx(m) : sp.ky(m)) * tmp[m];
        }
        for (std::size_t m = 0; m < nc; ++m) {
            const double k2 = sp.kx(m) * sp.kx(m) + sp.ky(m) * sp.ky(m);
            wh[c][m] -= eta * k2 * vh[c][m];
        }
    }
    for (std::size_t m = 0; m < nc; ++m) {
        const double kx = sp.kx(m), ky = sp.ky(m), k2 = kx * kx + ky * ky;
        if (k2 == 0.0) continue;
        const cplx d = (kx * wh[0][m] + ky * wh[1][m]) / k2;
        wh[0][m] -= kx * d;
        wh[1][m] -= ky * d;
    }
    out.dv.assign(n, Vec3::Zero());
    for (int c = 0; c < 3; ++c) {
        sp.backward(wh[c].data(), buf.data());
        for (std::size_t i = 0; i < n; ++i) out.dv[i](c) = buf[i];
    }
}

void PdeSolver::time_derivative(const FieldState& s, std::vector<QPair>& dq, std::vector<Vec3>& dv) {
    Deriv d;
    rhs(to_vec10(s.q), s.v, d);
    dq = to_qpairs(d.dq);
    dv = d.dv;
}

FieldState PdeSolver::rk4(const FieldState& s, double dt, double& diss) {
    const std::size_t n = s.q.size();
    const std::vector<Vec10> q0 = to_vec10(s.q);
    std::vector<Vec10> qs(n);
    std::vector<Vec3> vs(n);
    Deriv k[4];
    const double c[4] = {0.0, 0.5, 0.5, 1.0};
    for (int st = 0; st < 4; ++st) {
        if (st == 0) {
            rhs(q0, s.v, k[0]);
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            qs[i] = q0[i] + c[st] * dt * k[st - 1].dq[i];
            vs[i] = s.v[i] + c[st] * dt * k[st - 1].dv[i];
        }
        rhs(qs, vs, k[st]);
    }
    FieldState out = s;
    std::vector<Vec10> q1(n);
    for (std::size_t i = 0; i < n; ++i) {
        q1[i] = q0[i] + dt / 6.0 * (k[0].dq[i] + 2.0 * k[1].dq[i] + 2.0 * k[2].dq[i] + k[3].dq[i]);
        out.v[i] = s.v[i] + dt / 6.0 * (k[0].dv[i] + 2.0 * k[1].dv[i] + 2.0 * k[2].dv[i] + k[3].dv[i]);
    }
    check_domain(q1);
    out.q = to_qpairs(q1);
    out.time = s.time + dt;
    diss = 0.0;
    const double w[4] = {1.0, 2.0, 2.0, 1.0};
    for (int st = 0; st < 4; ++st) diss += w[st] * (k[st].diss_mu + k[st].diss_visc + k[st].diss_p);
    diss *= dt / 6.0;
    return out;
}

// First-order semi-implicit step: eta Lap v exactly implicit, the elastic operator implicit with the
// scalar mobility mbar and corrected explicitly by the full nonlinear term.
FieldState PdeSolver::imex(const FieldState& s, double dt, double& diss) {
    const Spectral& sp = *sp_;
    const std::size_t n = s.q.size(), nc = sp.spectral_size();
    const std::vector<Vec10> q0 = to_vec10(s.q);
    Deriv d;
    rhs(q0, s.v, d);
    if (imex_mbar_ < 0) {
        imex_mbar_ = 0.0;
        for (const auto& k : ops_)
            imex_mbar_ = std::max(imex_mbar_, Eigen::SelfAdjointEigenSolver<Mat10>(k.m, Eigen::EigenvaluesOnly).eigenvalues()(9));
    }
    const double eta = cfg_.params.eta;
    Field buf(n);
    std::vector<CField> qh(10, CField(nc)), rh(10, CField(nc));
    for (int a = 0; a < 10; ++a) {
        for (std::size_t i = 0; i < n; ++i) buf[i] = q0[i](a);
        sp.forward(buf.data(), qh[a].data());
        for (std::size_t i = 0; i < n; ++i) buf[i] = d.dq[i](a);
        sp.forward(buf.data(), rh[a].data());
    }
    FieldState out = s;
    std::vector<Vec10> q1(n);
    for (std::size_t m = 0; m < nc; ++m) {
        const Mat10 l = imex_mbar_ * elastic_symbol(sp.kx(m), sp.ky(m), cfg_.elastic);
        const Mat10 a = Mat10::Identity() + dt * l;
        Eigen::Matrix<cplx, 10, 1> x, r;
        for (int c = 0; c < 10; ++c) x(c) = qh[c][m];
        for (int c = 0; c < 10; ++c) r(c) = rh[c][m];
        const Eigen::Matrix<cplx, 10, 1> rhsv = x + dt * r + dt * (l.cast<cplx>() * x);
        const Eigen::Matrix<cplx, 10, 1> y = a.cast<cplx>().ldlt().solve(rhsv);
        for (int c = 0; c < 10; ++c) qh[c][m] = y(c);
    }
    for (int a = 0; a < 10; ++a) {
        sp.backward(qh[a].data(), buf.data());
        for (std::size_t i = 0; i < n; ++i) q1[i](a) = buf[i];
    }
    for (int c = 0; c < 3; ++c) {
        CField vh(nc), wh(nc);
        for (std::size_t i = 0; i < n; ++i) buf[i] = s.v[i](c);
        sp.forward(buf.data(), vh.data());
        for (std::size_t i = 0; i < n; ++i) buf[i] = d.dv[i](c);
        sp.forward(buf.data(), wh.data());
        for (std::size_t m = 0; m < nc; ++m) {
            const double k2 = sp.kx(m) * sp.kx(m) + sp.ky(m) * sp.ky(m);
            // d.dv already holds -eta k^2 v explicitly; move it to the implicit side.
            vh[m] = (vh[m] + dt * (wh[m] + eta * k2 * vh[m])) / (1.0 + dt * eta * k2);
        }
        sp.backward(vh.data(), buf.data());
        for (std::size_t i = 0; i < n; ++i) out.v[i](c) = buf[i];
    }
    check_domain(q1);
    out.q = to_qpairs(q1);
    out.time = s.time + dt;
    diss = dt * (d.diss_mu + d.diss_visc + d.diss_p);
    return out;
}

EnergyReport PdeSolver::free_energy(const FieldState& s) const {
    const std::size_t n = s.q.size();
    const double area = cfg_.grid.cell_area();
    const std::vector<Vec10> qv = to_vec10(s.q);
    const std::vector<Vec10> g = elastic_force_vec(*sp_, qv, cfg_.elastic);
    std::vector<double> fb(n);
    parallel_for(n, cfg_.threads, [&](std::size_t i) { fb[i] = bulk_energy(s.q[i], cfg_.bulk, rule_); });
    EnergyReport r;
    r.time = s.time;
    for (std::size_t i = 0; i < n; ++i) {
        r.kinetic += 0.5 * s.v[i].squaredNorm();
        r.bulk += fb[i];
        r.elastic += 0.5 * qv[i].dot(g[i]);
    }
    r.kinetic *= area;
    r.bulk *= area / cfg_.epsilon;
    r.elastic *= area;
    r.total = r.kinetic + r.bulk + r.elastic;
    return r;
}

EnergyReport PdeSolver::energy(const FieldState& s) {
    EnergyReport r = free_energy(s);
    Deriv d;
    rhs(to_vec10(s.q), s.v, d);
    r.diss_mu = d.diss_mu;
    r.diss_visc = d.diss_visc;
    r.diss_p = d.diss_p;
    return r;
}

FieldState PdeSolver::step(const FieldState& s, StepInfo* info) {
    const double dt = cfg_.time_step();
    const double e0 = free_energy(s).total;
    for (int halvings = 0; halvings <= 20; ++halvings) {
        const int sub = 1 << halvings;
        const double h = dt / sub;
        try {
            FieldState cur = s;
            double e_prev = e0, diss_total = 0.0;
            bool ok = true;
            for (int k = 0; k < sub && ok; ++k) {
                double diss = 0.0;
                FieldState next = cfg_.integrator == Integrator::Imex ? imex(cur, h, diss) : rk4(cur, h, diss);
                const double e1 = free_energy(next).total;
                if (e1 - e_prev > cfg_.energy_tol * h * std::max(1.0, std::abs(e_prev))) {
                    ok = false;
                    break;
                }
                e_prev = e1;
                diss_total += diss;
                cur = std::move(next);
            }
            if (!ok) continue;
            cur.time = s.time + dt;
            if (info) {
                info->dt_used = h;
                info->halvings = halvings;
                info->dissipation = diss_total;
            }
            return cur;
        } catch (const DomainError&) {
            if (halvings == 20) throw;
        } catch (const ConvergenceError&) {
            if (halvings == 20) throw;
        }
    }
    throw ConvergenceError("step rejected after 20 halvings (energy increase)");
}

QPair step_homogeneous(const QPair& q, const SimConfig& cfg, double dt, const QuadratureRule& rule) {
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    const double bound = 0.5 * cfg.delta;
    if (!domain_membership(q, bound)) throw DomainError("initial state outside the domain");
    auto f = [&](const Vec10& x) -> Vec10 {
        const QPair p = QPair::from_vec(x);
        if (!domain_membership(p, bound)) throw DomainError("stage left the domain");
        const KineticOperators k = assemble_operators(closure_tensors(p, cfg.closure_route, rule, cfg.params.e1), cfg.params);
        return -k.m * (bulk_gradient(p, cfg.bulk, rule).vec() / cfg.epsilon);
    };
    for (int halvings = 0; halvings <= 20; ++halvings) {
        const int sub = 1 << halvings;
        const double h = dt / sub;
        try {
            Vec10 x = q.vec();
            for (int s = 0; s < sub; ++s) {
                const Vec10 k1 = f(x);
                const Vec10 k2 = f(x + 0.5 * h * k1);
                const Vec10 k3 = f(x + 0.5 * h * k2);
                const Vec10 k4 = f(x + h * k3);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            const QPair out = QPair::from_vec(x);
            if (!domain_membership(out, bound)) throw DomainError("step left the domain");
            return out;
        } catch (const DomainError&) {
            if (halvings == 20) throw;
        } catch (const ConvergenceError&) {
            if (halvings == 20) throw;
        }
    }
    throw DomainError("homogeneous step failed");
}

std::vector<QPair> chemical_potential(const FieldState& s, const SimConfig& cfg, const QuadratureRule& rule) {
    PdeSolver solver(cfg, rule, make_direct_provider(cfg.closure_route, cfg.params, rule, cfg.threads));
    return solver.chemical_potential(s.q);
}

FieldState step_pde(const FieldState& s, const SimConfig& cfg, const QuadratureRule& rule) {
    PdeSolver solver(cfg, rule);
    return solver.step(s);
}

EnergyReport energy_report(const FieldState& s, const SimConfig& cfg, const QuadratureRule& rule) {
    PdeSolver solver(cfg, rule);
    return solver.energy(s);
}

}  // namespace qt
