#include "qt/closure.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>

namespace qt {

namespace {

int levi(int i, int j, int k) {
    if (i == j || j == k || i == k) return 0;
    return ((j - i + 3) % 3 == 1) ? 1 : -1;
}

Mat3 sym_outer(const Vec3& a, const Vec3& b) { return 0.5 * (a * b.transpose() + b * a.transpose()); }

// Rows: E-coordinates of the unnormalized identity-frame basis s1..s5.
const Mat5& paper_basis() {
    static const Mat5 t = [] {
        const Frame id;
        const LocalBasis lb = local_basis(id);
        Mat5 m;
        for (int j = 0; j < 5; ++j) m.row(j) = coords_of(lb.s[j]).transpose();
        return m;
    }();
    return t;
}

using Mat11 = Eigen::Matrix<double, 11, 11>;
using Mat8 = Eigen::Matrix<double, 8, 8>;

struct Xi4Mats {
    Mat11 a;
    Mat8 b[3];
};

// with_const=false gives the linear part only, used for directional derivatives.
Xi4Mats assemble_xi4(const MomentState& ms, bool with_const) {
    const Mat5& t = paper_basis();
    Xi4Mats out;
    const Vec5 d = 2.0 * ms.c2 + ms.c1;
    out.a.setZero();
    out.a(0, 0) = with_const ? 1.0 : 0.0;
    out.a.block<1, 5>(0, 1) = (t * ms.c1).transpose();
    out.a.block<1, 5>(0, 6) = (t * d).transpose();
    out.a.block<5, 1>(1, 0) = t * ms.c1;
    out.a.block<5, 1>(6, 0) = t * d;
    out.a.block<5, 5>(1, 1) = t * ms.f11 * t.transpose();
    out.a.block<5, 5>(6, 1) = t * ms.f21 * t.transpose();
    out.a.block<5, 5>(1, 6) = out.a.block<5, 5>(6, 1).transpose();
    out.a.block<5, 5>(6, 6) = t * ms.f22 * t.transpose();

    const Vec5 c3 = -ms.c1 - ms.c2;
    const Vec5* cs[3] = {&ms.c1, &ms.c2, &c3};
    const Mat35* ts[3] = {&ms.t1, &ms.t2, &ms.t3};
    const Mat5* gs[3] = {&ms.g5, &ms.g4, &ms.g3};
    for (int k = 0; k < 3; ++k) {
        Mat8& b = out.b[k];
        b.block<3, 3>(0, 0) = matrix_of(*cs[k]);
        if (with_const) b.block<3, 3>(0, 0) += Mat3::Identity() / 3.0;
        b.block<3, 5>(0, 3) = *ts[k] * t.transpose();
        b.block<5, 3>(3, 0) = b.block<3, 5>(0, 3).transpose();
        b.block<5, 5>(3, 3) = t * *gs[k] * t.transpose();
    }
    return out;
}

template <int N>
bool chol_logdet(const Eigen::Matrix<double, N, N>& m, double& logdet, Eigen::Matrix<double, N, N>* inv) {
    Eigen::LLT<Eigen::Matrix<double, N, N>> llt(m);
    if (llt.info() != Eigen::Success) return false;
    const auto diag = llt.matrixLLT().diagonal();
    if (!(diag.minCoeff() > 0.0)) return false;
    logdet = 2.0 * diag.array().log().sum();
    if (inv) *inv = llt.solve(Eigen::Matrix<double, N, N>::Identity());
    return true;
}

double xi4_of(const Xi4Mats& m) {
    double total = 0.0, ld = 0.0;
    if (!chol_logdet<11>(m.a, ld, nullptr)) return std::numeric_limits<double>::infinity();
    total -= ld;
    for (int k = 0; k < 3; ++k) {
        if (!chol_logdet<8>(m.b[k], ld, nullptr)) return std::numeric_limits<double>::infinity();
        total -= ld;
    }
    return total;
}

MomentVec features_sum(const QuadratureRule& rule, const std::vector<double>& p) {
    MomentVec acc = MomentVec::Zero();
    for (std::size_t k = 0; k < rule.size(); ++k) acc += p[k] * frame_features(rule.nodes[k]);
    return acc;
}

const QuadratureRule& coarse_rule() {
    static const QuadratureRule r = build_rule(12, 12);
    return r;
}

const QuadratureRule& default_rule() {
    static const QuadratureRule r = build_rule(24, 24);
    return r;
}

struct ChartData {
    MomentChart chart;
    std::vector<Xi4Mats> dirs;  // linear parts along each free direction
};

const ChartData& chart_data() {
    static const ChartData data = [] {
        const QuadratureRule& rule = coarse_rule();
        MomentVec mu = MomentVec::Zero();
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(kMomentDim, kMomentDim);
        for (std::size_t k = 0; k < rule.size(); ++k) mu += rule.weights[k] * frame_features(rule.nodes[k]);
        for (std::size_t k = 0; k < rule.size(); ++k) {
            const MomentVec d = frame_features(rule.nodes[k]) - mu;
            cov.selfadjointView<Eigen::Lower>().rankUpdate(d, rule.weights[k]);
        }
        cov = cov.selfadjointView<Eigen::Lower>();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        const double top = es.eigenvalues().maxCoeff();
        std::vector<int> keep;
        for (int i = 0; i < kMomentDim; ++i)
            if (es.eigenvalues()(i) > 1e-10 * top) keep.push_back(i);
        Eigen::MatrixXd u(kMomentDim, keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) u.col(i) = es.eigenvectors().col(keep[i]);

        const Eigen::MatrixXd a = u.topRows(10);
        const Eigen::MatrixXd a_pinv = a.transpose() * (a * a.transpose()).inverse();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
        const Eigen::MatrixXd null = svd.matrixV().rightCols(a.cols() - 10);

        ChartData out;
        out.chart.lq = u * a_pinv;
        out.chart.base = mu - out.chart.lq * mu.head<10>();
        out.chart.lh = u * null;
        for (int j = 0; j < out.chart.free_dim(); ++j)
            out.dirs.push_back(assemble_xi4(MomentState::unpack(out.chart.lh.col(j)), false));
        return out;
    }();
    return data;
}

}  // namespace

PhysicalParams PhysicalParams::make(double gamma1, double gamma2, double gamma3, double zeta, double i11, double i22,
                                    double i33, double eta) {
    PhysicalParams p{gamma1, gamma2, gamma3, zeta, i11, i22, i33, 0.5, eta};
    if (!(i11 > 0 && i22 > 0)) throw std::invalid_argument("moments of inertia must be positive");
    p.e1 = i22 / (i11 + i22);
    p.validate();
    return p;
}

void PhysicalParams::validate() const {
    const double vals[] = {gamma1, gamma2, gamma3, zeta, i11, i22, i33, eta};
    for (double v : vals)
        if (!(v > 0)) throw std::invalid_argument("physical parameters must be strictly positive");
    if (std::abs(e1 - i22 / (i11 + i22)) > 1e-14) throw std::invalid_argument("e1 must equal i22/(i11+i22)");
}

MomentVec MomentState::pack() const {
    MomentVec v;
    int o = 0;
    auto put = [&](const auto& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) v(o++) = m(i, j);
    };
    put(c1);
    put(c2);
    put(t1);
    put(t2);
    put(t3);
    put(f11);
    put(f21);
    put(f22);
    put(g3);
    put(g4);
    put(g5);
    return v;
}

MomentState MomentState::unpack(const MomentVec& v) {
    MomentState s;
    int o = 0;
    auto get = [&](auto& m) {
        for (int i = 0; i < m.rows(); ++i)
            for (int j = 0; j < m.cols(); ++j) m(i, j) = v(o++);
    };
    get(s.c1);
    get(s.c2);
    get(s.t1);
    get(s.t2);
    get(s.t3);
    get(s.f11);
    get(s.f21);
    get(s.f22);
    get(s.g3);
    get(s.g4);
    get(s.g5);
    return s;
}

Mat3 MomentState::second(int a) const {
    const Mat3 third = Mat3::Identity() / 3.0;
    if (a == 0) return matrix_of(c1) + third;
    if (a == 1) return matrix_of(c2) + third;
    return matrix_of(-c1 - c2) + third;
}

MomentVec frame_features(const Mat3& r) {
    const Vec3 m1 = r.col(0), m2 = r.col(1), m3 = r.col(2);
    MomentState s;
    s.c1 = coords_of(m1 * m1.transpose());
    s.c2 = coords_of(m2 * m2.transpose());
    const Vec5 d = 2.0 * s.c2 + s.c1;
    const Vec5 g3 = coords_of(sym_outer(m1, m2));
    const Vec5 g4 = coords_of(sym_outer(m1, m3));
    const Vec5 g5 = coords_of(sym_outer(m2, m3));
    s.t1 = m1 * g5.transpose();
    s.t2 = m2 * g4.transpose();
    s.t3 = m3 * g3.transpose();
    s.f11 = s.c1 * s.c1.transpose();
    s.f21 = d * s.c1.transpose();
    s.f22 = d * d.transpose();
    s.g3 = g3 * g3.transpose();
    s.g4 = g4 * g4.transpose();
    s.g5 = g5 * g5.transpose();
    return s.pack();
}

ClosureTensors ClosureTensors::rotated(const Mat3& r) const {
    return {r1.rotated(r), r2.rotated(r), r3.rotated(r), r4.rotated(r), r5.rotated(r), vq1.rotated(r), vq2.rotated(r)};
}

MomentState moments_from_density(const ConjugatePair& b, const QuadratureRule& rule) {
    return MomentState::unpack(features_sum(rule, density_weights(rule, b)));
}

MomentState moments_uniform(const QuadratureRule& rule) {
    return MomentState::unpack(features_sum(rule, rule.weights));
}

ClosureTensors closure_from_moments(const MomentState& ms, double e1) {
    const double e2 = 1.0 - e1;
    const Mat95& p = basis_embedding();
    const auto& e = sym_basis();
    ClosureTensors ct;
    ct.r1 = Tensor4Op::from_sym5(ms.f11);
    ct.r2 = Tensor4Op::from_sym5(0.25 * (ms.f22 - ms.f21 - ms.f21.transpose() + ms.f11));
    ct.r3 = Tensor4Op::from_sym5(4.0 * ms.g3);
    ct.r4 = Tensor4Op::from_sym5(4.0 * ms.g4);
    ct.r5 = Tensor4Op::from_sym5(4.0 * ms.g5);

    // Symmetric part of m_a (x) m_b pairs with G, the antisymmetric part with T through m_a x m_b.
    auto build_v = [&](const Mat5& s, const Mat35& anti) {
        Mat59 v;
        for (int k = 0; k < 3; ++k) {
            for (int l = 0; l < 3; ++l) {
                Vec5 col = Vec5::Zero();
                for (int b = 0; b < 5; ++b) col += s.col(b) * e[b](k, l);
                for (int q = 0; q < 3; ++q) {
                    const int eps = levi(k, l, q);
                    if (eps != 0) col += eps * anti.row(q).transpose();
                }
                v.col(3 * k + l) = col;
            }
        }
        return Tensor4Op(p * v);
    };
    ct.vq1 = build_v(2.0 * ms.g4 + 2.0 * (e1 - e2) * ms.g3, ms.t3 - ms.t2);
    ct.vq2 = build_v(2.0 * ms.g5 - 2.0 * (e1 - e2) * ms.g3, ms.t1 - ms.t3);
    return ct;
}

ClosureTensors closure_maxent(const QPair& q, const QuadratureRule& rule, double e1) {
    const ConjugatePair b = solve_conjugate(q, rule);
    return closure_from_moments(moments_from_density(b, rule), e1);
}

Eigen::VectorXd MomentChart::free_coords(const MomentVec& phi) const {
    const QPair q = QPair::from_vec(phi.head<10>());
    return lh.transpose() * (phi - base - lq * q.vec());
}

const MomentChart& moment_chart() { return chart_data().chart; }

double xi4(const MomentVec& phi) { return xi4_of(assemble_xi4(MomentState::unpack(phi), true)); }

QuasiResult closure_quasi(const QPair& q, const QuasiOptions& opt, const std::optional<Eigen::VectorXd>& warm) {
    const ChartData& cd = chart_data();
    const MomentChart& chart = cd.chart;
    const int nf = chart.free_dim();

    Eigen::VectorXd h;
    bool warm_ok = false;
    if (warm && warm->size() == nf) {
        h = *warm;
        warm_ok = std::isfinite(xi4(chart.moments(q, h)));
    }
    if (!warm_ok) {
        const QuadratureRule* rules[2] = {&coarse_rule(), &default_rule()};
        bool found = false;
        for (const QuadratureRule* rule : rules) {
            try {
                const ConjugatePair b = solve_conjugate(q, *rule);
                h = chart.free_coords(moments_from_density(b, *rule).pack());
                if (std::isfinite(xi4(chart.moments(q, h)))) {
                    found = true;
                    break;
                }
            } catch (const ConvergenceError&) {
            }
        }
        if (!found) throw DomainError("closure_quasi: no feasible moment state for this Q");
    }

    QuasiResult res;
    Eigen::VectorXd g(nf);
    Eigen::MatrixXd hess(nf, nf);
    double f = xi4(chart.moments(q, h));
    for (int it = 0;; ++it) {
        const Xi4Mats m = assemble_xi4(MomentState::unpack(chart.moments(q, h)), true);
        Mat11 ia;
        Mat8 ib[3];
        double ld = 0.0;
        bool ok = chol_logdet<11>(m.a, ld, &ia);
        for (int k = 0; k < 3; ++k) ok = ok && chol_logdet<8>(m.b[k], ld, &ib[k]);
        if (!ok) throw DomainError("closure_quasi left the Xi4 domain");

        Eigen::MatrixXd wa(121, nf), wat(121, nf);
        Eigen::MatrixXd wb[3], wbt[3];
        for (int k = 0; k < 3; ++k) {
            wb[k].resize(64, nf);
            wbt[k].resize(64, nf);
        }
        for (int j = 0; j < nf; ++j) {
            const Mat11 w = ia * cd.dirs[j].a;
            g(j) = -w.trace();
            wa.col(j) = Eigen::Map<const Eigen::Matrix<double, 121, 1>>(w.data());
            const Mat11 wt = w.transpose();
            wat.col(j) = Eigen::Map<const Eigen::Matrix<double, 121, 1>>(wt.data());
            for (int k = 0; k < 3; ++k) {
                const Mat8 v = ib[k] * cd.dirs[j].b[k];
                g(j) -= v.trace();
                wb[k].col(j) = Eigen::Map<const Eigen::Matrix<double, 64, 1>>(v.data());
                const Mat8 vt = v.transpose();
                wbt[k].col(j) = Eigen::Map<const Eigen::Matrix<double, 64, 1>>(vt.data());
            }
        }
        hess.noalias() = wa.transpose() * wat;
        for (int k = 0; k < 3; ++k) hess.noalias() += wb[k].transpose() * wbt[k];
        hess = 0.5 * (hess + hess.transpose()).eval();

        res.iterations = it;
        res.grad_norm = g.norm();
        if (res.grad_norm < opt.tol) break;
        if (it >= opt.max_iter) throw ConvergenceError("closure_quasi: Newton did not reach the stationarity tolerance");

        const Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        const Eigen::VectorXd dx = -ldlt.solve(g);
        const double slope = g.dot(dx);
        // Inside the quadratic region the decrease is below roundoff; take the full step if feasible.
        const bool local = -slope < 1e-8;
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            const Eigen::VectorXd trial = h + t * dx;
            const double ft = xi4(chart.moments(q, trial));
            if (std::isfinite(ft) && (local || ft <= f + 1e-4 * t * slope)) {
                h = trial;
                f = ft;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // Roundoff floor: the decrease test cannot resolve further progress.
            if (res.grad_norm < 1e3 * opt.tol) break;
            throw ConvergenceError("closure_quasi: line search failed");
        }
    }
    res.h = h;
    res.xi4 = f;
    res.hessian = hess;
    res.moments = MomentState::unpack(chart.moments(q, h));
    res.tensors = closure_from_moments(res.moments, opt.e1);
    return res;
}

KineticOperators assemble_operators(const ClosureTensors& ct, const PhysicalParams& params) {
    const Mat5 r3 = ct.r3.sym5(), r4 = ct.r4.sym5(), r5 = ct.r5.sym5();
    KineticOperators k;
    k.m.block<5, 5>(0, 0) = params.gamma2 * r4 + params.gamma3 * r3;
    k.m.block<5, 5>(0, 5) = -params.gamma3 * r3;
    k.m.block<5, 5>(5, 0) = -params.gamma3 * r3;
    k.m.block<5, 5>(5, 5) = params.gamma1 * r5 + params.gamma3 * r3;
    const Mat95& p = basis_embedding();
    k.v.topRows<5>() = p.transpose() * ct.vq1.matrix();
    k.v.bottomRows<5>() = p.transpose() * ct.vq2.matrix();
    k.n = k.v.transpose();
    k.p = params.zeta *
          (params.i22 * ct.r1.matrix() + params.i11 * ct.r2.matrix() + params.e1 * params.i11 * ct.r3.matrix());
    return k;
}

ClosureRoute parse_route(const std::string& s) {
    if (s == "maxent") return ClosureRoute::Maxent;
    if (s == "quasi") return ClosureRoute::Quasi;
    throw std::invalid_argument("unknown closure route '" + s + "' (expected maxent or quasi)");
}

std::string route_name(ClosureRoute r) { return r == ClosureRoute::Maxent ? "maxent" : "quasi"; }

ClosureTensors closure_tensors(const QPair& q, ClosureRoute route, const QuadratureRule& rule, double e1) {
    if (route == ClosureRoute::Maxent) return closure_maxent(q, rule, e1);
    QuasiOptions opt;
    opt.e1 = e1;
    return closure_quasi(q, opt).tensors;
}

std::string closure_csv(const ClosureTensors& ct) {
    std::ostringstream out;
    const std::pair<const char*, const Tensor4Op*> rows[] = {{"r1", &ct.r1}, {"r2", &ct.r2}, {"r3", &ct.r3},
                                                             {"r4", &ct.r4}, {"r5", &ct.r5}, {"vq1", &ct.vq1},
                                                             {"vq2", &ct.vq2}};
    out << "tensor";
    for (int i = 0; i < 81; ++i) out << ",a" << i / 9 << (i % 9);
    out << "\n";
    char buf[40];
    for (const auto& [name, t] : rows) {
        out << name;
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", t->matrix()(i, j));
                out << ',' << buf;
            }
        out << "\n";
    }
    return out.str();
}

}  // namespace qt
