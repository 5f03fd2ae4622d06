#include "qt/equilibrium.hpp"

#include "qt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <tuple>

namespace qt {

namespace {

// Columns map (s1, b1, s2, b2) to identity-frame coordinates.
Eigen::Matrix<double, 10, 4> reduced_map() {
    Eigen::Matrix<double, 10, 4> j = Eigen::Matrix<double, 10, 4>::Zero();
    j(0, 0) = std::sqrt(2.0 / 3.0);
    j(1, 1) = std::sqrt(2.0);
    j(5, 2) = std::sqrt(2.0 / 3.0);
    j(6, 3) = std::sqrt(2.0);
    return j;
}

QPair d0_apply(const QPair& q, const BulkCoefficients& c) {
    return {c.c02 * q.q1 + c.c04 * q.q2, c.c04 * q.q1 + c.c03 * q.q2};
}

double safe_energy(const QPair& q, const BulkCoefficients& c, const QuadratureRule& rule) {
    if (!domain_membership(q, 1e-12)) return std::numeric_limits<double>::infinity();
    try {
        return bulk_energy(q, c, rule);
    } catch (const DomainError&) {
    } catch (const ConvergenceError&) {
    }
    return std::numeric_limits<double>::infinity();
}

// Levenberg-Marquardt-damped Newton (a trust region on the Newton model) on a generic chart q = map(x).
template <int N, class Map, class Jac>
bool damped_newton(Eigen::Matrix<double, N, 1>& x, const Map& map, const Jac& jac, const BulkCoefficients& c,
                   const QuadratureRule& rule, double gtol, int max_iter, double& energy, double& gnorm) {
    using Vec = Eigen::Matrix<double, N, 1>;
    using Mat = Eigen::Matrix<double, N, N>;
    double f = safe_energy(map(x), c, rule);
    if (!std::isfinite(f)) return false;
    double lambda = 1e-3;
    for (int it = 0; it < max_iter; ++it) {
        const QPair q = map(x);
        const auto jm = jac();
        const Vec g = jm.transpose() * bulk_gradient(q, c, rule).vec();
        gnorm = g.norm();
        if (gnorm < gtol) {
            energy = f;
            return true;
        }
        const Mat h = jm.transpose() * bulk_hessian(q, c, rule) * jm;
        const double scale = std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
        bool accepted = false;
        for (int tries = 0; tries < 60; ++tries) {
            Mat hs = h + lambda * scale * Mat::Identity();
            Eigen::LLT<Mat> llt(hs);
            if (llt.info() != Eigen::Success) {
                lambda *= 10.0;
                continue;
            }
            const Vec dx = -llt.solve(g);
            const double ft = safe_energy(map(x + dx), c, rule);
            const double pred = g.dot(dx) + 0.5 * dx.dot(h * dx);
            if (std::isfinite(ft) && (ft <= f + 1e-4 * pred || std::abs(ft - f) < 1e-14 * std::max(1.0, std::abs(f)))) {
                x += dx;
                f = ft;
                lambda = std::max(lambda / 10.0, 1e-14);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) break;
    }
    energy = f;
    const auto jm = jac();
    gnorm = (jm.transpose() * bulk_gradient(map(x), c, rule).vec()).norm();
    return gnorm < gtol;
}

}  // namespace

bool BiaxialForm::in_range() const {
    const double s[3] = {s1, s2, -s1 - s2};
    const double b[3] = {b1, b2, -b1 - b2};
    for (int i = 0; i < 3; ++i) {
        if (!(2.0 * s[i] / 3.0 + 1.0 / 3.0 > 0)) return false;
        if (!(1.0 / 3.0 - s[i] / 3.0 + b[i] > 0)) return false;
        if (!(1.0 / 3.0 - s[i] / 3.0 - b[i] > 0)) return false;
    }
    return true;
}

BiaxialForm canonical_biaxial(const QPair& q) {
    const Mat3 a = q.m1(), b = q.m2();
    // A generic combination separates the shared eigenvectors of a commuting pair.
    const Mat3 mix = a + 0.7548776662466927 * b;
    Eigen::SelfAdjointEigenSolver<Mat3> es(mix);
    Mat3 v = es.eigenvectors();
    Vec3 la, lb;
    for (int i = 0; i < 3; ++i) {
        la(i) = v.col(i).dot(a * v.col(i));
        lb(i) = v.col(i).dot(b * v.col(i));
    }
    int i1 = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(la(i)) > std::abs(la(i1)) + 1e-12) i1 = i;
    int i2 = (i1 + 1) % 3, i3 = (i1 + 2) % 3;
    BiaxialForm f;
    auto fill = [&](int j2, int j3) {
        f.s1 = 1.5 * la(i1);
        f.s2 = 1.5 * lb(i1);
        f.b1 = 0.5 * (la(j2) - la(j3));
        f.b2 = 0.5 * (lb(j2) - lb(j3));
    };
    fill(i2, i3);
    const double tiny = 1e-12;
    if (f.b2 < -tiny || (std::abs(f.b2) <= tiny && f.b1 < -tiny)) {
        std::swap(i2, i3);
        fill(i2, i3);
    }
    Mat3 r;
    r.col(0) = v.col(i1);
    r.col(1) = v.col(i2);
    r.col(2) = v.col(i1).cross(v.col(i2));
    f.frame = Frame::orthonormalize(r);
    if (q.norm() < 1e-14) f.frame = Frame();
    return f;
}

double bulk_energy(const QPair& q, const BulkCoefficients& c, const QuadratureRule& rule) {
    const double quad = 0.5 * (c.c02 * q.q1.squaredNorm() + c.c03 * q.q2.squaredNorm() + 2.0 * c.c04 * q.q1.dot(q.q2));
    return entropy_value(q, c.kind, rule) + quad;
}

QPair bulk_gradient(const QPair& q, const BulkCoefficients& c, const QuadratureRule& rule) {
    return entropy_grad(q, c.kind, rule) + d0_apply(q, c);
}

Mat10 bulk_hessian(const QPair& q, const BulkCoefficients& c, const QuadratureRule& rule) {
    Mat10 h = entropy_hess(q, c.kind, rule);
    for (int a = 0; a < 5; ++a) {
        h(a, a) += c.c02;
        h(5 + a, 5 + a) += c.c03;
        h(a, 5 + a) += c.c04;
        h(5 + a, a) += c.c04;
    }
    return h;
}

MinimizerResult find_minimizer(const BulkCoefficients& c, const QuadratureRule& rule, int starts, std::uint64_t seed) {
    using Vec4 = Eigen::Matrix<double, 4, 1>;
    const Eigen::Matrix<double, 10, 4> jr = reduced_map();
    const auto map4 = [&](const Vec4& x) { return QPair::from_vec(jr * x); };

    std::vector<Vec4> inits;
    inits.push_back(Vec4(0.5, 0.0, -0.25, 0.25));
    Rng rng(seed);
    while (static_cast<int>(inits.size()) < starts + 1) {
        BiaxialForm f;
        f.s1 = rng.uniform(-0.5, 1.0);
        f.b1 = rng.uniform(-0.5, 0.5);
        f.s2 = rng.uniform(-0.5, 1.0);
        f.b2 = rng.uniform(-0.5, 0.5);
        if (domain_membership(f.q(), 0.02)) inits.emplace_back(f.s1, f.b1, f.s2, f.b2);
    }

    struct Candidate {
        double energy;
        Vec4 x;
    };
    std::optional<Candidate> best;
    int converged = 0;
    for (const Vec4& x0 : inits) {
        Vec4 x = x0;
        double e = 0.0, gn = 0.0;
        if (!damped_newton<4>(x, map4, [&] { return jr; }, c, rule, 1e-10, 200, e, gn)) continue;
        ++converged;
        const BiaxialForm f = canonical_biaxial(map4(x));
        const Vec4 key(f.s1, f.b1, f.s2, f.b2);
        const bool better = !best || e < best->energy - 1e-10 ||
                            (std::abs(e - best->energy) <= 1e-10 &&
                             std::lexicographical_compare(key.data(), key.data() + 4, best->x.data(), best->x.data() + 4));
        if (better) best = Candidate{e, key};
    }
    if (!best) throw ConvergenceError("find_minimizer: every start diverged");

    BiaxialForm f0{best->x(0), best->x(1), best->x(2), best->x(3), Frame()};
    Vec10 x = f0.q().vec();
    const Mat10 id = Mat10::Identity();
    double e = 0.0, gn = 0.0;
    damped_newton<10>(x, [](const Vec10& v) { return QPair::from_vec(v); }, [&] { return id; }, c, rule, 1e-10, 50, e, gn);

    MinimizerResult res;
    res.q = QPair::from_vec(x);
    res.form = canonical_biaxial(res.q);
    res.energy = e;
    res.grad_norm = bulk_gradient(res.q, c, rule).norm();
    res.converged_starts = converged;
    return res;
}

double HessianSpectrum::smallest_positive() const {
    return positive_values.empty() ? 0.0 : *std::min_element(positive_values.begin(), positive_values.end());
}

HessianSpectrum hessian_spectrum(const BiaxialForm& q0, const BulkCoefficients& c, const QuadratureRule& rule,
                                 double zero_tol) {
    const QPair q = q0.q();
    if (bulk_gradient(q, c, rule).norm() >= 1e-8) throw DomainError("hessian_spectrum: point is not stationary");

    HessianSpectrum sp;
    sp.hessian = bulk_hessian(q, c, rule);
    Eigen::SelfAdjointEigenSolver<Mat10> es(sp.hessian);
    sp.eigenvalues = es.eigenvalues();
    sp.eigenvectors = es.eigenvectors();

    const FrameMapDerivative df = biaxial_pair_derivative(q0.s1, q0.b1, q0.s2, q0.b2);
    double xmax = 0.0;
    for (int k = 0; k < 3; ++k) {
        sp.xi[k] = lie_derivative(k, df, q0.frame);
        xmax = std::max(xmax, sp.xi[k].norm());
    }
    for (int k = 0; k < 3; ++k) {
        Vec10 v = sp.xi[k].vec();
        if (v.norm() <= 1e-10 * std::max(1.0, xmax)) continue;
        for (const Vec10& u : sp.xi_basis) v -= u.dot(v) * u;
        if (v.norm() <= 1e-10 * std::max(1.0, xmax)) continue;
        sp.xi_basis.push_back(v.normalized());
    }

    std::vector<int> ker;
    for (int i = 0; i < 10; ++i)
        if (std::abs(sp.eigenvalues(i)) < zero_tol) ker.push_back(i);
    sp.kernel_dim = static_cast<int>(ker.size());

    const int nx = static_cast<int>(sp.xi_basis.size());
    Eigen::MatrixXd ux(10, nx), uk(10, sp.kernel_dim);
    for (int i = 0; i < nx; ++i) ux.col(i) = sp.xi_basis[i];
    for (int i = 0; i < sp.kernel_dim; ++i) uk.col(i) = sp.eigenvectors.col(ker[i]);
    double sine = 0.0;
    if (nx != sp.kernel_dim) {
        sine = 1.0;
    } else if (nx > 0) {
        const Eigen::MatrixXd r = ux - uk * (uk.transpose() * ux);
        sine = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues()(0);
    }
    sp.xi_angle = std::asin(std::min(1.0, sine));

    // Compress H onto the orthogonal complement of span{xi}.
    Mat10 proj = Mat10::Identity();
    for (const Vec10& u : sp.xi_basis) proj -= u * u.transpose();
    Eigen::SelfAdjointEigenSolver<Mat10> pc(proj);
    const int m = 10 - nx;
    const Eigen::MatrixXd v = pc.eigenvectors().rightCols(m);
    const Eigen::MatrixXd hc = v.transpose() * sp.hessian * v;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hs(hc);
    for (int j = 0; j < m; ++j) {
        sp.positive_basis.push_back(v * hs.eigenvectors().col(j));
        sp.positive_values.push_back(hs.eigenvalues()(j));
    }
    return sp;
}

QPair project_in(const QPair& q, const HessianSpectrum& spec) {
    Vec10 out = Vec10::Zero();
    const Vec10 x = q.vec();
    for (const Vec10& u : spec.xi_basis) out += u.dot(x) * u;
    return QPair::from_vec(out);
}

QPair project_out(const QPair& q, const HessianSpectrum& spec) {
    Vec10 out = Vec10::Zero();
    const Vec10 x = q.vec();
    for (const Vec10& e : spec.positive_basis) out += e.dot(x) / e.squaredNorm() * e;
    return QPair::from_vec(out);
}

Assumption1Report verify_assumption1(const BulkCoefficients& c, const QuadratureRule& rule, int starts,
                                     std::uint64_t seed) {
    Assumption1Report rep;
    rep.coefficients = c;
    const MinimizerResult mr = find_minimizer(c, rule, starts, seed);
    rep.minimizer = mr.form;
    rep.grad_norm = mr.grad_norm;
    const HessianSpectrum sp = hessian_spectrum(mr.form, c, rule);
    rep.eigenvalues = sp.eigenvalues;
    rep.kernel_dim = sp.kernel_dim;
    rep.xi_angle = sp.xi_angle;
    rep.smallest_positive = 0.0;
    for (int i = 0; i < 10; ++i)
        if (sp.eigenvalues(i) >= 1e-6) {
            rep.smallest_positive = sp.eigenvalues(i);
            break;
        }
    rep.pass = rep.kernel_dim == 3 && rep.xi_angle < 1e-5;
    return rep;
}

}  // namespace qt
