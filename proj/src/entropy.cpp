#include "qt/entropy.hpp"

#include <cmath>
#include <sstream>

namespace qt {

namespace {

struct Xi2Mats {
    Mat3 inv[3];
};

Xi2Mats xi2_inverses(const QPair& q, double* value) {
    const Mat3 a = q.m1(), b = q.m2();
    const Mat3 third = Mat3::Identity() / 3.0;
    const Mat3 mats[3] = {a + third, b + third, third - a - b};
    Xi2Mats out;
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
        Eigen::LLT<Mat3> llt(mats[i]);
        if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0)
            throw DomainError("Xi2 evaluated outside its domain");
        v -= 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        out.inv[i] = llt.solve(Mat3::Identity());
    }
    if (value) *value = v;
    return out;
}

}  // namespace

EntropyKind EntropyKind::quasi(double nu) {
    if (!(nu > 0)) throw std::invalid_argument("quasi-entropy weight nu must be positive");
    return {Tag::Quasi, nu};
}

double xi2(const QPair& q) {
    double v = 0.0;
    xi2_inverses(q, &v);
    return v;
}

QPair xi2_grad(const QPair& q) {
    const Xi2Mats m = xi2_inverses(q, nullptr);
    return QPair::from_matrices(-m.inv[0] + m.inv[2], -m.inv[1] + m.inv[2]);
}

Mat10 xi2_hess(const QPair& q) {
    const Xi2Mats m = xi2_inverses(q, nullptr);
    const auto& e = sym_basis();
    Mat10 h = Mat10::Zero();
    for (int a = 0; a < 5; ++a) {
        Mat3 xe[3];
        for (int i = 0; i < 3; ++i) xe[i] = m.inv[i] * e[a];
        for (int b = 0; b < 5; ++b) {
            double t[3];
            for (int i = 0; i < 3; ++i) t[i] = (xe[i] * m.inv[i] * e[b]).trace();
            h(a, b) = t[0] + t[2];
            h(5 + a, 5 + b) = t[1] + t[2];
            h(a, 5 + b) = t[2];
            h(5 + b, a) = t[2];
        }
    }
    return 0.5 * (h + h.transpose());
}

MomentResponse maxent_response(const ConjugatePair& b, const QuadratureRule& rule) {
    const Vec10 bv = b.vec();
    const std::size_t n = rule.size();
    std::vector<double> ex(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        ex[k] = bv.dot(rule.second_moments[k]);
        mx = std::max(mx, ex[k]);
    }
    double z = 0.0;
    Vec10 mean = Vec10::Zero();
    Mat10 second = Mat10::Zero();
    for (std::size_t k = 0; k < n; ++k) {
        const double p = rule.weights[k] * std::exp(ex[k] - mx);
        const Vec10& c = rule.second_moments[k];
        z += p;
        mean += p * c;
        second.selfadjointView<Eigen::Lower>().rankUpdate(c, p);
    }
    mean /= z;
    second = second.selfadjointView<Eigen::Lower>();
    second /= z;
    MomentResponse r;
    r.q = QPair::from_vec(mean);
    r.cov = second - mean * mean.transpose();
    r.log_z = std::log(z) + mx;
    return r;
}

namespace {

bool newton_conjugate(const Vec10& target, const QuadratureRule& rule, const ConjugateOptions& opt, Vec10& b) {
    MomentResponse r = maxent_response(ConjugatePair::from_vec(b), rule);
    Vec10 res = target - r.q.vec();
    double rn = res.norm();
    for (int it = 0; it < opt.max_iter; ++it) {
        if (rn < opt.tol) return true;
        const Vec10 step = r.cov.ldlt().solve(res);
        if (!step.allFinite()) return false;
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, t *= 0.5) {
            const Vec10 trial = b + t * step;
            MomentResponse rt = maxent_response(ConjugatePair::from_vec(trial), rule);
            const Vec10 rest = target - rt.q.vec();
            if (rest.allFinite() && rest.norm() < rn) {
                b = trial;
                r = rt;
                res = rest;
                rn = rest.norm();
                accepted = true;
                break;
            }
        }
        if (!accepted) return rn < opt.tol;
    }
    return rn < opt.tol;
}

}  // namespace

ConjugatePair solve_conjugate(const QPair& q, const QuadratureRule& rule, const ConjugateOptions& opt,
                              const std::optional<ConjugatePair>& warm) {
    const Vec10 target = q.vec();
    Vec10 b = warm ? warm->vec() : Vec10::Zero();
    if (newton_conjugate(target, rule, opt, b)) return ConjugatePair::from_vec(b);

    b.setZero();
    for (int s = 1; s <= opt.continuation_steps; ++s) {
        const double t = static_cast<double>(s) / opt.continuation_steps;
        if (!newton_conjugate(t * target, rule, opt, b)) {
            std::ostringstream msg;
            msg << "solve_conjugate did not converge (continuation t=" << t << "); Q is near or outside the boundary";
            throw ConvergenceError(msg.str());
        }
    }
    return ConjugatePair::from_vec(b);
}

double f_orig(const QPair& q, const QuadratureRule& rule) {
    const ConjugatePair b = solve_conjugate(q, rule);
    return b.vec().dot(q.vec()) - maxent_response(b, rule).log_z;
}

Mat10 f_orig_hess(const QPair& q, const QuadratureRule& rule) {
    const ConjugatePair b = solve_conjugate(q, rule);
    const Mat10 cov = maxent_response(b, rule).cov;
    const Mat10 inv = cov.ldlt().solve(Mat10::Identity());
    return 0.5 * (inv + inv.transpose());
}

double entropy_value(const QPair& q, const EntropyKind& kind, const QuadratureRule& rule) {
    return kind.is_quasi() ? kind.nu * xi2(q) : f_orig(q, rule);
}

QPair entropy_grad(const QPair& q, const EntropyKind& kind, const QuadratureRule& rule) {
    if (kind.is_quasi()) return xi2_grad(q) * kind.nu;
    return solve_conjugate(q, rule).as_qpair();
}

Mat10 entropy_hess(const QPair& q, const EntropyKind& kind, const QuadratureRule& rule) {
    return kind.is_quasi() ? Mat10(kind.nu * xi2_hess(q)) : f_orig_hess(q, rule);
}

}  // namespace qt
