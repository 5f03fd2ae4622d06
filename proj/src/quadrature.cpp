#include "qt/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qt {

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    // Golub-Welsch on the Jacobi matrix of the Legendre recurrence.
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = k / std::sqrt(4.0 * k * k - 1.0);
        j(k, k - 1) = j(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    x.resize(n);
    w.resize(n);
    for (int k = 0; k < n; ++k) {
        x[k] = es.eigenvalues()(k);
        const double v = es.eigenvectors()(0, k);
        w[k] = 2.0 * v * v;
    }
}

QuadratureRule build_rule(int n_beta, int n_torus) {
    if (n_beta < 2 || n_torus < 2) throw std::invalid_argument("quadrature counts must be at least 2");
    std::vector<double> x, wx;
    gauss_legendre(n_beta, x, wx);

    QuadratureRule rule;
    const std::size_t total = static_cast<std::size_t>(n_beta) * n_torus * n_torus;
    rule.nodes.reserve(total);
    rule.weights.reserve(total);
    rule.second_moments.reserve(total);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int ib = 0; ib < n_beta; ++ib) {
        const double beta = std::acos(x[ib]);
        for (int ia = 0; ia < n_torus; ++ia) {
            for (int ig = 0; ig < n_torus; ++ig) {
                const Frame f = Frame::from_euler_zyz(two_pi * ia / n_torus, beta, two_pi * ig / n_torus);
                const Mat3& r = f.matrix();
                rule.nodes.push_back(r);
                rule.weights.push_back(0.5 * wx[ib] / (static_cast<double>(n_torus) * n_torus));
                Vec10 c;
                c << coords_of(r.col(0) * r.col(0).transpose()), coords_of(r.col(1) * r.col(1).transpose());
                rule.second_moments.push_back(c);
            }
        }
    }
    return rule;
}

std::vector<double> density_weights(const QuadratureRule& rule, const std::optional<ConjugatePair>& b) {
    const std::size_t n = rule.size();
    std::vector<double> p(rule.weights);
    if (!b) return p;
    const Vec10 bv = b->vec();
    std::vector<double> ex(n);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        ex[k] = bv.dot(rule.second_moments[k]);
        mx = std::max(mx, ex[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        p[k] *= std::exp(ex[k] - mx);
        z += p[k];
    }
    for (double& v : p) v /= z;
    return p;
}

}  // namespace qt
