#pragma once

#include "qt/equilibrium.hpp"
#include "qt/quadrature.hpp"
#include "qt/rng.hpp"
#include "qt/tensor.hpp"

#include <cmath>

namespace qt::test {

inline const QuadratureRule& rule() {
    static const QuadratureRule r = build_rule(24, 24);
    return r;
}

inline BulkCoefficients appendix_coefficients() {
    const double nu = 5.0 / 9.0;
    return {-35.0 * nu, -20.0 * nu, -20.0 * nu, EntropyKind::quasi(nu)};
}

inline const MinimizerResult& appendix_minimizer() {
    static const MinimizerResult m = find_minimizer(appendix_coefficients(), rule(), 8, 0);
    return m;
}

// Haar-distributed rotation from a normalized Gaussian quaternion.
inline Mat3 random_rotation(Rng& rng) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    return q.toRotationMatrix();
}

inline Vec5 random_vec5(Rng& rng, double scale) {
    Vec5 v;
    for (int i = 0; i < 5; ++i) v(i) = scale * rng.normal();
    return v;
}

inline Vec10 random_vec10(Rng& rng, double scale = 1.0) {
    Vec10 v;
    for (int i = 0; i < 10; ++i) v(i) = scale * rng.normal();
    return v;
}

// Interior point: a random biaxial pair in a random frame plus a small generic perturbation,
// rejected until every domain margin is at least `margin`.
inline QPair random_interior(Rng& rng, double margin = 0.05) {
    for (;;) {
        const QPair base = biaxial_pair(rng.uniform(-0.3, 0.6), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.6),
                                        rng.uniform(-0.3, 0.3), Frame(random_rotation(rng)));
        const QPair q = base + QPair(random_vec5(rng, 0.03), random_vec5(rng, 0.03));
        if (domain_membership(q, margin)) return q;
    }
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace qt::test
