#pragma once

#include "qt/tensor.hpp"

#include <optional>
#include <vector>

namespace qt {

// Lagrange multipliers (B1, B2) of the maximum entropy density exp(B1.m1^2 + B2.m2^2).
struct ConjugatePair {
    Vec5 b1 = Vec5::Zero();
    Vec5 b2 = Vec5::Zero();

    Vec10 vec() const {
        Vec10 v;
        v << b1, b2;
        return v;
    }
    static ConjugatePair from_vec(const Vec10& v) { return {v.head<5>(), v.tail<5>()}; }
    QPair as_qpair() const { return {b1, b2}; }
};

struct QuadratureRule {
    std::vector<Mat3> nodes;  // columns m1, m2, m3
    std::vector<double> weights;
    // Coordinates of (m1^2 - I/3, m2^2 - I/3) per node; the exponent of the density is B . this.
    std::vector<Vec10> second_moments;

    std::size_t size() const { return nodes.size(); }
};

// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

// ZYZ Euler product rule: Gauss-Legendre in cos(beta), uniform grids in alpha and gamma.
// Throws std::invalid_argument for counts below 2.
QuadratureRule build_rule(int n_beta = 24, int n_torus = 24);

// Normalized density weights w_k rho(q_k) / sum; nullopt means the uniform density.
std::vector<double> density_weights(const QuadratureRule& rule, const std::optional<ConjugatePair>& b);

// Sum_k p_k f(q_k) with p from density_weights. T needs + and scalar *.
template <class T, class F>
T average(const QuadratureRule& rule, const std::optional<ConjugatePair>& b, F&& f) {
    const std::vector<double> p = density_weights(rule, b);
    T acc = f(rule.nodes[0]) * p[0];
    for (std::size_t k = 1; k < rule.size(); ++k) acc = acc + f(rule.nodes[k]) * p[k];
    return acc;
}

}  // namespace qt
