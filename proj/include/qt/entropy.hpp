#pragma once

#include "qt/quadrature.hpp"
#include "qt/tensor.hpp"

#include <optional>

namespace qt {

struct EntropyKind {
    enum class Tag { Original, Quasi };
    Tag tag = Tag::Quasi;
    double nu = 5.0 / 9.0;

    static EntropyKind original() { return {Tag::Original, 1.0}; }
    // Throws std::invalid_argument unless nu > 0.
    static EntropyKind quasi(double nu);
    bool is_quasi() const { return tag == Tag::Quasi; }
};

// -ln det(Q1 + I/3) - ln det(Q2 + I/3) - ln det(I/3 - Q1 - Q2). Throws DomainError outside.
double xi2(const QPair& q);
QPair xi2_grad(const QPair& q);
Mat10 xi2_hess(const QPair& q);

// Moments <m_i^2 - I/3> under rho(B) and their covariance (the Jacobian dQ/dB).
struct MomentResponse {
    QPair q;
    Mat10 cov;
    double log_z = 0.0;  // ln Z under the normalized Haar measure
};
MomentResponse maxent_response(const ConjugatePair& b, const QuadratureRule& rule);

struct ConjugateOptions {
    double tol = 1e-11;
    int max_iter = 100;
    int max_halvings = 30;
    int continuation_steps = 4;
};

// Newton on Q - <m_i^2 - I/3>_B. Throws ConvergenceError (near-boundary or outside the domain).
ConjugatePair solve_conjugate(const QPair& q, const QuadratureRule& rule, const ConjugateOptions& opt = {},
                              const std::optional<ConjugatePair>& warm = std::nullopt);

// B.Q - ln Z, zero at Q = 0.
double f_orig(const QPair& q, const QuadratureRule& rule);
// Inverse covariance at the conjugate of q.
Mat10 f_orig_hess(const QPair& q, const QuadratureRule& rule);

double entropy_value(const QPair& q, const EntropyKind& kind, const QuadratureRule& rule);
QPair entropy_grad(const QPair& q, const EntropyKind& kind, const QuadratureRule& rule);
Mat10 entropy_hess(const QPair& q, const EntropyKind& kind, const QuadratureRule& rule);

}  // namespace qt
