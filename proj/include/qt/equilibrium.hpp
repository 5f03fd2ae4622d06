#pragma once

#include "qt/entropy.hpp"
#include "qt/quadrature.hpp"
#include "qt/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qt {

struct BulkCoefficients {
    double c02 = 0.0, c03 = 0.0, c04 = 0.0;
    EntropyKind kind;

    Eigen::Matrix2d d0() const {
        Eigen::Matrix2d d;
        d << c02, c04, c04, c03;
        return d;
    }
};

struct BiaxialForm {
    double s1 = 0.0, b1 = 0.0, s2 = 0.0, b2 = 0.0;
    Frame frame;

    QPair q() const { return biaxial_pair(s1, b1, s2, b2, frame); }
    // Range constraints for i = 1, 2, 3 with s3 = -s1 - s2, b3 = -b1 - b2.
    bool in_range() const;
};

// Eigen-decomposition of a commuting pair; n1 carries Q1's eigenvalue of largest magnitude,
// n2/n3 ordered so that b2 >= 0 (b1 >= 0 when b2 vanishes).
BiaxialForm canonical_biaxial(const QPair& q);

double bulk_energy(const QPair& q, const BulkCoefficients& c, const QuadratureRule& rule);
QPair bulk_gradient(const QPair& q, const BulkCoefficients& c, const QuadratureRule& rule);
Mat10 bulk_hessian(const QPair& q, const BulkCoefficients& c, const QuadratureRule& rule);

struct MinimizerResult {
    BiaxialForm form;
    QPair q;                // polished full 10-dim stationary point
    double energy = 0.0;
    double grad_norm = 0.0;
    int converged_starts = 0;
};

// Multistart reduced Newton followed by a full 10-dim polish. Throws ConvergenceError when no start converges.
MinimizerResult find_minimizer(const BulkCoefficients& c, const QuadratureRule& rule, int starts = 8,
                               std::uint64_t seed = 0);

struct HessianSpectrum {
    Mat10 hessian;
    Vec10 eigenvalues;                   // ascending
    Mat10 eigenvectors;                  // columns
    std::array<QPair, 3> xi;             // analytic tangents L_k Q0
    std::vector<Vec10> xi_basis;         // Gram-Schmidt of the nonzero tangents
    int kernel_dim = 0;
    double xi_angle = 0.0;               // largest principal angle between span{xi} and the numerical kernel
    std::vector<Vec10> positive_basis;   // e_j
    std::vector<double> positive_values; // lambda_j
    double smallest_positive() const;
};

// Throws DomainError when q0 is not stationary (|J| >= 1e-8).
HessianSpectrum hessian_spectrum(const BiaxialForm& q0, const BulkCoefficients& c, const QuadratureRule& rule,
                                 double zero_tol = 1e-6);

QPair project_in(const QPair& q, const HessianSpectrum& spec);
QPair project_out(const QPair& q, const HessianSpectrum& spec);

struct Assumption1Report {
    BulkCoefficients coefficients;
    BiaxialForm minimizer;
    Vec10 eigenvalues;
    int kernel_dim = 0;
    double xi_angle = 0.0;
    double smallest_positive = 0.0;
    double grad_norm = 0.0;
    bool pass = false;
};

Assumption1Report verify_assumption1(const BulkCoefficients& c, const QuadratureRule& rule, int starts = 8,
                                     std::uint64_t seed = 0);

}  // namespace qt
