#pragma once

#include "qt/entropy.hpp"
#include "qt/quadrature.hpp"
#include "qt/tensor.hpp"

#include <optional>
#include <string>

namespace qt {

struct PhysicalParams {
    double gamma1 = 1.0, gamma2 = 1.0, gamma3 = 1.0;
    double zeta = 1.0;
    double i11 = 1.0, i22 = 1.0, i33 = 1.0;
    double e1 = 0.5;
    double eta = 1.0;

    // Sets e1 = i22 / (i11 + i22); throws std::invalid_argument for nonpositive entries.
    static PhysicalParams make(double gamma1, double gamma2, double gamma3, double zeta, double i11, double i22,
                               double i33, double eta);
    void validate() const;
    double e2() const { return 1.0 - e1; }
};

constexpr int kMomentDim = 205;
using MomentVec = Eigen::Matrix<double, kMomentDim, 1>;
using Mat35 = Eigen::Matrix<double, 3, 5>;

// Frame moments in fixed orthonormal coordinates. d denotes m2^2 - m3^2.
//   c1 = <m1^2 - I/3>, c2 = <m2^2 - I/3>
//   t1 = <m1 (x) m2m3>, t2 = <m2 (x) m1m3>, t3 = <m3 (x) m1m2>
//   f11 = <c1 c1^T>, f21 = <d c1^T>, f22 = <d d^T>
//   g3 = <m1m2 (x) m1m2>, g4 = <m1m3 (x) m1m3>, g5 = <m2m3 (x) m2m3>
struct MomentState {
    Vec5 c1 = Vec5::Zero(), c2 = Vec5::Zero();
    Mat35 t1 = Mat35::Zero(), t2 = Mat35::Zero(), t3 = Mat35::Zero();
    Mat5 f11 = Mat5::Zero(), f21 = Mat5::Zero(), f22 = Mat5::Zero();
    Mat5 g3 = Mat5::Zero(), g4 = Mat5::Zero(), g5 = Mat5::Zero();

    MomentVec pack() const;
    static MomentState unpack(const MomentVec& v);
    // <m_a (x) m_a>, a = 0, 1, 2.
    Mat3 second(int a) const;
    QPair q() const { return {c1, c2}; }
};

// Moment features of a single frame (a point mass).
MomentVec frame_features(const Mat3& frame);

struct ClosureTensors {
    Tensor4Op r1, r2, r3, r4, r5;
    Tensor4Op vq1, vq2;

    // Conjugates every tensor by the rotation r.
    ClosureTensors rotated(const Mat3& r) const;
};

struct KineticOperators {
    Mat10 m;                          // M_Q on (Q1, Q2) coordinates
    Eigen::Matrix<double, 10, 9> v;   // V_Q: kappa (row-major 3x3) -> coordinates
    Eigen::Matrix<double, 9, 10> n;   // N_Q = V_Q^T
    Mat9 p;                           // P_Q on row-major 3x3
};

MomentState moments_from_density(const ConjugatePair& b, const QuadratureRule& rule);
MomentState moments_uniform(const QuadratureRule& rule);

// Tensors read off a moment state; e1 weights the V_Q combinations.
ClosureTensors closure_from_moments(const MomentState& ms, double e1);

ClosureTensors closure_maxent(const QPair& q, const QuadratureRule& rule, double e1 = 0.5);

// Quasi-entropy closure: minimizes Xi4 over the moment states consistent with q.
struct QuasiResult {
    MomentState moments;
    ClosureTensors tensors;
    Eigen::VectorXd h;        // free coordinates of the minimizer
    double xi4 = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    Eigen::MatrixXd hessian;  // Xi4 Hessian in the free coordinates
};

struct QuasiOptions {
    double tol = 1e-9;
    int max_iter = 60;
    double e1 = 0.5;
};

// Warm start h if given, otherwise maxent moments from a coarse rule. Throws DomainError / ConvergenceError.
QuasiResult closure_quasi(const QPair& q, const QuasiOptions& opt = {},
                          const std::optional<Eigen::VectorXd>& warm = std::nullopt);

// The affine moment parameterization used by closure_quasi: moments = base + lq q + lh h.
struct MomentChart {
    MomentVec base;
    Eigen::Matrix<double, kMomentDim, 10> lq;
    Eigen::MatrixXd lh;  // 205 x free
    int free_dim() const { return static_cast<int>(lh.cols()); }
    MomentVec moments(const QPair& q, const Eigen::VectorXd& h) const { return base + lq * q.vec() + lh * h; }
    // Free coordinates of a consistent moment vector.
    Eigen::VectorXd free_coords(const MomentVec& phi) const;
};
const MomentChart& moment_chart();

// Xi4 at a moment vector; +infinity outside its domain.
double xi4(const MomentVec& phi);

KineticOperators assemble_operators(const ClosureTensors& ct, const PhysicalParams& params);

enum class ClosureRoute { Maxent, Quasi };
ClosureRoute parse_route(const std::string& s);
std::string route_name(ClosureRoute r);

ClosureTensors closure_tensors(const QPair& q, ClosureRoute route, const QuadratureRule& rule, double e1);

// One row per tensor: name followed by the 81 entries of its 9x9 matrix, %.17g.
std::string closure_csv(const ClosureTensors& ct);

}  // namespace qt
