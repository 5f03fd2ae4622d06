#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace qt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat10 = Eigen::Matrix<double, 10, 10>;
using Mat95 = Eigen::Matrix<double, 9, 5>;
using Mat59 = Eigen::Matrix<double, 5, 9>;

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Orthonormal basis of symmetric traceless 3x3 matrices:
// diag(2,-1,-1)/sqrt6, diag(0,1,-1)/sqrt2, then (e_i e_j + e_j e_i)/sqrt2 for (0,1),(0,2),(1,2).
const std::array<Mat3, 5>& sym_basis();

// 9x5 matrix whose columns are the row-major flattenings of sym_basis().
const Mat95& basis_embedding();

struct SymTraceless2 {
    Vec5 coords = Vec5::Zero();

    SymTraceless2() = default;
    explicit SymTraceless2(const Vec5& c) : coords(c) {}

    // Projects M with S before taking coordinates.
    static SymTraceless2 from_matrix(const Mat3& m);
    Mat3 matrix() const;
    double dot(const SymTraceless2& o) const { return coords.dot(o.coords); }
};

Vec5 coords_of(const Mat3& m);
Mat3 matrix_of(const Vec5& c);

// S(M) = (M + M^T)/2 - tr(M)/3 I
Mat3 sym_traceless_project(const Mat3& m);

struct QPair {
    Vec5 q1 = Vec5::Zero();
    Vec5 q2 = Vec5::Zero();

    QPair() = default;
    QPair(const Vec5& a, const Vec5& b) : q1(a), q2(b) {}
    static QPair from_vec(const Vec10& v) { return {v.head<5>(), v.tail<5>()}; }
    static QPair from_matrices(const Mat3& a, const Mat3& b) { return {coords_of(a), coords_of(b)}; }

    Vec10 vec() const;
    Mat3 m1() const { return matrix_of(q1); }
    Mat3 m2() const { return matrix_of(q2); }
    double dot(const QPair& o) const { return q1.dot(o.q1) + q2.dot(o.q2); }
    double norm() const { return std::sqrt(dot(*this)); }

    QPair operator+(const QPair& o) const { return {q1 + o.q1, q2 + o.q2}; }
    QPair operator-(const QPair& o) const { return {q1 - o.q1, q2 - o.q2}; }
    QPair operator*(double s) const { return {q1 * s, q2 * s}; }
};

inline QPair operator*(double s, const QPair& q) { return q * s; }

class Frame {
public:
    Frame() : r_(Mat3::Identity()) {}
    // Throws std::invalid_argument unless r is orthonormal with det +1 to 1e-12.
    explicit Frame(const Mat3& r);
    // Nearest rotation (polar factor) to r; no validation of the input.
    static Frame orthonormalize(const Mat3& r);
    static Frame from_euler_zyz(double alpha, double beta, double gamma);
    static Frame from_axis_angle(const Vec3& axis, double angle);

    const Mat3& matrix() const { return r_; }
    Vec3 n(int i) const { return r_.col(i); }

private:
    Mat3 r_;
};

// Symmetric tensor of order <= 4 stored densely, index (i0, i1, ...) at sum i_k 3^(order-1-k).
struct SymTensor {
    int order = 0;
    std::vector<double> data;

    double at(std::initializer_list<int> idx) const;
    // Order-2 tensor as a matrix; throws for other orders.
    Mat3 as_matrix() const;
};

// Fully symmetrized n1^k1 n2^k2 n3^k3. Throws std::invalid_argument if k1+k2+k3 > 4.
SymTensor monomial(const Frame& frame, const std::array<int, 3>& powers);

struct LocalBasis {
    std::array<Mat3, 5> s;
    std::array<Mat3, 3> a;
};

LocalBasis local_basis(const Frame& frame);

// Q1 = s1 (n1^2 - I/3) + b1 (n2^2 - n3^2), same for Q2.
QPair biaxial_pair(double s1, double b1, double s2, double b2, const Frame& frame);

using FrameMap = std::function<QPair(const Frame&)>;
// Directional derivative of a frame map when the frame vectors move with velocities dn.
using FrameMapDerivative = std::function<QPair(const Frame&, const std::array<Vec3, 3>&)>;

// Exact: applies L_k n_i = eps^{ijk} n_j through df. k is 0-based.
QPair lie_derivative(int k, const FrameMapDerivative& df, const Frame& frame);
// Central difference over rotations about n_k by +-h.
QPair lie_derivative_fd(int k, const FrameMap& f, const Frame& frame, double h = 1e-5);

// Derivative of biaxial_pair for use with lie_derivative.
FrameMapDerivative biaxial_pair_derivative(double s1, double b1, double s2, double b2);

// Min eigenvalues of Q1 + I/3, Q2 + I/3, I/3 - Q1 - Q2.
std::array<double, 3> domain_margins(const QPair& q);
bool domain_membership(const QPair& q, double delta);

// 5x5 orthogonal representation of R on symmetric traceless coordinates: c(R M R^T) = D c(M).
Mat5 rotation_rep(const Mat3& r);
QPair rotate(const QPair& q, const Mat3& r);
// diag(D(R), D(R)) on (Q1, Q2) coordinates.
Mat10 block_rotation(const Mat3& r);

class Tensor4Op {
public:
    Tensor4Op() : a_(Mat9::Zero()) {}
    explicit Tensor4Op(const Mat9& a) : a_(a) {}
    // Embeds a map on symmetric traceless coordinates: P m P^T.
    static Tensor4Op from_sym5(const Mat5& m);

    const Mat9& matrix() const { return a_; }
    Mat5 sym5() const;
    Tensor4Op transpose() const { return Tensor4Op(a_.transpose()); }
    Mat3 apply(const Mat3& x) const;
    // Conjugation by rotation on both index pairs.
    Tensor4Op rotated(const Mat3& r) const;

private:
    Mat9 a_;
};

Vec9 flatten(const Mat3& m);
Mat3 unflatten(const Vec9& v);
// Kronecker R (x) R acting on row-major flattenings.
Mat9 kron_rotation(const Mat3& r);

}  // namespace qt
