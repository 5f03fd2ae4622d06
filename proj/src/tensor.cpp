#include "qt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qt {

namespace {

Mat3 sym_unit(int i, int j) {
    Mat3 m = Mat3::Zero();
    m(i, j) = m(j, i) = 1.0 / std::sqrt(2.0);
    return m;
}

Mat3 sym_outer(const Vec3& a, const Vec3& b) {
    return 0.5 * (a * b.transpose() + b * a.transpose());
}

}  // namespace

const std::array<Mat3, 5>& sym_basis() {
    static const std::array<Mat3, 5> b = [] {
        std::array<Mat3, 5> e;
        e[0] = Vec3(2, -1, -1).asDiagonal();
        e[0] /= std::sqrt(6.0);
        e[1] = Vec3(0, 1, -1).asDiagonal();
        e[1] /= std::sqrt(2.0);
        e[2] = sym_unit(0, 1);
        e[3] = sym_unit(0, 2);
        e[4] = sym_unit(1, 2);
        return e;
    }();
    return b;
}

const Mat95& basis_embedding() {
    static const Mat95 p = [] {
        Mat95 m;
        for (int a = 0; a < 5; ++a) m.col(a) = flatten(sym_basis()[a]);
        return m;
    }();
    return p;
}

Vec9 flatten(const Mat3& m) {
    Vec9 v;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) v(3 * i + j) = m(i, j);
    return v;
}

Mat3 unflatten(const Vec9& v) {
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = v(3 * i + j);
    return m;
}

Mat9 kron_rotation(const Mat3& r) {
    Mat9 k;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int p = 0; p < 3; ++p)
                for (int q = 0; q < 3; ++q) k(3 * i + j, 3 * p + q) = r(i, p) * r(j, q);
    return k;
}

Vec5 coords_of(const Mat3& m) {
    const Mat3 s = sym_traceless_project(m);
    Vec5 c;
    for (int a = 0; a < 5; ++a) c(a) = (sym_basis()[a].array() * s.array()).sum();
    return c;
}

Mat3 matrix_of(const Vec5& c) {
    Mat3 m = Mat3::Zero();
    for (int a = 0; a < 5; ++a) m += c(a) * sym_basis()[a];
    return m;
}

Mat3 sym_traceless_project(const Mat3& m) {
    Mat3 s = 0.5 * (m + m.transpose());
    s.diagonal().array() -= m.trace() / 3.0;
    return s;
}

SymTraceless2 SymTraceless2::from_matrix(const Mat3& m) { return SymTraceless2(coords_of(m)); }

Mat3 SymTraceless2::matrix() const { return matrix_of(coords); }

Vec10 QPair::vec() const {
    Vec10 v;
    v << q1, q2;
    return v;
}

Frame::Frame(const Mat3& r) : r_(r) {
    const double orth = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-12 || std::abs(r.determinant() - 1.0) > 1e-12)
        throw std::invalid_argument("frame is not a proper rotation");
}

Frame Frame::orthonormalize(const Mat3& r) {
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0) u.col(2) *= -1.0;
    Frame f;
    f.r_ = u * v.transpose();
    return f;
}

Frame Frame::from_euler_zyz(double alpha, double beta, double gamma) {
    const Mat3 r = (Eigen::AngleAxisd(alpha, Vec3::UnitZ()) * Eigen::AngleAxisd(beta, Vec3::UnitY()) *
                    Eigen::AngleAxisd(gamma, Vec3::UnitZ()))
                       .toRotationMatrix();
    return orthonormalize(r);
}

Frame Frame::from_axis_angle(const Vec3& axis, double angle) {
    return orthonormalize(Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix());
}

double SymTensor::at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != order) throw std::invalid_argument("index rank mismatch");
    std::size_t flat = 0;
    for (int i : idx) flat = 3 * flat + static_cast<std::size_t>(i);
    return data[flat];
}

Mat3 SymTensor::as_matrix() const {
    if (order != 2) throw std::invalid_argument("as_matrix needs an order-2 tensor");
    Mat3 m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = data[i];
    return m;
}

SymTensor monomial(const Frame& frame, const std::array<int, 3>& powers) {
    for (int p : powers)
        if (p < 0) throw std::invalid_argument("negative monomial power");
    const int order = powers[0] + powers[1] + powers[2];
    if (order > 4) throw std::invalid_argument("monomial order above 4");

    std::vector<Vec3> factors;
    for (int a = 0; a < 3; ++a)
        for (int k = 0; k < powers[a]; ++k) factors.push_back(frame.n(a));

    SymTensor t;
    t.order = order;
    std::size_t size = 1;
    for (int k = 0; k < order; ++k) size *= 3;
    t.data.assign(size, 0.0);
    if (order == 0) {
        t.data[0] = 1.0;
        return t;
    }

    std::vector<int> perm(order);
    std::iota(perm.begin(), perm.end(), 0);
    int nperm = 0;
    do {
        ++nperm;
        for (std::size_t flat = 0; flat < size; ++flat) {
            std::size_t rem = flat;
            double prod = 1.0;
            for (int k = order - 1; k >= 0; --k) {
                prod *= factors[perm[k]](static_cast<int>(rem % 3));
                rem /= 3;
            }
            t.data[flat] += prod;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (double& v : t.data) v /= nperm;
    return t;
}

LocalBasis local_basis(const Frame& frame) {
    const Vec3 n1 = frame.n(0), n2 = frame.n(1), n3 = frame.n(2);
    LocalBasis lb;
    lb.s[0] = n1 * n1.transpose() - Mat3::Identity() / 3.0;
    lb.s[1] = n2 * n2.transpose() - n3 * n3.transpose();
    lb.s[2] = sym_outer(n1, n2);
    lb.s[3] = sym_outer(n1, n3);
    lb.s[4] = sym_outer(n2, n3);
    lb.a[0] = n1 * n2.transpose() - n2 * n1.transpose();
    lb.a[1] = n1 * n3.transpose() - n3 * n1.transpose();
    lb.a[2] = n2 * n3.transpose() - n3 * n2.transpose();
    return lb;
}

QPair biaxial_pair(double s1, double b1, double s2, double b2, const Frame& frame) {
    const LocalBasis lb = local_basis(frame);
    return QPair::from_matrices(s1 * lb.s[0] + b1 * lb.s[1], s2 * lb.s[0] + b2 * lb.s[1]);
}

FrameMapDerivative biaxial_pair_derivative(double s1, double b1, double s2, double b2) {
    return [=](const Frame& f, const std::array<Vec3, 3>& dn) {
        const Vec3 n1 = f.n(0), n2 = f.n(1), n3 = f.n(2);
        const Mat3 d1 = 2.0 * sym_outer(n1, dn[0]);
        const Mat3 d23 = 2.0 * sym_outer(n2, dn[1]) - 2.0 * sym_outer(n3, dn[2]);
        return QPair::from_matrices(s1 * d1 + b1 * d23, s2 * d1 + b2 * d23);
    };
}

QPair lie_derivative(int k, const FrameMapDerivative& df, const Frame& frame) {
    if (k < 0 || k > 2) throw std::invalid_argument("axis index out of range");
    std::array<Vec3, 3> dn;
    for (int i = 0; i < 3; ++i) {
        dn[i] = Vec3::Zero();
        for (int j = 0; j < 3; ++j) {
            // eps^{ijk}
            const int e = (i == j || j == k || i == k) ? 0 : (((j - i + 3) % 3 == 1) ? 1 : -1);
            if (e != 0) dn[i] += e * frame.n(j);
        }
    }
    return df(frame, dn);
}

QPair lie_derivative_fd(int k, const FrameMap& f, const Frame& frame, double h) {
    if (k < 0 || k > 2) throw std::invalid_argument("axis index out of range");
    const Vec3 axis = frame.n(k);
    const Mat3 rp = Eigen::AngleAxisd(h, axis).toRotationMatrix();
    const Mat3 rm = Eigen::AngleAxisd(-h, axis).toRotationMatrix();
    const QPair fp = f(Frame::orthonormalize(rp * frame.matrix()));
    const QPair fm = f(Frame::orthonormalize(rm * frame.matrix()));
    for (const QPair* q : {&fp, &fm})
        if (!q->vec().allFinite()) throw std::domain_error("frame map not evaluable near frame");
    return (fp - fm) * (0.5 / h);
}

std::array<double, 3> domain_margins(const QPair& q) {
    const Mat3 a = q.m1(), b = q.m2();
    const Mat3 third = Mat3::Identity() / 3.0;
    const Mat3 mats[3] = {a + third, b + third, third - a - b};
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) out[i] = Eigen::SelfAdjointEigenSolver<Mat3>(mats[i], Eigen::EigenvaluesOnly).eigenvalues()(0);
    return out;
}

bool domain_membership(const QPair& q, double delta) {
    if (delta < 0) throw std::invalid_argument("delta must be nonnegative");
    for (double m : domain_margins(q))
        if (!(m >= delta)) return false;
    return true;
}

Mat5 rotation_rep(const Mat3& r) {
    Mat5 d;
    const auto& e = sym_basis();
    for (int b = 0; b < 5; ++b) {
        const Mat3 rb = r * e[b] * r.transpose();
        for (int a = 0; a < 5; ++a) d(a, b) = (e[a].array() * rb.array()).sum();
    }
    return d;
}

QPair rotate(const QPair& q, const Mat3& r) {
    const Mat5 d = rotation_rep(r);
    return {d * q.q1, d * q.q2};
}

Mat10 block_rotation(const Mat3& r) {
    const Mat5 d = rotation_rep(r);
    Mat10 out = Mat10::Zero();
    out.block<5, 5>(0, 0) = d;
    out.block<5, 5>(5, 5) = d;
    return out;
}

Tensor4Op Tensor4Op::from_sym5(const Mat5& m) {
    const Mat95& p = basis_embedding();
    return Tensor4Op(p * m * p.transpose());
}

Mat5 Tensor4Op::sym5() const {
    const Mat95& p = basis_embedding();
    return p.transpose() * a_ * p;
}

Mat3 Tensor4Op::apply(const Mat3& x) const { return unflatten(a_ * flatten(x)); }

Tensor4Op Tensor4Op::rotated(const Mat3& r) const {
    const Mat9 k = kron_rotation(r);
    return Tensor4Op(k * a_ * k.transpose());
}

}  // namespace qt
