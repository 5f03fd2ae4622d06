#include "common.hpp"

#include <doctest.h>

using namespace qt;
using namespace qt::test;

namespace {

BulkCoefficients uniaxial_coefficients() {
    BulkCoefficients c = appendix_coefficients();
    c.c03 = c.c04 = 0.0;
    return c;
}

const HessianSpectrum& appendix_spectrum() {
    static const HessianSpectrum s = hessian_spectrum(appendix_minimizer().form, appendix_coefficients(), rule());
    return s;
}

}  // namespace

TEST_SUITE("equilibrium") {

TEST_CASE("bulk energy at the symmetric point") {
    BulkCoefficients c = appendix_coefficients();
    CHECK(std::abs(bulk_energy(QPair(), c, rule()) - 9.0 * c.kind.nu * std::log(3.0)) < 1e-13);
    CHECK(bulk_gradient(QPair(), c, rule()).norm() < 1e-13);
    CHECK(appendix_minimizer().energy < bulk_energy(QPair(), c, rule()));
}

TEST_CASE("bulk gradient and Hessian against finite differences") {
    Rng rng(4);
    for (EntropyKind kind : {EntropyKind::quasi(5.0 / 9.0), EntropyKind::original()}) {
        BulkCoefficients c = appendix_coefficients();
        c.kind = kind;
        const QPair q = random_interior(rng, 0.08);
        Vec10 fd;
        for (int i = 0; i < 10; ++i) {
            Vec10 e = Vec10::Zero();
            e(i) = 1e-5;
            fd(i) = (bulk_energy(QPair::from_vec(q.vec() + e), c, rule()) -
                     bulk_energy(QPair::from_vec(q.vec() - e), c, rule())) / 2e-5;
        }
        const Vec10 g = bulk_gradient(q, c, rule()).vec();
        CHECK((g - fd).norm() < 1e-6 * std::max(1.0, g.norm()));

        const Mat10 h = bulk_hessian(q, c, rule());
        CHECK((h - h.transpose()).norm() < 1e-10);
        const Vec10 d = random_vec10(rng).normalized();
        auto err = [&](double s) {
            const Vec10 dg = (bulk_gradient(QPair::from_vec(q.vec() + s * d), c, rule()).vec() -
                              bulk_gradient(QPair::from_vec(q.vec() - s * d), c, rule()).vec()) / (2 * s);
            return (dg - h * d).norm();
        };
        const double e4 = err(1e-3), e5 = err(1e-4);
        CHECK(e5 < 1e-5 * h.norm());
        CHECK(e4 / e5 > 30.0);
    }
}

TEST_CASE("bulk energy is rotation invariant and its gradient equivariant") {
    Rng rng(5);
    const BulkCoefficients c = appendix_coefficients();
    for (int t = 0; t < 10; ++t) {
        const QPair q = random_interior(rng);
        const Mat3 r = random_rotation(rng);
        CHECK(std::abs(bulk_energy(rotate(q, r), c, rule()) - bulk_energy(q, c, rule())) < 1e-12);
        CHECK((bulk_gradient(rotate(q, r), c, rule()).vec() - block_rotation(r) * bulk_gradient(q, c, rule()).vec())
                  .norm() < 1e-10);
    }
}

TEST_CASE("biaxial minimizer scalars") {
    const MinimizerResult& m = appendix_minimizer();
    CHECK(m.grad_norm < 1e-10);
    CHECK(std::abs(m.form.s1 - 0.6263) < 5e-3);
    CHECK(std::abs(m.form.s2 - (-0.2377)) < 5e-3);
    CHECK(std::abs(m.form.b2 - 0.2890) < 5e-3);
    // The stationary point has b1 > 0; see the acceptance report for the published sign.
    CHECK(std::abs(m.form.b1 - 0.052552371097518286) < 1e-8);
    CHECK(m.form.in_range());
    CHECK((m.q.m1() * m.q.m2() - m.q.m2() * m.q.m1()).norm() < 1e-8);
}

TEST_CASE("minimizer scalars do not depend on the random starts") {
    const MinimizerResult& a = appendix_minimizer();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const MinimizerResult b = find_minimizer(appendix_coefficients(), rule(), 8, seed);
        CHECK(std::abs(a.form.s1 - b.form.s1) < 1e-8);
        CHECK(std::abs(a.form.b1 - b.form.b1) < 1e-8);
        CHECK(std::abs(a.form.s2 - b.form.s2) < 1e-8);
        CHECK(std::abs(a.form.b2 - b.form.b2) < 1e-8);
    }
}

TEST_CASE("zero coefficients give the isotropic minimum") {
    const BulkCoefficients c{0.0, 0.0, 0.0, EntropyKind::quasi(5.0 / 9.0)};
    const MinimizerResult m = find_minimizer(c, rule(), 8, 0);
    CHECK(m.q.norm() < 1e-8);
    const Assumption1Report r = verify_assumption1(c, rule());
    CHECK(r.kernel_dim == 0);
    CHECK_FALSE(r.pass);
}

TEST_CASE("kernel of the Hessian at the biaxial minimizer") {
    const HessianSpectrum& s = appendix_spectrum();
    CHECK(s.kernel_dim == 3);
    CHECK(s.xi_angle < 1e-6);
    const double hn = s.hessian.norm();
    for (const QPair& x : s.xi) CHECK((s.hessian * x.vec()).norm() <= 1e-8 * hn * x.norm());
    CHECK(s.positive_values.size() == 7u);
    for (double l : s.positive_values) CHECK(l > 1.0);
    // Frozen from this implementation's orthonormal coordinates.
    CHECK(std::abs(s.smallest_positive() - 4.9058) < 1e-3);
}

TEST_CASE("uniaxial minimizer has a two-dimensional kernel") {
    const BulkCoefficients c = uniaxial_coefficients();
    const MinimizerResult m = find_minimizer(c, rule(), 8, 0);
    CHECK(std::abs(m.form.b1) < 1e-8);
    CHECK(std::abs(m.form.b2) < 1e-8);
    const HessianSpectrum s = hessian_spectrum(m.form, c, rule());
    CHECK(s.kernel_dim == 2);
}

TEST_CASE("hessian_spectrum rejects nonstationary points") {
    BiaxialForm f;
    f.s1 = 0.3;
    CHECK_THROWS_AS(hessian_spectrum(f, appendix_coefficients(), rule()), DomainError);
}

TEST_CASE("kernel projections") {
    const HessianSpectrum& s = appendix_spectrum();
    const QPair x = s.xi[0];
    CHECK((project_in(x, s) - x).norm() < 1e-12 * x.norm());
    CHECK(project_out(x, s).norm() < 1e-12 * x.norm());

    Rng rng(8);
    const Mat10& h = s.hessian;
    Eigen::LDLT<Mat10> fact;
    for (int t = 0; t < 10; ++t) {
        const QPair q = QPair::from_vec(random_vec10(rng));
        CHECK((project_in(q, s) + project_out(q, s) - q).norm() < 1e-12);
        CHECK((h * project_in(q, s).vec()).norm() < 1e-8 * h.norm() * q.norm());

        // Solve on the positive subspace: e_j^T (H y) = e_j^T (H q_out).
        const QPair out = project_out(q, s);
        const Vec10 rhs = h * out.vec();
        Eigen::MatrixXd e(10, s.positive_basis.size());
        for (std::size_t j = 0; j < s.positive_basis.size(); ++j) e.col(j) = s.positive_basis[j];
        const Eigen::VectorXd y = (e.transpose() * h * e).ldlt().solve(e.transpose() * rhs);
        CHECK((e * y - out.vec()).norm() < 1e-8 * std::max(1.0, q.norm()));

        // H maps into the complement of the kernel and is coercive there.
        const QPair hq = QPair::from_vec(h * q.vec());
        CHECK(project_in(hq, s).norm() <= 1e-8 * hq.norm());
        CHECK(out.vec().dot(h * out.vec()) >= (1 - 1e-10) * s.smallest_positive() * out.dot(out));
    }
}

TEST_CASE("assumption check passes under small coefficient changes") {
    const Assumption1Report base = verify_assumption1(appendix_coefficients(), rule());
    CHECK(base.pass);
    CHECK(base.kernel_dim == 3);
    for (double f : {0.99, 1.01}) {
        BulkCoefficients c = appendix_coefficients();
        c.c02 *= f;
        c.c03 *= 2.0 - f;
        c.c04 *= f;
        CHECK(verify_assumption1(c, rule()).pass);
    }
}

TEST_CASE("canonical form reports b2 >= 0") {
    Rng rng(9);
    const QPair q = biaxial_pair(0.5, 0.05, -0.2, -0.25, Frame(random_rotation(rng)));
    const BiaxialForm f = canonical_biaxial(q);
    CHECK(f.b2 >= 0.0);
    CHECK((f.q() - q).norm() < 1e-10);
}

}  // TEST_SUITE
