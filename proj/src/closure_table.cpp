#include "qt/closure_table.hpp"

#include "qt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace qt {

namespace {

class DirectProvider : public ClosureProvider {
public:
    DirectProvider(ClosureRoute route, const PhysicalParams& params, const QuadratureRule& rule, int threads)
        : route_(route), params_(params), rule_(rule), threads_(threads) {}

    void evaluate(const std::vector<QPair>& q, std::vector<KineticOperators>& out) override {
        const std::size_t n = q.size();
        out.resize(n);
        if (warm_h_.size() != n) {
            warm_h_.assign(n, std::nullopt);
            warm_b_.assign(n, std::nullopt);
        }
        parallel_for(n, threads_, [&](std::size_t i) {
            ClosureTensors ct;
            if (route_ == ClosureRoute::Quasi) {
                QuasiOptions opt;
                opt.e1 = params_.e1;
                QuasiResult r = closure_quasi(q[i], opt, warm_h_[i]);
                warm_h_[i] = r.h;
                ct = r.tensors;
            } else {
                const ConjugatePair b = solve_conjugate(q[i], rule_, {}, warm_b_[i]);
                warm_b_[i] = b;
                ct = closure_from_moments(moments_from_density(b, rule_), params_.e1);
            }
            out[i] = assemble_operators(ct, params_);
        });
    }

private:
    ClosureRoute route_;
    PhysicalParams params_;
    const QuadratureRule& rule_;
    int threads_;
    std::vector<std::optional<Eigen::VectorXd>> warm_h_;
    std::vector<std::optional<ConjugatePair>> warm_b_;
};

}  // namespace

std::unique_ptr<ClosureProvider> make_direct_provider(ClosureRoute route, const PhysicalParams& params,
                                                      const QuadratureRule& rule, int threads) {
    return std::make_unique<DirectProvider>(route, params, rule, threads);
}

Mat3 joint_diagonalize(const Mat3& a, const Mat3& b) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(a + 0.7548776662466927 * b);
    Mat3 r = es.eigenvectors();
    if (r.determinant() < 0) r.col(2) *= -1.0;
    Mat3 m[2] = {r.transpose() * a * r, r.transpose() * b * r};
    const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int sweep = 0; sweep < 100; ++sweep) {
        double largest = 0.0;
        for (const auto& pq : pairs) {
            const int p = pq[0], q = pq[1];
            // Off-diagonal entry after rotating by theta: alpha cos(2 theta) + beta sin(2 theta).
            Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
            for (const Mat3& x : m) {
                const Eigen::Vector2d ab(x(p, q), 0.5 * (x(q, q) - x(p, p)));
                g += ab * ab.transpose();
            }
            if (g.trace() < 1e-300) continue;
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> gs(g);
            Eigen::Vector2d v = gs.eigenvectors().col(0);
            if (v(0) < 0) v = -v;
            const double theta = 0.5 * std::atan2(v(1), v(0));
            largest = std::max(largest, std::abs(theta));
            const double c = std::cos(theta), s = std::sin(theta);
            Mat3 j = Mat3::Identity();
            j(p, p) = c;
            j(q, q) = c;
            j(p, q) = -s;
            j(q, p) = s;
            r = r * j;
            for (Mat3& x : m) x = j.transpose() * x * j;
        }
        if (largest < 1e-15) break;
    }
    return r;
}

FrameSplit split_frame(const QPair& q, const std::array<double, 4>& ref) {
    const Mat3 a = q.m1(), b = q.m2();
    const Mat3 r0 = joint_diagonalize(a, b);
    const Mat3 ta = r0.transpose() * a * r0, tb = r0.transpose() * b * r0;
    int perm[3] = {0, 1, 2};
    double best = std::numeric_limits<double>::infinity();
    FrameSplit out;
    do {
        const std::array<double, 4> sb = {1.5 * ta(perm[0], perm[0]), 0.5 * (ta(perm[1], perm[1]) - ta(perm[2], perm[2])),
                                          1.5 * tb(perm[0], perm[0]), 0.5 * (tb(perm[1], perm[1]) - tb(perm[2], perm[2]))};
        double d = 0.0;
        for (int i = 0; i < 4; ++i) d += (sb[i] - ref[i]) * (sb[i] - ref[i]);
        if (d < best - 1e-15) {
            best = d;
            out.sb = sb;
            for (int c = 0; c < 3; ++c) out.frame.col(c) = r0.col(perm[c]);
        }
    } while (std::next_permutation(perm, perm + 3));
    if (out.frame.determinant() < 0) out.frame.col(2) *= -1.0;
    const Vec5 c1 = coords_of(out.frame.transpose() * a * out.frame);
    const Vec5 c2 = coords_of(out.frame.transpose() * b * out.frame);
    for (int i = 0; i < 3; ++i) {
        out.off[i] = c1(2 + i);
        out.off[3 + i] = c2(2 + i);
    }
    return out;
}

ClosureTable::ClosureTable(ClosureRoute route, const PhysicalParams& params, const QuadratureRule& rule,
                           double spacing, const std::array<double, 4>& origin, int threads)
    : route_(route), params_(params), rule_(rule), spacing_(spacing), origin_(origin), threads_(threads) {
    if (!(spacing > 0)) throw std::invalid_argument("closure table spacing must be positive");
}

ClosureTable::OpVec ClosureTable::direct(const QPair& q, const std::optional<Eigen::VectorXd>& warm,
                                         Eigen::VectorXd* h_out) const {
    ClosureTensors ct;
    if (route_ == ClosureRoute::Quasi) {
        QuasiOptions opt;
        opt.e1 = params_.e1;
        opt.tol = 1e-11;
        QuasiResult r = closure_quasi(q, opt, warm);
        if (h_out) *h_out = r.h;
        ct = r.tensors;
    } else {
        ConjugateOptions co;
        co.tol = 1e-13;
        ct = closure_from_moments(moments_from_density(solve_conjugate(q, rule_, co), rule_), params_.e1);
    }
    const KineticOperators k = assemble_operators(ct, params_);
    OpVec v;
    v.segment<100>(0) = Eigen::Map<const Eigen::Matrix<double, 100, 1>>(k.m.data());
    v.segment<90>(100) = Eigen::Map<const Eigen::Matrix<double, 90, 1>>(k.v.data());
    v.segment<81>(190) = Eigen::Map<const Eigen::Matrix<double, 81, 1>>(k.p.data());
    return v;
}

ClosureTable::Entry ClosureTable::compute(const Key& k) const {
    double sb[4];
    for (int i = 0; i < 4; ++i) sb[i] = origin_[i] + spacing_ * k[i];
    const QPair qc = biaxial_pair(sb[0], sb[1], sb[2], sb[3], Frame());
    Entry e;
    Eigen::VectorXd h;
    e.value = direct(qc, std::nullopt, &h);
    const std::optional<Eigen::VectorXd> warm = route_ == ClosureRoute::Quasi ? std::optional(h) : std::nullopt;
    const double delta = 1e-4;
    for (int d = 0; d < 6; ++d) {
        QPair dq;
        if (d < 3) dq.q1(2 + d) = delta;
        else dq.q2(2 + d - 3) = delta;
        e.d_off[d] = (direct(qc + dq, warm, nullptr) - direct(qc - dq, warm, nullptr)) / (2.0 * delta);
    }
    return e;
}

const ClosureTable::Entry& ClosureTable::entry(const Key& k) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = points_.find(k);
    if (it == points_.end()) it = points_.emplace(k, compute(k)).first;
    return it->second;
}

KineticOperators ClosureTable::evaluate_one(const QPair& q) {
    std::vector<KineticOperators> out;
    evaluate({q}, out);
    return out[0];
}

void ClosureTable::evaluate(const std::vector<QPair>& q, std::vector<KineticOperators>& out) {
    const std::size_t n = q.size();
    out.resize(n);
    std::vector<FrameSplit> splits(n);
    parallel_for(n, threads_, [&](std::size_t i) { splits[i] = split_frame(q[i], origin_); });

    std::vector<Key> base(n);
    std::set<Key> needed;
    for (std::size_t i = 0; i < n; ++i) {
        for (int d = 0; d < 4; ++d) base[i][d] = static_cast<int>(std::floor((splits[i].sb[d] - origin_[d]) / spacing_));
        for (int c = 0; c < 16; ++c) {
            Key k = base[i];
            for (int d = 0; d < 4; ++d) k[d] += (c >> d) & 1;
            if (!points_.count(k)) needed.insert(k);
        }
    }
    const std::vector<Key> todo(needed.begin(), needed.end());
    std::vector<Entry> fresh(todo.size());
    parallel_for(todo.size(), threads_, [&](std::size_t i) { fresh[i] = compute(todo[i]); });
    for (std::size_t i = 0; i < todo.size(); ++i) points_.emplace(todo[i], std::move(fresh[i]));

    parallel_for(n, threads_, [&](std::size_t i) {
        const FrameSplit& s = splits[i];
        double t[4];
        for (int d = 0; d < 4; ++d) t[d] = (s.sb[d] - origin_[d]) / spacing_ - base[i][d];
        OpVec acc = OpVec::Zero();
        for (int c = 0; c < 16; ++c) {
            Key k = base[i];
            double w = 1.0;
            for (int d = 0; d < 4; ++d) {
                const int bit = (c >> d) & 1;
                k[d] += bit;
                w *= bit ? t[d] : 1.0 - t[d];
            }
            const Entry& e = points_.at(k);
            OpVec local = e.value;
            for (int d = 0; d < 6; ++d) local += s.off[d] * e.d_off[d];
            acc += w * local;
        }
        const Mat10 m = Eigen::Map<const Mat10>(acc.data());
        const Eigen::Matrix<double, 10, 9> v = Eigen::Map<const Eigen::Matrix<double, 10, 9>>(acc.data() + 100);
        const Mat9 p = Eigen::Map<const Mat9>(acc.data() + 190);
        const Mat10 d = block_rotation(s.frame);
        const Mat9 kr = kron_rotation(s.frame);
        KineticOperators& o = out[i];
        o.m = d * m * d.transpose();
        o.m = 0.5 * (o.m + o.m.transpose()).eval();
        o.v = d * v * kr.transpose();
        o.n = o.v.transpose();
        o.p = kr * p * kr.transpose();
        o.p = 0.5 * (o.p + o.p.transpose()).eval();
    });
}

double compare_providers(ClosureProvider& a, ClosureProvider& b, const std::vector<QPair>& samples) {
    std::vector<KineticOperators> ka, kb;
    a.evaluate(samples, ka);
    b.evaluate(samples, kb);
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double num = std::sqrt((ka[i].m - kb[i].m).squaredNorm() + (ka[i].v - kb[i].v).squaredNorm() +
                                     (ka[i].p - kb[i].p).squaredNorm());
        const double den = std::sqrt(kb[i].m.squaredNorm() + kb[i].v.squaredNorm() + kb[i].p.squaredNorm());
        worst = std::max(worst, num / den);
    }
    return worst;
}

}  // namespace qt
