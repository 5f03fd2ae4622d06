#pragma once

#include "qt/closure.hpp"

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace qt {

// Evaluates kinetic operators for every node of a field.
class ClosureProvider {
public:
    virtual ~ClosureProvider() = default;
    virtual void evaluate(const std::vector<QPair>& q, std::vector<KineticOperators>& out) = 0;
};

// Per-node closure with per-node warm starts.
std::unique_ptr<ClosureProvider> make_direct_provider(ClosureRoute route, const PhysicalParams& params,
                                                      const QuadratureRule& rule, int threads);

// Frame of a near-commuting pair minimizing the off-diagonal mass of R^T Q1 R and R^T Q2 R.
Mat3 joint_diagonalize(const Mat3& a, const Mat3& b);

// Splits q into a biaxial part in a frame plus the residual off-diagonal coordinates in that frame.
// The axis labelling is the permutation whose scalars lie closest to ref.
struct FrameSplit {
    Mat3 frame;
    std::array<double, 4> sb;   // s1, b1, s2, b2
    std::array<double, 6> off;  // frame coordinates 2..4 of Q1 then of Q2
};
FrameSplit split_frame(const QPair& q, const std::array<double, 4>& ref);

// Multilinear lattice over (s1, b1, s2, b2) in the identity frame with first-order
// corrections in the six off-diagonal directions; rotated to the node frame.
class ClosureTable : public ClosureProvider {
public:
    ClosureTable(ClosureRoute route, const PhysicalParams& params, const QuadratureRule& rule, double spacing,
                 const std::array<double, 4>& origin, int threads);

    void evaluate(const std::vector<QPair>& q, std::vector<KineticOperators>& out) override;
    KineticOperators evaluate_one(const QPair& q);
    std::size_t lattice_points() const { return points_.size(); }

private:
    static constexpr int kOps = 271;  // M (100), V (90), P (81); N is V^T
    using OpVec = Eigen::Matrix<double, kOps, 1>;
    struct Entry {
        OpVec value;
        std::array<OpVec, 6> d_off;
    };
    using Key = std::array<int, 4>;

    const Entry& entry(const Key& k);
    Entry compute(const Key& k) const;
    OpVec direct(const QPair& q, const std::optional<Eigen::VectorXd>& warm, Eigen::VectorXd* h_out) const;

    ClosureRoute route_;
    PhysicalParams params_;
    const QuadratureRule& rule_;
    double spacing_;
    std::array<double, 4> origin_;
    int threads_;
    std::map<Key, Entry> points_;
    std::mutex mutex_;
};

// Largest relative Frobenius difference of (M, V, P) over the samples.
double compare_providers(ClosureProvider& a, ClosureProvider& b, const std::vector<QPair>& samples);

}  // namespace qt
