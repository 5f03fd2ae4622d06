#pragma once

#include "qt/dynamics.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace qt {

// Quantities of the minimizer at the identity frame; a node with frame R uses the
// block rotation B(R) = diag(D(R), D(R)) applied to them.
struct LimitContext {
    BiaxialForm form;                 // identity frame
    QPair q0;                         // form.q()
    HessianSpectrum spectrum;
    Mat10 h_pinv;                     // pseudo-inverse on (Ker H)^perp
    Mat10 p_in;                       // orthogonal projector onto Ker H
    Eigen::Matrix<double, 10, 3> xi;  // analytic tangents as columns
};

LimitContext make_limit_context(const BulkCoefficients& c, const QuadratureRule& rule, std::uint64_t seed = 0);

struct ManifoldProjection {
    Frame frame;
    QPair q0;
    double distance = 0.0;
    bool converged = false;
};

// Nearest point of {B(R) q0} to q in the flat norm. The seed is the joint eigenframe of (q1, q2),
// relabelled by the signed axis permutation closest to q (or to `prefer` when given).
ManifoldProjection project_to_manifold(const QPair& q, const LimitContext& ctx,
                                       const std::optional<Mat3>& prefer = std::nullopt);

struct RemainderDiagnostics {
    double e_norm = 0.0;
    double f_norm = 0.0;
    double frak_e = 0.0;
    double pout_l2 = 0.0;
};

// Per-node leading-order data of a flow near the manifold.
struct LimitFields {
    std::vector<ManifoldProjection> proj;
    std::vector<QPair> q1_perp;
    std::array<std::vector<double>, 3> frame_residual;
    double max_in_fraction = 0.0;  // largest |P_in RHS| / |RHS| over nodes
};

// Leading-order evaluation at Q0 with a given partial time derivative dq0_dt of the projected field.
// The closure operators are taken from `ops` evaluated at the projected field.
LimitFields limit_fields(const std::vector<ManifoldProjection>& proj, const std::vector<QPair>& dq0_dt,
                         const std::vector<Vec3>& v, const std::vector<KineticOperators>& ops,
                         const LimitContext& ctx, const PdeSolver& solver);

// q1_perp and frame residuals at the middle of three consecutive states spaced by h.
LimitFields analyze_states(const FieldState& prev, const FieldState& cur, const FieldState& next, double h,
                           const LimitContext& ctx, PdeSolver& solver);

std::vector<QPair> q1_perp(const FieldState& prev, const FieldState& cur, const FieldState& next, double h,
                           const LimitContext& ctx, PdeSolver& solver);
std::array<std::vector<double>, 3> frame_residual(const FieldState& prev, const FieldState& cur,
                                                  const FieldState& next, double h, const LimitContext& ctx,
                                                  PdeSolver& solver);

// The remainder functional with H^eps = H + eps G at the projected field; operators in `ops`.
RemainderDiagnostics remainder_energy(const std::vector<QPair>& qr, const std::vector<Vec3>& vr,
                                      const std::vector<ManifoldProjection>& proj,
                                      const std::vector<KineticOperators>& ops, const LimitContext& ctx,
                                      const PdeSolver& solver);

// Manifold-valued frame modulation with a shear flow, corrected by eps * Q1_perp where the frame
// velocity solves the limiting frame equation pointwise.
FieldState well_prepared_state(const SimConfig& cfg, const LimitContext& ctx, PdeSolver& solver);
// Initial state per cfg.init (well-prepared or not).
FieldState initial_state(const SimConfig& cfg, const LimitContext& ctx, PdeSolver& solver);

struct SweepRun {
    double eps = 0.0;
    bool ok = false;
    std::string failure;
    double sup_dist = 0.0;        // sup_t max_x |Q - Q0|
    double sup_pout = 0.0;        // sup_t |P_out (Q - Q0)|_L2
    double pout_err = 0.0;        // sup_t |P_out (Q - Q0) / eps - Q1_perp|_L2 / |Q1_perp|_L2
    std::array<double, 3> frame_res_l2{};  // RMS over samples of the L2 norms
    double frak_e_sup = 0.0;
    double e_norm_sup = 0.0;
    double f_norm_sup = 0.0;
    double max_in_fraction = 0.0;
    int samples = 0;
};

struct SweepReport {
    std::vector<SweepRun> runs;
    double fit_order = 0.0;   // slope of log sup_dist against log eps
    double fit_r2 = 0.0;
    double pout_order = 0.0;  // slope of log pout_err against log eps
    double pout_r2 = 0.0;
};

struct SweepOptions {
    double sample_interval = 0.1;  // time between diagnostic samples
};

// Least-squares slope and R^2 of log y against log x.
std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

// Runs cfg for every eps (descending) from well-prepared data; a failed run is marked and skipped in fits.
SweepReport epsilon_sweep(const SimConfig& base, const std::vector<double>& eps, const QuadratureRule& rule,
                          const SweepOptions& opt = {});

}  // namespace qt
