#pragma once

#include "qt/closure.hpp"
#include "qt/closure_table.hpp"
#include "qt/equilibrium.hpp"
#include "qt/spectral.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace qt {

struct ElasticCoefficients {
    double c22 = 0.1, c23 = 0.1, c24 = 0.05;
    double c28 = 0.05, c29 = 0.05, c210 = 0.02;

    // Throws std::invalid_argument naming the violated positivity condition.
    void validate() const;
    Eigen::Matrix2d d1() const {
        Eigen::Matrix2d d;
        d << c22, c24, c24, c23;
        return d;
    }
    Eigen::Matrix2d d2() const {
        Eigen::Matrix2d d;
        d << c28, c210, c210, c29;
        return d;
    }
};

enum class Integrator { ExplicitRK4, Imex };
enum class ClosureMode { Direct, Table };

struct InitialCondition {
    std::string kind = "frame_wave";  // frame_wave | uniform
    double frame_amplitude = 0.3;     // rotation angle amplitude (rad)
    int mode_x = 1, mode_y = 1;
    double perturbation = 0.0;        // amplitude of a smooth off-manifold perturbation
    double velocity_amplitude = 0.0;  // amplitude of a divergence-free shear mode
    bool well_prepared = false;       // add eps * Q1_perp
};

struct SimConfig {
    double epsilon = 0.1;
    Grid grid{64, 64, 25.132741228718345, 25.132741228718345};
    double dt = 0.0;  // 0 selects 0.1 * epsilon
    double t_end = 1.0;
    PhysicalParams params;
    BulkCoefficients bulk{-35.0 * 5.0 / 9.0, -20.0 * 5.0 / 9.0, -20.0 * 5.0 / 9.0, EntropyKind::quasi(5.0 / 9.0)};
    ElasticCoefficients elastic;
    ClosureRoute closure_route = ClosureRoute::Quasi;
    Integrator integrator = Integrator::ExplicitRK4;
    ClosureMode closure_mode = ClosureMode::Direct;
    double table_spacing = 0.02;
    bool validate_table = true;
    double delta = 1e-3;
    double energy_tol = 1e-8;  // relative energy increase that rejects a step
    int quad_beta = 24, quad_torus = 24;
    int threads = 1;
    std::uint64_t seed = 0;
    int output_every = 1;
    int snapshot_every = 0;
    InitialCondition init;

    double time_step() const { return dt > 0 ? dt : 0.1 * epsilon; }
    void validate() const;
};

struct FieldState {
    Grid grid;
    double time = 0.0;
    std::vector<QPair> q;
    std::vector<Vec3> v;
};

struct EnergyReport {
    double time = 0.0;
    double kinetic = 0.0, bulk = 0.0, elastic = 0.0, total = 0.0;
    double diss_mu = 0.0, diss_visc = 0.0, diss_p = 0.0;
};

// -D1 Lap Q - D2 S(d_j d_i Q_ik) with spectral derivatives.
std::vector<QPair> elastic_force(const Spectral& sp, const std::vector<QPair>& q, const ElasticCoefficients& ec);
std::vector<QPair> elastic_force(const Grid& g, const std::vector<QPair>& q, const ElasticCoefficients& ec);

class PdeSolver {
public:
    PdeSolver(const SimConfig& cfg, const QuadratureRule& rule, std::unique_ptr<ClosureProvider> provider = nullptr);

    struct StepInfo {
        double dt_used = 0.0;
        int halvings = 0;
        double dissipation = 0.0;  // time integral of all dissipation terms over the step
    };

    // Advances by cfg.time_step(); rejected attempts are retried with halved sub-steps.
    FieldState step(const FieldState& s, StepInfo* info = nullptr);
    EnergyReport energy(const FieldState& s);
    // Energy terms without the closure-dependent dissipation.
    EnergyReport free_energy(const FieldState& s) const;

    // eps^{-1} J(Q) + G(Q); throws DomainError naming the first node outside the domain.
    std::vector<QPair> chemical_potential(const std::vector<QPair>& q) const;
    std::vector<Mat3> velocity_gradient(const std::vector<Vec3>& v) const;
    // Material-frame time derivatives at a state.
    void time_derivative(const FieldState& s, std::vector<QPair>& dq, std::vector<Vec3>& dv);
    // Leray projection of a velocity field.
    std::vector<Vec3> project_divergence_free(const std::vector<Vec3>& v) const;
    double divergence_norm(const std::vector<Vec3>& v) const;

    const Spectral& spectral() const { return *sp_; }
    const SimConfig& config() const { return cfg_; }
    ClosureProvider& provider() { return *provider_; }

private:
    struct Deriv {
        std::vector<Vec10> dq;
        std::vector<Vec3> dv;
        double diss_mu = 0.0, diss_visc = 0.0, diss_p = 0.0;
    };
    void rhs(const std::vector<Vec10>& q, const std::vector<Vec3>& v, Deriv& out);
    void check_domain(const std::vector<Vec10>& q) const;
    FieldState rk4(const FieldState& s, double dt, double& diss);
    FieldState imex(const FieldState& s, double dt, double& diss);

    SimConfig cfg_;
    const QuadratureRule& rule_;
    std::unique_ptr<Spectral> sp_;
    std::unique_ptr<ClosureProvider> provider_;
    std::vector<KineticOperators> ops_;
    double imex_mbar_ = -1.0;
};

// Builds the provider named by cfg (direct, or table anchored at the bulk minimizer).
std::unique_ptr<ClosureProvider> make_provider(const SimConfig& cfg, const QuadratureRule& rule);

// One RK4 step of dQ/dt = -M_Q eps^{-1} J(Q) with the closure re-evaluated per stage.
// Halves the step on domain exit up to 20 times; throws DomainError afterwards.
QPair step_homogeneous(const QPair& q, const SimConfig& cfg, double dt, const QuadratureRule& rule);

std::vector<QPair> chemical_potential(const FieldState& s, const SimConfig& cfg, const QuadratureRule& rule);
FieldState step_pde(const FieldState& s, const SimConfig& cfg, const QuadratureRule& rule);
EnergyReport energy_report(const FieldState& s, const SimConfig& cfg, const QuadratureRule& rule);

}  // namespace qt
