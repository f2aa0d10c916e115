#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwf/field.hpp"

namespace uwf {

enum class BoundaryMode { periodic, channel };

std::string to_string(BoundaryMode mode);
BoundaryMode boundary_mode_from_string(const std::string& s);

/// Solver parameters. JSON form carries exactly the keys
/// {reynolds, grashof, prandtl, smagorinsky_cs, dt, inflow_speed_ref,
///  inflow_exponent, boundary_mode, projection_iters, projection_tol, seed}.
struct FlowConfig {
    double reynolds = 1000.0;
    double grashof = 0.0;
    double prandtl = 0.71;
    double smagorinsky_cs = 0.17;
    double dt = 0.1;
    double inflow_speed_ref = 7.8;
    double inflow_exponent = 0.25;
    BoundaryMode boundary_mode = BoundaryMode::channel;
    int projection_iters = 2000;
    double projection_tol = 1e-3;
    std::uint64_t seed = 0;

    /// Throws ContractError naming the offending key. c_s outside
    /// [0.1, 0.24] is rejected unless allow_cs_override is set (the
    /// range check is the only one an override relaxes; c_s < 0 is
    /// always rejected).
    void validate(bool allow_cs_override = false) const;
};

FlowConfig flow_config_from_json(const nlohmann::json& j, bool allow_cs_override = false);
nlohmann::json flow_config_to_json(const FlowConfig& cfg);
FlowConfig load_flow_config(const std::string& path, bool allow_cs_override = false);

/// Instantaneous solver state; theta is the optional non-dimensional
/// temperature carried by the scalar-transport equation.
struct FlowState {
    VelocityField velocity;
    std::optional<ScalarField> theta;
    double time = 0.0;
};

/// Per-step report. Projection non-convergence is recorded here rather
/// than thrown; correlation is the Pearson coefficient between the
/// speed fields before and after the step (diagnostic only).
struct StepDiagnostics {
    int projection_iterations = 0;
    double projection_residual = 0.0;   ///< relative divergence after projection
    bool projection_converged = true;
    int diffusion_substeps = 1;
    bool diffusion_substep_capped = false;
    double correlation = 1.0;
};

/// Smagorinsky eddy viscosity nu_t = (cs*dx)^2 * |S| with
/// |S| = sqrt(2 S_ij S_ij); strain entries use central differences,
/// falling back to one-sided differences on the outermost cells.
ScalarField eddy_viscosity(const VelocityField& vel, double cs, double dx);

/// Backtracks each cell center by -vel*dt and samples the field there
/// with bilinear interpolation. Departure points wrap in periodic mode
/// and clamp to the domain in channel mode.
ScalarField semi_lagrangian_advect(const ScalarField& field, const VelocityField& vel,
                                   double dt, BoundaryMode mode);

/// Discrete divergence matching the projection operator: forward
/// differences, wrapping in periodic mode; in channel mode the missing
/// east/north neighbor contributes zero (zero-gradient ghost).
ScalarField divergence(const VelocityField& vel, BoundaryMode mode);

/// Pressure projection. Periodic mode solves the compact Poisson
/// problem spectrally (exact up to roundoff); channel mode runs SOR
/// sweeps until the relative divergence max-norm falls under
/// projection_tol or the iteration budget runs out (recorded in diag,
/// not fatal). Velocity inside the mask is re-zeroed afterwards.
VelocityField project_divergence_free(const VelocityField& vel, const BuildingMask& mask,
                                      const FlowConfig& cfg, StepDiagnostics* diag = nullptr);

/// One fractional step: advect, diffuse (1/Re + nu_t, substepped for
/// stability), buoyancy -(Gr/Re^2)*theta on v, boundaries, projection,
/// mask zeroing. Throws SimulationDiverged (carrying step_index) if a
/// non-finite value appears.
FlowState step(const FlowState& state, const BuildingMask& mask, const FlowConfig& cfg,
               StepDiagnostics* diag = nullptr, int step_index = -1);

/// Deterministic seeded start: power-law profile (channel) or uniform
/// inflow_speed_ref (periodic) plus 5% seeded perturbation, zero inside
/// the mask. A zero reference speed gives an exactly zero state.
FlowState initial_state(const BuildingMask& mask, const FlowConfig& cfg);

struct SimulationResult {
    FieldSeries magnitude;               ///< speed frames, every record_every steps
    std::vector<VelocityField> velocity; ///< same cadence as magnitude
    std::vector<StepDiagnostics> diagnostics; ///< one entry per step
};

/// Runs n_steps from initial_state, recording after every
/// record_every-th step. Deterministic given config (seed included).
SimulationResult run_simulation(const BuildingMask& mask, const FlowConfig& cfg,
                                int n_steps, int record_every);

} // namespace uwf
