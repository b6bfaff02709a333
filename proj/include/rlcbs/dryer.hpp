#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlcbs/environment.hpp"

namespace rlcbs {

// ─── Parameters ──────────────────────────────────────

struct IrParams {
    double surface_flux = 15000.0;      // W/m² at full view
    double view_factor = 0.6;           // constant within an emitter's zone
    double absorption_fiber = 1500.0;   // 1/m
    double absorption_water = 3000.0;   // 1/m
    std::vector<int> emitter_boundaries = {3, 6, 9};  // emitter sits after this many modules
};

/// Every constitutive constant of the drying model (SI units, temperatures in °C).
struct DryerParams {
    std::string version = "dryer-params-v1";
    int nodes = 24;
    double basis_weight = 0.2388;        // kg/m² dry fiber
    double fiber_density = 1500.0;
    double porosity = 0.72;
    double water_density = 1000.0;
    double water_cp = 4186.0;
    double fiber_cp = 1340.0;
    double vapor_cp = 1880.0;
    double latent_heat = 2257e3;         // J/kg
    double k_dry = 0.1;
    double k_wet = 0.45;
    double permeability_ref = 2e-15;     // K = K0 s³
    double water_kinematic_viscosity = 5e-7;
    double capillary_pressure_ref = 1e4; // P_ca = P0 s^-n (suction)
    double capillary_exponent = 0.5;
    double saturation_floor = 0.02;
    double vapor_diffusivity_air = 2.6e-5;
    double tortuosity = 0.1;
    double sorption_scale = 0.05;        // relative humidity φ(M) = 1 - exp(-M / scale)
    double vapor_fraction_cap = 0.8;
    double ambient_pressure = 101325.0;
    double ambient_vapor_density = 0.01; // kg/m³
    double air_cp = 1007.0;
    double lewis_number = 0.85;
    std::array<double, 4> h = {45.0, 60.0, 8.0, 8.0};  // W/m²K, PP SJR DEP SP
    double volumetric_flow_scfm = 500.0;
    double nozzle_area = 0.0233;
    bool dre_percent = true;             // polynomial value is a percentage
    double dre_min_dbmc = 0.1;
    double dre_max_dbmc = 1.5;
    double dryer_length = 6.34;
    int modules = 12;
    double dt = 2.5e-4;                  // s
    double boiling_point = 100.0;
    double bound_water_dbmc = 0.1;
    double v_min = 0.006604;
    double v_max = 0.06604;
    double failure_penalty = 1000.0;
    IrParams ir;

    [[nodiscard]] double dry_density() const { return fiber_density * (1.0 - porosity); }
    [[nodiscard]] double thickness() const { return basis_weight / dry_density(); }
    [[nodiscard]] double dz() const { return thickness() / nodes; }
    [[nodiscard]] double module_span() const { return dryer_length / modules; }
    /// Local DBMC to saturation.
    [[nodiscard]] double saturation(double dbmc) const {
        return dbmc * dry_density() / (water_density * porosity);
    }

    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
    /// Fields absent from the document keep their defaults; the version must match.
    [[nodiscard]] static DryerParams from_json(const nlohmann::json& doc);
};

[[nodiscard]] DryerParams load_dryer_params(const std::filesystem::path& path);
/// Path of the parameter file shipped with the sources.
[[nodiscard]] std::filesystem::path default_dryer_params_path();

// ─── Closed-form pieces ──────────────────────────────

[[nodiscard]] double sf_to_vm(double speed_factor, const DryerParams& p = {});

struct SqpRow {
    double speed_factor;
    double machine_speed;     // m/s
    double air_temp_norm;
    double air_flow_norm;
    double energy;            // kJ/m²
};
[[nodiscard]] const std::array<SqpRow, 11>& sqp_baseline_table();
/// Linear interpolation over the baseline table; throws std::out_of_range outside [0.25, 0.75].
[[nodiscard]] double q_sqp(double speed_factor);

/// Sparse episode reward: done -> q_SQP - q; truncated -> q_SQP - q - penalty; else 0.
[[nodiscard]] double dryer_reward(bool done, bool truncated, double q_total, double speed_factor,
                                  double penalty = 1000.0);

/// Raw sixth-order drying-rate-enhancement polynomial.
[[nodiscard]] double dre_polynomial(double dbmc);
/// Multiplicative enhancement: polynomial / 100 under the percent reading, clamped at 0,
/// with the DBMC clamped to the fit range (logged once).
[[nodiscard]] double dep_dre(double dbmc, const DryerParams& p = {});

/// Buck saturation pressure, Pa.
[[nodiscard]] double saturation_pressure(double temp_c);

// ─── Module boundary ─────────────────────────────────

struct ModuleBoundary {
    ModuleType type = ModuleType::PP;
    double h = 0.0;             // W/m²K
    double air_temp = 20.0;     // °C
    double air_velocity = 0.0;  // m/s, recorded for reference
    bool dep = false;
    bool hot_air = true;
    // Contact terms of the bottom boundary; the belt is treated as adiabatic so these stay unused.
    double contact_temp = 0.0;
    double contact_conductance = 0.0;
};

[[nodiscard]] ModuleBoundary module_boundary(ActionId action, const DryerParams& p);
[[nodiscard]] double air_density(double temp_c, const DryerParams& p);

// ─── Nodal state and discrete operators ──────────────

struct PaperState {
    std::vector<double> temp;  // °C, index 0 = bottom (belt side)
    std::vector<double> dbmc;  // local DBMC
    double position = 0.0;     // m along the dryer
    double time = 0.0;         // s
    double energy = 0.0;       // kJ/m²
    int module = 0;

    [[nodiscard]] double mean_dbmc() const;
    [[nodiscard]] double mean_temp() const;
    bool operator==(const PaperState&) const = default;
};

[[nodiscard]] PaperState initial_paper_state(const EpisodeConfig& config, const DryerParams& p);

/// Interior-interface fluxes, positive toward the top surface. Entry i is the face
/// between node i and node i+1 (nodes - 1 faces).
struct FaceFluxes {
    std::vector<double> heat;      // q'' = -k dT/dz
    std::vector<double> liquid;    // J_w = (K/ν) dP_ca/dz
    std::vector<double> vapor;     // J_v = -(D_ap MW/(1-y)) dC_v/dz, in kg/m²s
    std::vector<double> enthalpy;  // J_w H_w + J_v H_v, upwind
};
[[nodiscard]] FaceFluxes compute_fluxes(const PaperState& s, const DryerParams& p);

/// Top-surface exchange with the module's air.
struct BoundaryTerms {
    double vapor_out = 0.0;     // (1 + DRE) J_v,o, kg/m²s
    double enthalpy_out = 0.0;  // (1 + DRE) J_v,o H_v
    double convective = 0.0;    // h (T - T_a)
    double dre = 0.0;
};
[[nodiscard]] BoundaryTerms apply_boundaries(const PaperState& s, const ModuleBoundary& b, const DryerParams& p);

/// Downward IR flux at the nodes - 1 interior faces plus both surfaces (nodes + 1 values,
/// index 0 = bottom surface). Integral of the absorption coefficient by trapezoid.
[[nodiscard]] std::vector<double> ir_flux(const std::vector<double>& absorption, double dz, double surface_flux);
/// IR flux on the top surface at a position along the dryer (0 outside emitter zones).
[[nodiscard]] double ir_surface_flux(double position, const DryerParams& p);

struct StepBudget {
    double storage_change = 0.0;  // Σ ΔM ρ_dry dz, kg/m²
    double boundary_flux = 0.0;   // -(outbound vapor) dt, kg/m²
};

/// One explicit Euler step. Returns the discrete water budget of the step.
StepBudget integrate_step(PaperState& s, const ModuleBoundary& b, double ir_surface, const DryerParams& p,
                          double dt);

/// Eq-15 style increment in kJ/m².
[[nodiscard]] double energy_increment(const PaperState& before, const PaperState& after, const DryerParams& p);

/// Largest stable explicit step for the closures over the operating envelope.
[[nodiscard]] double stable_dt_limit(const DryerParams& p);

enum class PhysicsFault { none, boiling, saturation, bound_water, non_finite };
[[nodiscard]] PhysicsFault check_physics(const PaperState& s, const DryerParams& p);
[[nodiscard]] std::string to_string(PhysicsFault f);

// ─── Environment ─────────────────────────────────────

struct TraceRow {
    double time;
    double position;
    double temp_mean, temp_top, temp_bottom;
    double dbmc_mean, dbmc_top, dbmc_bottom;
    double dq;
};

using TraceSink = std::function<void(const TraceRow&)>;

struct DryerOptions {
    double dt = 0.0;               // 0 = params.dt
    TraceSink trace;               // optional
    double trace_interval = 0.5;   // s between trace rows
};

class DryerEnv final : public Environment {
public:
    explicit DryerEnv(std::shared_ptr<const DryerParams> params, DryerOptions options = {});

    Observation reset(const EpisodeConfig& config) override;
    StepResult step(ActionId action) override;
    [[nodiscard]] StepResult status() const override;

    [[nodiscard]] std::string get_state() const override;
    void set_state(std::string_view bytes) override;

    [[nodiscard]] int action_count() const override { return kActionCount; }
    [[nodiscard]] std::string action_label(ActionId a) const override { return rlcbs::action_label(a); }
    [[nodiscard]] nlohmann::json describe() const override;
    [[nodiscard]] std::unique_ptr<Environment> clone() const override;

    [[nodiscard]] const PaperState& paper() const { return paper_; }
    [[nodiscard]] const DryerParams& params() const { return *params_; }
    [[nodiscard]] double dt() const { return dt_; }
    [[nodiscard]] PhysicsFault fault() const { return fault_; }
    /// Worst relative discrete mass-budget mismatch seen since reset.
    [[nodiscard]] double max_mass_error() const { return max_mass_error_; }
    [[nodiscard]] double max_temp_seen() const { return max_temp_seen_; }

    /// Integrates one module span without any termination logic (used for fixed-length sweeps).
    void advance_module(ActionId action);

    static constexpr std::string_view kStateTag = "dryer";
    static constexpr std::uint32_t kStateVersion = 1;

private:
    [[nodiscard]] Observation observe() const;
    bool run_module(const ModuleBoundary& b);

    std::shared_ptr<const DryerParams> params_;
    DryerOptions options_;
    double dt_;
    EpisodeConfig config_;
    PaperState paper_;
    double last_reward_ = 0.0;
    double episode_return_ = 0.0;
    bool done_ = false;
    bool truncated_ = false;
    bool started_ = false;
    PhysicsFault fault_ = PhysicsFault::none;
    double max_mass_error_ = 0.0;
    double max_temp_seen_ = 0.0;
    double next_trace_time_ = 0.0;
};

/// Runs a fixed action list through every module (no early stop) and returns the final
/// paper state together with any fault hit on the way.
struct SweepResult {
    PaperState final_state;
    PhysicsFault fault = PhysicsFault::none;
    double max_temp = 0.0;
    double max_mass_error = 0.0;
};
[[nodiscard]] SweepResult simulate_fixed(std::shared_ptr<const DryerParams> params, const EpisodeConfig& config,
                                         const ActionSequence& actions, double dt = 0.0);

}  // namespace rlcbs
