#include "rlcbs/dryer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace rlcbs {

namespace {

constexpr double kGasConstant = 8.314462618;  // J/(mol K)
constexpr double kWaterMolarMass = 0.018015;  // kg/mol
constexpr double kAirGasConstant = 287.05;    // J/(kg K)
constexpr double kKelvin = 273.15;
constexpr double kScfmToM3s = 0.000471947;
constexpr double kStdAirDensity = 1.204;      // kg/m³ at standard conditions

template <typename T>
void read_field(const nlohmann::json& doc, const char* name, T& out) {
    if (doc.contains(name)) {
        out = doc.at(name).get<T>();
    }
}

}  // namespace

// ─── Parameters ──────────────────────────────────────

void DryerParams::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string("dryer parameter '") + name + "' must be > 0");
        }
    };
    if (nodes < 3) {
        throw ConfigError("dryer needs at least 3 thickness nodes");
    }
    if (modules < 1) {
        throw ConfigError("dryer needs at least one module");
    }
    if (!(porosity > 0.0 && porosity < 1.0)) {
        throw ConfigError("porosity must lie in (0, 1)");
    }
    positive(basis_weight, "basis_weight");
    positive(fiber_density, "fiber_density");
    positive(water_density, "water_density");
    positive(water_cp, "water_cp");
    positive(fiber_cp, "fiber_cp");
    positive(vapor_cp, "vapor_cp");
    positive(latent_heat, "latent_heat");
    positive(k_dry, "k_dry");
    positive(k_wet, "k_wet");
    positive(permeability_ref, "permeability_ref");
    positive(water_kinematic_viscosity, "water_kinematic_viscosity");
    positive(capillary_pressure_ref, "capillary_pressure_ref");
    positive(capillary_exponent, "capillary_exponent");
    positive(saturation_floor, "saturation_floor");
    positive(vapor_diffusivity_air, "vapor_diffusivity_air");
    positive(tortuosity, "tortuosity");
    positive(sorption_scale, "sorption_scale");
    positive(vapor_fraction_cap, "vapor_fraction_cap");
    positive(ambient_pressure, "ambient_pressure");
    positive(air_cp, "air_cp");
    positive(lewis_number, "lewis_number");
    positive(volumetric_flow_scfm, "volumetric_flow_scfm");
    positive(nozzle_area, "nozzle_area");
    positive(dryer_length, "dryer_length");
    positive(dt, "dt");
    positive(v_min, "v_min");
    positive(v_max, "v_max");
    for (double v : h) {
        positive(v, "h");
    }
    if (vapor_fraction_cap >= 1.0) {
        throw ConfigError("vapor_fraction_cap must be < 1");
    }
    if (ambient_vapor_density < 0.0) {
        throw ConfigError("ambient_vapor_density must be >= 0");
    }
    if (!(dre_min_dbmc < dre_max_dbmc)) {
        throw ConfigError("DRE fit range is empty");
    }
    if (ir.surface_flux < 0.0 || ir.view_factor < 0.0 || ir.absorption_fiber < 0.0 || ir.absorption_water < 0.0) {
        throw ConfigError("IR parameters must be >= 0");
    }
}

nlohmann::json DryerParams::to_json() const {
    return {{"version", version},
            {"nodes", nodes},
            {"basis_weight", basis_weight},
            {"fiber_density", fiber_density},
            {"porosity", porosity},
            {"water_density", water_density},
            {"water_cp", water_cp},
            {"fiber_cp", fiber_cp},
            {"vapor_cp", vapor_cp},
            {"latent_heat", latent_heat},
            {"k_dry", k_dry},
            {"k_wet", k_wet},
            {"permeability_ref", permeability_ref},
            {"water_kinematic_viscosity", water_kinematic_viscosity},
            {"capillary_pressure_ref", capillary_pressure_ref},
            {"capillary_exponent", capillary_exponent},
            {"saturation_floor", saturation_floor},
            {"vapor_diffusivity_air", vapor_diffusivity_air},
            {"tortuosity", tortuosity},
            {"sorption_scale", sorption_scale},
            {"vapor_fraction_cap", vapor_fraction_cap},
            {"ambient_pressure", ambient_pressure},
            {"ambient_vapor_density", ambient_vapor_density},
            {"air_cp", air_cp},
            {"lewis_number", lewis_number},
            {"h", {{"PP", h[0]}, {"SJR", h[1]}, {"DEP", h[2]}, {"SP", h[3]}}},
            {"volumetric_flow_scfm", volumetric_flow_scfm},
            {"nozzle_area", nozzle_area},
            {"dre_reading", dre_percent ? "percent" : "literal"},
            {"dre_min_dbmc", dre_min_dbmc},
            {"dre_max_dbmc", dre_max_dbmc},
            {"dryer_length", dryer_length},
            {"modules", modules},
            {"dt", dt},
            {"boiling_point", boiling_point},
            {"bound_water_dbmc", bound_water_dbmc},
            {"v_min", v_min},
            {"v_max", v_max},
            {"failure_penalty", failure_penalty},
            {"ir",
             {{"surface_flux", ir.surface_flux},
              {"view_factor", ir.view_factor},
              {"absorption_fiber", ir.absorption_fiber},
              {"absorption_water", ir.absorption_water},
              {"emitter_boundaries", ir.emitter_boundaries}}}};
}

DryerParams DryerParams::from_json(const nlohmann::json& doc) {
    DryerParams p;
    try {
        const auto version = doc.value("version", p.version);
        if (version != p.version) {
            throw ConfigError("dryer parameter file version '" + version + "' is not supported (expected '" +
                              p.version + "')");
        }
        read_field(doc, "nodes", p.nodes);
        read_field(doc, "basis_weight", p.basis_weight);
        read_field(doc, "fiber_density", p.fiber_density);
        read_field(doc, "porosity", p.porosity);
        read_field(doc, "water_density", p.water_density);
        read_field(doc, "water_cp", p.water_cp);
        read_field(doc, "fiber_cp", p.fiber_cp);
        read_field(doc, "vapor_cp", p.vapor_cp);
        read_field(doc, "latent_heat", p.latent_heat);
        read_field(doc, "k_dry", p.k_dry);
        read_field(doc, "k_wet", p.k_wet);
        read_field(doc, "permeability_ref", p.permeability_ref);
        read_field(doc, "water_kinematic_viscosity", p.water_kinematic_viscosity);
        read_field(doc, "capillary_pressure_ref", p.capillary_pressure_ref);
        read_field(doc, "capillary_exponent", p.capillary_exponent);
        read_field(doc, "saturation_floor", p.saturation_floor);
        read_field(doc, "vapor_diffusivity_air", p.vapor_diffusivity_air);
        read_field(doc, "tortuosity", p.tortuosity);
        read_field(doc, "sorption_scale", p.sorption_scale);
        read_field(doc, "vapor_fraction_cap", p.vapor_fraction_cap);
        read_field(doc, "ambient_pressure", p.ambient_pressure);
        read_field(doc, "ambient_vapor_density", p.ambient_vapor_density);
        read_field(doc, "air_cp", p.air_cp);
        read_field(doc, "lewis_number", p.lewis_number);
        if (doc.contains("h")) {
            const auto& h = doc.at("h");
            for (int m = 0; m < kModuleTypeCount; ++m) {
                read_field(h, std::string(kModuleLabels[m]).c_str(), p.h[m]);
            }
        }
        read_field(doc, "volumetric_flow_scfm", p.volumetric_flow_scfm);
        read_field(doc, "nozzle_area", p.nozzle_area);
        if (doc.contains("dre_reading")) {
            const auto reading = doc.at("dre_reading").get<std::string>();
            if (reading != "percent" && reading != "literal") {
                throw ConfigError("dre_reading must be 'percent' or 'literal'");
            }
            p.dre_percent = reading == "percent";
        }
        read_field(doc, "dre_min_dbmc", p.dre_min_dbmc);
        read_field(doc, "dre_max_dbmc", p.dre_max_dbmc);
        read_field(doc, "dryer_length", p.dryer_length);
        read_field(doc, "modules", p.modules);
        read_field(doc, "dt", p.dt);
        read_field(doc, "boiling_point", p.boiling_point);
        read_field(doc, "bound_water_dbmc", p.bound_water_dbmc);
        read_field(doc, "v_min", p.v_min);
        read_field(doc, "v_max", p.v_max);
        read_field(doc, "failure_penalty", p.failure_penalty);
        if (doc.contains("ir")) {
            const auto& ir = doc.at("ir");
            read_field(ir, "surface_flux", p.ir.surface_flux);
            read_field(ir, "view_factor", p.ir.view_factor);
            read_field(ir, "absorption_fiber", p.ir.absorption_fiber);
            read_field(ir, "absorption_water", p.ir.absorption_water);
            read_field(ir, "emitter_boundaries", p.ir.emitter_boundaries);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad dryer parameter file: ") + e.what());
    }
    p.validate();
    return p;
}

DryerParams load_dryer_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open dryer parameter file " + path.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("dryer parameter file " + path.string() + " is not valid JSON: " + e.what());
    }
    return DryerParams::from_json(doc);
}

std::filesystem::path default_dryer_params_path() {
    return std::filesystem::path(RLCBS_DATA_DIR) / "dryer_params.json";
}

// ─── Closed-form pieces ──────────────────────────────

double sf_to_vm(double speed_factor, const DryerParams& p) {
    if (!(speed_factor >= 0.0 && speed_factor <= 1.0)) {
        throw std::out_of_range("speed factor must lie in [0, 1]");
    }
    return p.v_min + (p.v_max - p.v_min) * (1.0 - speed_factor);
}

const std::array<SqpRow, 11>& sqp_baseline_table() {
    static const std::array<SqpRow, 11> table = {{
        {0.25, 0.0512, 0.9659, 1.0, 879.1134},
        {0.30, 0.0482, 0.8853, 1.0, 874.8082},
        {0.35, 0.0452, 0.8044, 1.0, 870.3372},
        {0.40, 0.0422, 0.7232, 1.0, 865.6814},
        {0.45, 0.0393, 0.6417, 1.0, 860.8234},
        {0.50, 0.0363, 0.5596, 1.0, 855.7368},
        {0.55, 0.0334, 0.4771, 1.0, 850.3909},
        {0.60, 0.0304, 0.3938, 1.0, 844.7547},
        {0.65, 0.0274, 0.3096, 1.0, 838.7919},
        {0.70, 0.0244, 0.2244, 1.0, 832.4452},
        {0.75, 0.0215, 0.1377, 1.0, 825.6498},
    }};
    return table;
}

double q_sqp(double speed_factor) {
    const auto& t = sqp_baseline_table();
    constexpr double kTol = 1e-12;
    if (!(speed_factor >= t.front().speed_factor - kTol && speed_factor <= t.back().speed_factor + kTol)) {
        throw std::out_of_range("speed factor outside the baseline table [0.25, 0.75]");
    }
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (std::abs(speed_factor - t[i].speed_factor) <= kTol) {
            return t[i].energy;
        }
        if (speed_factor < t[i + 1].speed_factor) {
            const double w = (speed_factor - t[i].speed_factor) / (t[i + 1].speed_factor - t[i].speed_factor);
            return t[i].energy + w * (t[i + 1].energy - t[i].energy);
        }
    }
    return t.back().energy;
}

double dryer_reward(bool done, bool truncated, double q_total, double speed_factor, double penalty) {
    if (done) {
        return q_sqp(speed_factor) - q_total;
    }
    if (truncated) {
        return q_sqp(speed_factor) - q_total - penalty;
    }
    return 0.0;
}

double dre_polynomial(double m) {
    // Horner form of 19133m^6 - 94421m^5 + 185596m^4 - 185349m^3 + 99171m^2 - 27003m + 2952.4
    return ((((((19133.0 * m - 94421.0) * m + 185596.0) * m - 185349.0) * m + 99171.0) * m - 27003.0) * m) +
           2952.4;
}

double dep_dre(double dbmc, const DryerParams& p) {
    double m = dbmc;
    if (m < p.dre_min_dbmc || m > p.dre_max_dbmc) {
        static std::once_flag warned;
        std::call_once(warned, [&] {
            spdlog::warn("DEP enhancement evaluated at DBMC {:.4f}, outside its fit range [{}, {}]; clamping", dbmc,
                         p.dre_min_dbmc, p.dre_max_dbmc);
        });
        m = std::clamp(m, p.dre_min_dbmc, p.dre_max_dbmc);
    }
    const double value = dre_polynomial(m) * (p.dre_percent ? 0.01 : 1.0);
    return std::max(0.0, value);
}

double saturation_pressure(double temp_c) {
    return 611.21 * std::exp((18.678 - temp_c / 234.5) * (temp_c / (257.14 + temp_c)));
}

double air_density(double temp_c, const DryerParams& p) {
    return p.ambient_pressure / (kAirGasConstant * (temp_c + kKelvin));
}

ModuleBoundary module_boundary(ActionId action, const DryerParams& p) {
    const DryerAction a = decode_action(action);
    ModuleBoundary b;
    b.type = a.module;
    b.h = p.h[static_cast<int>(a.module)];
    b.air_temp = a.temp_celsius();
    b.hot_air = a.module == ModuleType::PP || a.module == ModuleType::SJR;
    b.dep = a.module == ModuleType::DEP;
    if (b.hot_air) {
        const double mass_flow = p.volumetric_flow_scfm * kScfmToM3s * kStdAirDensity;
        b.air_velocity = mass_flow / (air_density(b.air_temp, p) * p.nozzle_area);
    }
    return b;
}

// ─── Nodal state ─────────────────────────────────────

double PaperState::mean_dbmc() const {
    double sum = 0.0;
    for (double m : dbmc) {
        sum += m;
    }
    return sum / static_cast<double>(dbmc.size());
}

double PaperState::mean_temp() const {
    double sum = 0.0;
    for (double t : temp) {
        sum += t;
    }
    return sum / static_cast<double>(temp.size());
}

PaperState initial_paper_state(const EpisodeConfig& config, const DryerParams& p) {
    PaperState s;
    s.temp.assign(p.nodes, config.paper_temp_init);
    s.dbmc.assign(p.nodes, config.dbmc_init);
    return s;
}

namespace {

/// Node closures evaluated once per step.
struct NodeProps {
    double s;
    double heat_capacity;  // J/(m³ K)
    double k;
    double mobility;       // K / ν_w
    double pca;            // suction, Pa
    double rho_v;          // kg/m³
    double vapor_coef;     // D_ap / (1 - y_v)
};

double relative_humidity(double dbmc, const DryerParams& p) {
    return 1.0 - std::exp(-std::max(dbmc, 0.0) / p.sorption_scale);
}

double vapor_density(double dbmc, double temp_c, const DryerParams& p, double* mole_fraction) {
    const double pv = relative_humidity(dbmc, p) * saturation_pressure(temp_c);
    if (mole_fraction != nullptr) {
        *mole_fraction = std::min(pv / p.ambient_pressure, p.vapor_fraction_cap);
    }
    return pv * kWaterMolarMass / (kGasConstant * (temp_c + kKelvin));
}

NodeProps node_props(double dbmc, double temp_c, const DryerParams& p) {
    NodeProps n;
    n.s = p.saturation(dbmc);
    const double s = std::clamp(n.s, 0.0, 1.0);
    n.heat_capacity = p.water_cp * p.water_density * s * p.porosity + p.fiber_cp * p.fiber_density * (1.0 - p.porosity);
    n.k = p.k_dry + s * (p.k_wet - p.k_dry);
    n.mobility = p.permeability_ref * s * s * s / p.water_kinematic_viscosity;
    n.pca = p.capillary_pressure_ref * std::pow(std::max(s, p.saturation_floor), -p.capillary_exponent);
    double y = 0.0;
    n.rho_v = vapor_density(dbmc, temp_c, p, &y);
    n.vapor_coef = p.vapor_diffusivity_air * p.tortuosity * p.porosity * (1.0 - s) / (1.0 - y);
    return n;
}

struct Workspace {
    std::vector<NodeProps> props;
    FaceFluxes faces;
    std::vector<double> absorption;
    std::vector<double> ir;
};

void fill_props(const PaperState& s, const DryerParams& p, Workspace& w) {
    const int n = p.nodes;
    w.props.resize(n);
    for (int i = 0; i < n; ++i) {
        w.props[i] = node_props(s.dbmc[i], s.temp[i], p);
    }
}

void fill_faces(const PaperState& s, const DryerParams& p, Workspace& w) {
    const int n = p.nodes;
    const double dz = p.dz();
    auto& f = w.faces;
    f.heat.resize(n - 1);
    f.liquid.resize(n - 1);
    f.vapor.resize(n - 1);
    f.enthalpy.resize(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        const NodeProps& a = w.props[i];
        const NodeProps& b = w.props[i + 1];
        const double k = 0.5 * (a.k + b.k);
        const double mob = 0.5 * (a.mobility + b.mobility);
        const double dv = 0.5 * (a.vapor_coef + b.vapor_coef);
        f.heat[i] = -k * (s.temp[i + 1] - s.temp[i]) / dz;
        f.liquid[i] = mob * (b.pca - a.pca) / dz;
        f.vapor[i] = -dv * (b.rho_v - a.rho_v) / dz;
        const double tw = f.liquid[i] >= 0.0 ? s.temp[i] : s.temp[i + 1];
        const double tv = f.vapor[i] >= 0.0 ? s.temp[i] : s.temp[i + 1];
        f.enthalpy[i] = f.liquid[i] * p.water_cp * tw + f.vapor[i] * (p.latent_heat + p.vapor_cp * tv);
    }
}

BoundaryTerms boundary_terms(const PaperState& s, const ModuleBoundary& b, const DryerParams& p, double rho_v_top) {
    BoundaryTerms out;
    const double t_top = s.temp.back();
    const double hm = b.h / (air_density(b.air_temp, p) * p.air_cp) * std::pow(p.lewis_number, -2.0 / 3.0);
    const double jvo = hm * (rho_v_top - p.ambient_vapor_density);
    out.dre = b.dep ? dep_dre(s.mean_dbmc(), p) : 0.0;
    out.vapor_out = (1.0 + out.dre) * jvo;
    out.enthalpy_out = out.vapor_out * (p.latent_heat + p.vapor_cp * t_top);
    out.convective = b.h * (t_top - b.air_temp);
    return out;
}

thread_local Workspace tls_workspace;

}  // namespace

FaceFluxes compute_fluxes(const PaperState& s, const DryerParams& p) {
    Workspace w;
    fill_props(s, p, w);
    fill_faces(s, p, w);
    return w.faces;
}

BoundaryTerms apply_boundaries(const PaperState& s, const ModuleBoundary& b, const DryerParams& p) {
    return boundary_terms(s, b, p, vapor_density(s.dbmc.back(), s.temp.back(), p, nullptr));
}

std::vector<double> ir_flux(const std::vector<double>& absorption, double dz, double surface_flux) {
    const std::size_t n = absorption.size();
    std::vector<double> flux(n + 1, 0.0);
    if (n == 0) {
        return flux;
    }
    // Absorption on faces: surfaces take the adjacent node, interior faces the node average.
    std::vector<double> af(n + 1);
    af[0] = absorption.front();
    af[n] = absorption.back();
    for (std::size_t k = 1; k < n; ++k) {
        af[k] = 0.5 * (absorption[k - 1] + absorption[k]);
    }
    flux[n] = surface_flux;
    double optical_depth = 0.0;
    for (std::size_t k = n; k-- > 0;) {
        optical_depth += 0.5 * (af[k] + af[k + 1]) * dz;
        flux[k] = surface_flux * std::exp(-optical_depth);
    }
    return flux;
}

double ir_surface_flux(double position, const DryerParams& p) {
    const double span = p.module_span();
    double total = 0.0;
    for (int boundary : p.ir.emitter_boundaries) {
        if (std::abs(position - boundary * span) <= 0.5 * span) {
            total += p.ir.surface_flux * p.ir.view_factor;
        }
    }
    return total;
}

StepBudget integrate_step(PaperState& s, const ModuleBoundary& b, double ir_surface, const DryerParams& p,
                          double dt) {
    Workspace& w = tls_workspace;
    const int n = p.nodes;
    const double dz = p.dz();
    const double rho_dry = p.dry_density();
    fill_props(s, p, w);
    fill_faces(s, p, w);
    const BoundaryTerms top = boundary_terms(s, b, p, w.props.back().rho_v);

    const bool with_ir = ir_surface > 0.0;
    if (with_ir) {
        w.absorption.resize(n);
        for (int i = 0; i < n; ++i) {
            const double sat = std::clamp(w.props[i].s, 0.0, 1.0);
            w.absorption[i] = p.ir.absorption_fiber * (1.0 - sat) + p.ir.absorption_water * sat;
        }
        w.ir = ir_flux(w.absorption, dz, ir_surface);
    }

    const auto& f = w.faces;
    StepBudget budget;
    for (int i = 0; i < n; ++i) {
        const double mass_in = i == 0 ? 0.0 : f.liquid[i - 1] + f.vapor[i - 1];
        const double mass_out = i == n - 1 ? top.vapor_out : f.liquid[i] + f.vapor[i];
        const double heat_in = i == 0 ? 0.0 : f.heat[i - 1] + f.enthalpy[i - 1];
        const double heat_out = i == n - 1 ? top.convective + top.enthalpy_out : f.heat[i] + f.enthalpy[i];
        const double ir_absorbed = with_ir ? w.ir[i + 1] - w.ir[i] : 0.0;

        const double dm = (mass_in - mass_out) / (dz * rho_dry) * dt;
        const double dt_node = (heat_in - heat_out + ir_absorbed) / (dz * w.props[i].heat_capacity) * dt;
        s.dbmc[i] += dm;
        s.temp[i] += dt_node;
        budget.storage_change += dm * rho_dry * dz;
    }
    budget.boundary_flux = -top.vapor_out * dt;
    s.time += dt;
    return budget;
}

double energy_increment(const PaperState& before, const PaperState& after, const DryerParams& p) {
    const double d_dbmc = after.mean_dbmc() - before.mean_dbmc();
    const double d_temp = after.mean_temp() - before.mean_temp();
    double s_mean = 0.0;
    for (double m : after.dbmc) {
        s_mean += p.saturation(m);
    }
    s_mean /= static_cast<double>(after.dbmc.size());
    const double heat_capacity = p.water_cp * p.water_density * p.porosity * s_mean +
                                 p.fiber_cp * p.fiber_density * (1.0 - p.porosity);
    const double joules = -d_dbmc * p.basis_weight * p.latent_heat + d_temp * p.thickness() * heat_capacity;
    return joules / 1000.0;
}

double stable_dt_limit(const DryerParams& p) {
    const double dz = p.dz();
    const double rho_dry = p.dry_density();
    const double water_volume = p.water_density * p.porosity;
    double d_max = 0.0;
    double c_min = std::numeric_limits<double>::infinity();
    const double m_max = water_volume / rho_dry;  // DBMC at full saturation
    constexpr int kSatSamples = 41;
    constexpr int kTempSamples = 21;
    for (int i = 0; i < kSatSamples; ++i) {
        const double s = static_cast<double>(i) / (kSatSamples - 1);
        const double m = s * m_max;
        for (int j = 0; j < kTempSamples; ++j) {
            const double t = p.boiling_point * j / (kTempSamples - 1);
            const NodeProps n = node_props(m, t, p);
            c_min = std::min(c_min, n.heat_capacity);
            const double thermal = n.k / n.heat_capacity;
            // Liquid diffusivity in moisture units: (K/ν) |dP_ca/ds| / (ρ_w ε)
            const double ss = std::max(s, p.saturation_floor);
            const double dpds = s > p.saturation_floor
                                    ? p.capillary_exponent * p.capillary_pressure_ref *
                                          std::pow(ss, -p.capillary_exponent - 1.0)
                                    : 0.0;
            const double liquid = n.mobility * dpds / water_volume;
            // Vapor diffusivity: D_ap/(1-y) dρ_v/dW via a central difference in DBMC.
            const double dm = 1e-6;
            const double drho = (vapor_density(m + dm, t, p, nullptr) - vapor_density(std::max(m - dm, 0.0), t, p, nullptr)) /
                                (m + dm - std::max(m - dm, 0.0)) / rho_dry;
            const double vapor = n.vapor_coef * drho;
            d_max = std::max({d_max, thermal, liquid + vapor});
        }
    }
    double limit = dz * dz / (2.0 * d_max);

    // Top node: linearized convective and evaporative relaxation rates.
    const double rho_a_min = air_density(kTempLevels.back(), p);
    const double h_max = *std::max_element(p.h.begin(), p.h.end());
    const double hm_max = h_max / (rho_a_min * p.air_cp) * std::pow(p.lewis_number, -2.0 / 3.0);
    double dre_max = 0.0;
    for (int i = 0; i <= 100; ++i) {
        dre_max = std::max(dre_max, dep_dre(p.dre_min_dbmc + (p.dre_max_dbmc - p.dre_min_dbmc) * i / 100.0, p));
    }
    const double tb = p.boiling_point;
    const double drho_dt = (vapor_density(10.0, tb, p, nullptr) - vapor_density(10.0, tb - 0.1, p, nullptr)) / 0.1;
    const double rate_temp = (h_max + hm_max * (1.0 + dre_max) * drho_dt * p.latent_heat) / (c_min * dz);
    const double drho_dm = (1.0 / p.sorption_scale) * vapor_density(1e3, tb, p, nullptr);
    const double rate_moist = hm_max * (1.0 + dre_max) * drho_dm / (rho_dry * dz);
    limit = std::min({limit, 1.0 / rate_temp, 1.0 / rate_moist});
    return limit;
}

PhysicsFault check_physics(const PaperState& s, const DryerParams& p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.temp.size(); ++i) {
        const double t = s.temp[i];
        const double m = s.dbmc[i];
        if (!std::isfinite(t) || !std::isfinite(m)) {
            return PhysicsFault::non_finite;
        }
        if (t >= p.boiling_point) {
            return PhysicsFault::boiling;
        }
        const double sat = p.saturation(m);
        if (sat < 0.0 || sat > 1.0) {
            return PhysicsFault::saturation;
        }
        sum += m;
    }
    if (sum / static_cast<double>(s.dbmc.size()) < p.bound_water_dbmc) {
        return PhysicsFault::bound_water;
    }
    return PhysicsFault::none;
}

std::string to_string(PhysicsFault f) {
    switch (f) {
        case PhysicsFault::none: return "none";
        case PhysicsFault::boiling: return "boiling";
        case PhysicsFault::saturation: return "saturation";
        case PhysicsFault::bound_water: return "bound_water";
        case PhysicsFault::non_finite: return "non_finite";
    }
    return "unknown";
}

// ─── Environment ─────────────────────────────────────

DryerEnv::DryerEnv(std::shared_ptr<const DryerParams> params, DryerOptions options)
    : params_(std::move(params)), options_(std::move(options)) {
    if (!params_) {
        throw ConfigError("dryer env needs parameters");
    }
    params_->validate();
    dt_ = options_.dt > 0.0 ? options_.dt : params_->dt;
    const double limit = stable_dt_limit(*params_);
    if (!(dt_ < limit)) {
        throw ConfigError("time step " + std::to_string(dt_) + " s violates the explicit stability limit " +
                          std::to_string(limit) + " s");
    }
}

Observation DryerEnv::reset(const EpisodeConfig& config) {
    if (!(config.speed_factor >= 0.25 - 1e-12 && config.speed_factor <= 0.75 + 1e-12)) {
        throw ConfigError("dryer speed factor must lie in [0.25, 0.75]");
    }
    if (!(config.dbmc_init > config.dbmc_target) || config.dbmc_target <= 0.0) {
        throw ConfigError("dryer needs dbmc_init > dbmc_target > 0");
    }
    if (params_->saturation(config.dbmc_init) > 1.0) {
        throw ConfigError("initial DBMC exceeds full saturation");
    }
    if (config.max_modules < 1 || config.max_modules > params_->modules) {
        throw ConfigError("max_modules must lie in [1, " + std::to_string(params_->modules) + "]");
    }
    config_ = config;
    paper_ = initial_paper_state(config, *params_);
    last_reward_ = 0.0;
    episode_return_ = 0.0;
    done_ = false;
    truncated_ = false;
    fault_ = PhysicsFault::none;
    max_mass_error_ = 0.0;
    max_temp_seen_ = paper_.mean_temp();
    next_trace_time_ = 0.0;
    started_ = true;
    return observe();
}

Observation DryerEnv::observe() const {
    return {config_.speed_factor,
            paper_.temp.back(),
            paper_.temp.front(),
            paper_.dbmc.back(),
            paper_.dbmc.front(),
            static_cast<double>(paper_.module) / static_cast<double>(params_->modules)};
}

bool DryerEnv::run_module(const ModuleBoundary& b) {
    const DryerParams& p = *params_;
    const double vm = sf_to_vm(config_.speed_factor, p);
    const double residence = p.module_span() / vm;
    const auto steps = std::max<long long>(1, std::llround(residence / dt_));
    const double dt = residence / static_cast<double>(steps);
    PaperState before;
    for (long long k = 0; k < steps; ++k) {
        const double ir = config_.ir_enabled ? ir_surface_flux(paper_.position, p) : 0.0;
        before.dbmc = paper_.dbmc;
        before.temp = paper_.temp;
        const StepBudget budget = integrate_step(paper_, b, ir, p, dt);
        paper_.position += vm * dt;
        const double dq = energy_increment(before, paper_, p);
        paper_.energy += dq;

        const double denom = std::max(std::abs(budget.boundary_flux), 1e-12 * p.basis_weight);
        max_mass_error_ = std::max(max_mass_error_, std::abs(budget.storage_change - budget.boundary_flux) / denom);
        for (double t : paper_.temp) {
            max_temp_seen_ = std::max(max_temp_seen_, t);
        }
        if (options_.trace && paper_.time >= next_trace_time_) {
            options_.trace(TraceRow{paper_.time, paper_.position, paper_.mean_temp(), paper_.temp.back(),
                                    paper_.temp.front(), paper_.mean_dbmc(), paper_.dbmc.back(), paper_.dbmc.front(),
                                    dq});
            next_trace_time_ = paper_.time + options_.trace_interval;
        }
        fault_ = check_physics(paper_, p);
        if (fault_ != PhysicsFault::none) {
            return false;
        }
    }
    ++paper_.module;
    return true;
}

StepResult DryerEnv::step(ActionId action) {
    if (!started_) {
        throw std::logic_error("dryer env stepped before reset");
    }
    if (done_ || truncated_) {
        throw EpisodeOver("dryer episode already finished");
    }
    const ModuleBoundary b = module_boundary(action, *params_);
    const bool ok = run_module(b);
    if (!ok) {
        truncated_ = true;
    } else if (paper_.mean_dbmc() <= config_.dbmc_target) {
        done_ = true;
    } else if (paper_.module >= config_.max_modules) {
        truncated_ = true;
    }
    last_reward_ = dryer_reward(done_, truncated_, paper_.energy, config_.speed_factor, params_->failure_penalty);
    episode_return_ += last_reward_;
    return status();
}

void DryerEnv::advance_module(ActionId action) {
    if (!started_) {
        throw std::logic_error("dryer env stepped before reset");
    }
    if (fault_ != PhysicsFault::none) {
        throw EpisodeOver("dryer simulation already failed");
    }
    if (!run_module(module_boundary(action, *params_))) {
        truncated_ = true;
    }
}

StepResult DryerEnv::status() const {
    StepResult r;
    r.observation = observe();
    r.reward = last_reward_;
    r.episode_return = episode_return_;
    r.energy = paper_.energy;
    r.done = done_;
    r.truncated = truncated_;
    r.failed = fault_ != PhysicsFault::none;
    r.t = paper_.module;
    return r;
}

std::string DryerEnv::get_state() const {
    std::vector<double> v = {static_cast<double>(paper_.module),
                             paper_.position,
                             paper_.time,
                             paper_.energy,
                             last_reward_,
                             episode_return_,
                             done_ ? 1.0 : 0.0,
                             truncated_ ? 1.0 : 0.0,
                             static_cast<double>(static_cast<int>(fault_)),
                             max_mass_error_,
                             max_temp_seen_,
                             next_trace_time_};
    append_episode_config(v, config_);
    v.insert(v.end(), paper_.temp.begin(), paper_.temp.end());
    v.insert(v.end(), paper_.dbmc.begin(), paper_.dbmc.end());
    return encode_state(kStateTag, kStateVersion, v);
}

void DryerEnv::set_state(std::string_view bytes) {
    const auto v = decode_state(bytes, kStateTag, kStateVersion);
    constexpr std::size_t kHeader = 12;
    const std::size_t n = static_cast<std::size_t>(params_->nodes);
    if (v.size() != kHeader + kEpisodeConfigSlots + 2 * n) {
        throw StateFormatError("dryer state length does not match the node count");
    }
    paper_.module = static_cast<int>(v[0]);
    paper_.position = v[1];
    paper_.time = v[2];
    paper_.energy = v[3];
    last_reward_ = v[4];
    episode_return_ = v[5];
    done_ = v[6] != 0.0;
    truncated_ = v[7] != 0.0;
    fault_ = static_cast<PhysicsFault>(static_cast<int>(v[8]));
    max_mass_error_ = v[9];
    max_temp_seen_ = v[10];
    next_trace_time_ = v[11];
    config_ = read_episode_config(v, kHeader);
    const auto* nodes = v.data() + kHeader + kEpisodeConfigSlots;
    paper_.temp.assign(nodes, nodes + n);
    paper_.dbmc.assign(nodes + n, nodes + 2 * n);
    started_ = true;
}

nlohmann::json DryerEnv::describe() const {
    return {{"kind", "dryer"}, {"version", kStateVersion}, {"params", params_->to_json()}, {"dt", dt_}};
}

std::unique_ptr<Environment> DryerEnv::clone() const {
    DryerOptions opts = options_;
    opts.dt = dt_;
    return std::make_unique<DryerEnv>(params_, opts);
}

SweepResult simulate_fixed(std::shared_ptr<const DryerParams> params, const EpisodeConfig& config,
                           const ActionSequence& actions, double dt) {
    const DryerParams& p = *params;
    const double step = dt > 0.0 ? dt : p.dt;
    if (step >= stable_dt_limit(p)) {
        throw ConfigError("time step violates the explicit stability limit");
    }
    // Any speed on the conveyor's range is allowed here; the episode env is limited to the baseline table.
    const double vm = sf_to_vm(config.speed_factor, p);
    const double residence = p.module_span() / vm;
    const auto n = std::max<long long>(1, std::llround(residence / step));
    const double h = residence / static_cast<double>(n);

    SweepResult out;
    out.final_state = initial_paper_state(config, p);
    PaperState& s = out.final_state;
    out.max_temp = s.mean_temp();
    PaperState before;
    for (ActionId a : actions) {
        const ModuleBoundary b = module_boundary(a, p);
        for (long long k = 0; k < n && out.fault == PhysicsFault::none; ++k) {
            const double ir = config.ir_enabled ? ir_surface_flux(s.position, p) : 0.0;
            before.dbmc = s.dbmc;
            before.temp = s.temp;
            const StepBudget budget = integrate_step(s, b, ir, p, h);
            s.position += vm * h;
            s.energy += energy_increment(before, s, p);
            const double denom = std::max(std::abs(budget.boundary_flux), 1e-12 * p.basis_weight);
            out.max_mass_error =
                std::max(out.max_mass_error, std::abs(budget.storage_change - budget.boundary_flux) / denom);
            out.max_temp = std::max(out.max_temp, *std::max_element(s.temp.begin(), s.temp.end()));
            out.fault = check_physics(s, p);
        }
        if (out.fault != PhysicsFault::none) {
            break;
        }
        ++s.module;
    }
    return out;
}

}  // namespace rlcbs
