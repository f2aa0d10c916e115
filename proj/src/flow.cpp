#include "uwf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "uwf/fft.hpp"
#include "uwf/rng.hpp"

namespace uwf {

namespace {

// Discretization note: the two boundary modes use different divergence /
// gradient pairs. Periodic mode pairs central differences with a
// modified-wavenumber spectral solve; central operators commute with the
// point reflection of the cell-centered grid, so reflection-antisymmetric
// velocity families (Taylor-Green and friends) keep a machine-zero mean and
// total momentum holds to roundoff. The central pair is blind to Nyquist
// checkerboards, but those carry no central divergence and are the most
// damped modes under both bilinear interpolation and FTCS diffusion.
// Channel mode pairs a forward-difference divergence with a
// backward-difference gradient: the composition is the compact 5-point
// Laplacian (an M-matrix under the Dirichlet-east / Neumann-elsewhere
// boundary closure), so SOR converges and its residual equals the
// post-projection divergence on the solved cells.

double power_law(double ref, double exponent, int j, int ny) {
    return ref * std::pow((j + 0.5) / double(ny), exponent);
}

void check_grid(const GridSpec& a, const GridSpec& b, const char* what) {
    if (!(a == b))
        throw ContractError(std::string("flow: ") + what + " grids do not match");
}

void zero_inside(ScalarField& f, const BuildingMask& mask) {
    for (std::int64_t i = 0; i < f.values.size(); ++i)
        if (mask.values[i]) f.values[i] = 0.0;
}

void zero_inside(VelocityField& vel, const BuildingMask& mask) {
    zero_inside(vel.u, mask);
    zero_inside(vel.v, mask);
}

int wrap(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

double bilinear(const ScalarField& f, double fx, double fy, BoundaryMode mode) {
    if (!std::isfinite(fx) || !std::isfinite(fy))
        return std::numeric_limits<double>::quiet_NaN();
    const int nx = f.nx(), ny = f.ny();
    int x0, y0;
    double tx, ty;
    if (mode == BoundaryMode::periodic) {
        // Reduce by fmod before the int cast: departure points scale with
        // |u| dt and may exceed the int range long before the step's
        // finiteness check can flag the blow-up.
        fx = std::fmod(fx, double(nx));
        if (fx < 0.0) fx += nx;
        fy = std::fmod(fy, double(ny));
        if (fy < 0.0) fy += ny;
        double bx = std::floor(fx), by = std::floor(fy);
        x0 = wrap(int(bx), nx);
        y0 = wrap(int(by), ny);
        tx = fx - bx;
        ty = fy - by;
    } else {
        fx = std::clamp(fx, 0.0, double(nx - 1));
        fy = std::clamp(fy, 0.0, double(ny - 1));
        x0 = std::min(int(fx), nx - 2);
        y0 = std::min(int(fy), ny - 2);
        tx = fx - x0;
        ty = fy - y0;
    }
    const int x1 = mode == BoundaryMode::periodic ? wrap(x0 + 1, nx) : x0 + 1;
    const int y1 = mode == BoundaryMode::periodic ? wrap(y0 + 1, ny) : y0 + 1;
    const double f00 = f(x0, y0), f10 = f(x1, y0), f01 = f(x0, y1), f11 = f(x1, y1);
    return (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11);
}

/// Central difference along x with a one-sided fallback on the edge columns.
double ddx(const ScalarField& f, int x, int y, double h) {
    if (x == 0) return (f(1, y) - f(0, y)) / h;
    if (x == f.nx() - 1) return (f(x, y) - f(x - 1, y)) / h;
    return (f(x + 1, y) - f(x - 1, y)) / (2.0 * h);
}

double ddy(const ScalarField& f, int x, int y, double h) {
    if (y == 0) return (f(x, 1) - f(x, 0)) / h;
    if (y == f.ny() - 1) return (f(x, y) - f(x, y - 1)) / h;
    return (f(x, y + 1) - f(x, y - 1)) / (2.0 * h);
}

/// One conservative FTCS update of f: f += dt * div(coef * grad f).
/// Face coefficients are arithmetic means; channel mode has no flux
/// across the domain boundary, periodic mode wraps.
void diffuse_once(ScalarField& f, const ScalarField& coef, double dt, BoundaryMode mode) {
    const int nx = f.nx(), ny = f.ny();
    const double h = f.spec.dx;
    const double s = dt / (h * h);
    ScalarField out = f;
    const bool per = mode == BoundaryMode::periodic;
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            const double fc = f(x, y), cc = coef(x, y);
            double acc = 0.0;
            auto face = [&](int xn, int yn) {
                acc += 0.5 * (cc + coef(xn, yn)) * (f(xn, yn) - fc);
            };
            if (per || x + 1 < nx) face(per ? wrap(x + 1, nx) : x + 1, y);
            if (per || x > 0) face(per ? wrap(x - 1, nx) : x - 1, y);
            if (per || y + 1 < ny) face(x, per ? wrap(y + 1, ny) : y + 1);
            if (per || y > 0) face(x, per ? wrap(y - 1, ny) : y - 1);
            out(x, y) = fc + s * acc;
        }
    }
    f = std::move(out);
}

void apply_channel_velocity_bcs(VelocityField& vel, const FlowConfig& cfg) {
    const int nx = vel.u.nx(), ny = vel.u.ny();
    for (int x = 0; x < nx; ++x) {            // free-slip walls
        vel.u(x, 0) = vel.u(x, 1);
        vel.v(x, 0) = 0.0;
        vel.u(x, ny - 1) = vel.u(x, ny - 2);
        vel.v(x, ny - 1) = 0.0;
    }
    for (int y = 0; y < ny; ++y) {            // zero-gradient outflow
        vel.u(nx - 1, y) = vel.u(nx - 2, y);
        vel.v(nx - 1, y) = vel.v(nx - 2, y);
    }
    for (int y = 0; y < ny; ++y) {            // power-law inflow
        vel.u(0, y) = power_law(cfg.inflow_speed_ref, cfg.inflow_exponent, y, ny);
        vel.v(0, y) = 0.0;
    }
}

void apply_channel_scalar_bcs(ScalarField& f) {
    const int nx = f.nx(), ny = f.ny();
    for (int x = 0; x < nx; ++x) {
        f(x, 0) = f(x, 1);
        f(x, ny - 1) = f(x, ny - 2);
    }
    for (int y = 0; y < ny; ++y) {
        f(0, y) = f(1, y);
        f(nx - 1, y) = f(nx - 2, y);
    }
}

double pearson(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    const double ma = a.mean(), mb = b.mean();
    const Eigen::ArrayXd da = a - ma, db = b - mb;
    const double den = std::sqrt((da * da).sum() * (db * db).sum());
    if (den == 0.0) return 1.0;
    return (da * db).sum() / den;
}

constexpr double kTurbulentPrandtl = 0.9;
constexpr int kMaxDiffusionSubsteps = 64;

} // namespace

std::string to_string(BoundaryMode mode) {
    return mode == BoundaryMode::periodic ? "periodic" : "channel";
}

BoundaryMode boundary_mode_from_string(const std::string& s) {
    if (s == "periodic") return BoundaryMode::periodic;
    if (s == "channel") return BoundaryMode::channel;
    throw ContractError("flow config: boundary_mode must be \"periodic\" or \"channel\", got \"" + s + "\"");
}

void FlowConfig::validate(bool allow_cs_override) const {
    auto bad = [](const std::string& key, const std::string& why) {
        throw ContractError("flow config: " + key + " " + why);
    };
    if (!(reynolds > 0.0) || !std::isfinite(reynolds)) bad("reynolds", "must be positive and finite");
    if (!std::isfinite(grashof)) bad("grashof", "must be finite");
    if (!(prandtl > 0.0) || !std::isfinite(prandtl)) bad("prandtl", "must be positive and finite");
    if (!(smagorinsky_cs >= 0.0) || !std::isfinite(smagorinsky_cs))
        bad("smagorinsky_cs", "must be non-negative and finite");
    if (!allow_cs_override && (smagorinsky_cs < 0.1 || smagorinsky_cs > 0.24))
        bad("smagorinsky_cs", "outside [0.1, 0.24] (pass the override to allow)");
    if (!(dt > 0.0) || !std::isfinite(dt)) bad("dt", "must be positive and finite");
    if (!(inflow_speed_ref >= 0.0) || !std::isfinite(inflow_speed_ref))
        bad("inflow_speed_ref", "must be non-negative and finite");
    if (!(inflow_exponent >= 0.0) || !std::isfinite(inflow_exponent))
        bad("inflow_exponent", "must be non-negative and finite");
    if (projection_iters < 1) bad("projection_iters", "must be at least 1");
    if (!(projection_tol > 0.0) || !std::isfinite(projection_tol))
        bad("projection_tol", "must be positive and finite");
}

FlowConfig flow_config_from_json(const nlohmann::json& j, bool allow_cs_override) {
    if (!j.is_object()) throw ContractError("flow config: document must be a JSON object");
    static const char* keys[] = {"reynolds", "grashof", "prandtl", "smagorinsky_cs",
                                 "dt", "inflow_speed_ref", "inflow_exponent", "boundary_mode",
                                 "projection_iters", "projection_tol", "seed"};
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : keys) known = known || item.key() == k;
        if (!known) throw ContractError("flow config: unknown key \"" + item.key() + "\"");
    }
    for (const char* k : keys)
        if (!j.contains(k)) throw ContractError(std::string("flow config: missing key \"") + k + "\"");

    auto num = [&](const char* k) {
        if (!j.at(k).is_number()) throw ContractError(std::string("flow config: ") + k + " must be a number");
        return j.at(k).get<double>();
    };
    FlowConfig cfg;
    cfg.reynolds = num("reynolds");
    cfg.grashof = num("grashof");
    cfg.prandtl = num("prandtl");
    cfg.smagorinsky_cs = num("smagorinsky_cs");
    cfg.dt = num("dt");
    cfg.inflow_speed_ref = num("inflow_speed_ref");
    cfg.inflow_exponent = num("inflow_exponent");
    if (!j.at("boundary_mode").is_string())
        throw ContractError("flow config: boundary_mode must be a string");
    cfg.boundary_mode = boundary_mode_from_string(j.at("boundary_mode").get<std::string>());
    if (!j.at("projection_iters").is_number_integer())
        throw ContractError("flow config: projection_iters must be an integer");
    cfg.projection_iters = j.at("projection_iters").get<int>();
    cfg.projection_tol = num("projection_tol");
    const auto& seed = j.at("seed");
    if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
        throw ContractError("flow config: seed must be a non-negative integer");
    cfg.seed = seed.get<std::uint64_t>();
    cfg.validate(allow_cs_override);
    return cfg;
}

nlohmann::json flow_config_to_json(const FlowConfig& cfg) {
    return nlohmann::json{{"reynolds", cfg.reynolds},
                          {"grashof", cfg.grashof},
                          {"prandtl", cfg.prandtl},
                          {"smagorinsky_cs", cfg.smagorinsky_cs},
                          {"dt", cfg.dt},
                          {"inflow_speed_ref", cfg.inflow_speed_ref},
                          {"inflow_exponent", cfg.inflow_exponent},
                          {"boundary_mode", to_string(cfg.boundary_mode)},
                          {"projection_iters", cfg.projection_iters},
                          {"projection_tol", cfg.projection_tol},
                          {"seed", cfg.seed}};
}

FlowConfig load_flow_config(const std::string& path, bool allow_cs_override) {
    std::ifstream f(path);
    if (!f) throw FormatError("flow config: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("flow config: " + path + " is not valid JSON: " + e.what());
    }
    return flow_config_from_json(j, allow_cs_override);
}

ScalarField eddy_viscosity(const VelocityField& vel, double cs, double dx) {
    check_grid(vel.u.spec, vel.v.spec, "velocity component");
    ScalarField nu(vel.u.spec);
    const double c2 = (cs * dx) * (cs * dx);
    for (int y = 0; y < nu.ny(); ++y) {
        for (int x = 0; x < nu.nx(); ++x) {
            const double s11 = ddx(vel.u, x, y, dx);
            const double s22 = ddy(vel.v, x, y, dx);
            const double s12 = 0.5 * (ddy(vel.u, x, y, dx) + ddx(vel.v, x, y, dx));
            nu(x, y) = c2 * std::sqrt(2.0 * (s11 * s11 + s22 * s22 + 2.0 * s12 * s12));
        }
    }
    return nu;
}

ScalarField semi_lagrangian_advect(const ScalarField& field, const VelocityField& vel,
                                   double dt, BoundaryMode mode) {
    check_grid(field.spec, vel.u.spec, "field and velocity");
    const int nx = field.nx(), ny = field.ny();
    if (nx < 2 || ny < 2) throw ContractError("flow: advection needs at least a 2x2 grid");
    const double h = field.spec.dx;
    ScalarField out(field.spec);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x)
            out(x, y) = bilinear(field, x - vel.u(x, y) * dt / h, y - vel.v(x, y) * dt / h, mode);
    return out;
}

ScalarField divergence(const VelocityField& vel, BoundaryMode mode) {
    check_grid(vel.u.spec, vel.v.spec, "velocity component");
    const int nx = vel.u.nx(), ny = vel.u.ny();
    const double h = vel.u.spec.dx;
    ScalarField div(vel.u.spec);
    if (mode == BoundaryMode::periodic) {
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x)
                div(x, y) = (vel.u(wrap(x + 1, nx), y) - vel.u(wrap(x - 1, nx), y) +
                             vel.v(x, wrap(y + 1, ny)) - vel.v(x, wrap(y - 1, ny))) /
                            (2.0 * h);
        return div;
    }
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            double du = 0.0, dv = 0.0;
            if (x + 1 < nx) du = vel.u(x + 1, y) - vel.u(x, y);
            if (y + 1 < ny) dv = vel.v(x, y + 1) - vel.v(x, y);
            div(x, y) = (du + dv) / h;
        }
    }
    return div;
}

namespace {

/// Subtracts the gradient of p: central differences in periodic mode,
/// backward differences (Neumann ghost on the west/south edge) in
/// channel mode, matching the divergence operator of each mode.
void subtract_gradient(VelocityField& vel, const ScalarField& p, BoundaryMode mode) {
    const int nx = p.nx(), ny = p.ny();
    const double h = p.spec.dx;
    if (mode == BoundaryMode::periodic) {
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                vel.u(x, y) -= (p(wrap(x + 1, nx), y) - p(wrap(x - 1, nx), y)) / (2.0 * h);
                vel.v(x, y) -= (p(x, wrap(y + 1, ny)) - p(x, wrap(y - 1, ny))) / (2.0 * h);
            }
        return;
    }
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            if (x > 0) vel.u(x, y) -= (p(x, y) - p(x - 1, y)) / h;
            if (y > 0) vel.v(x, y) -= (p(x, y) - p(x, y - 1)) / h;
        }
    }
}

void project_periodic(VelocityField& vel, const ScalarField& div, StepDiagnostics& diag) {
    const int nx = div.nx(), ny = div.ny();
    const double h = div.spec.dx;
    CArray dhat = fft2_forward_real(div.values, nx, ny);
    // Central differences annihilate the k = 0 and Nyquist columns exactly,
    // so those eigenvalues must be structural zeros: sin(pi) rounds to
    // ~1e-16, and dividing by its square would blow the null modes up
    // instead of dropping them.
    std::vector<double> lamx(nx), lamy(ny);
    for (int k = 0; k < nx; ++k) {
        const double s = (k == 0 || 2 * k == nx) ? 0.0 : std::sin(2.0 * M_PI * k / nx);
        lamx[k] = -s * s / (h * h);
    }
    for (int k = 0; k < ny; ++k) {
        const double s = (k == 0 || 2 * k == ny) ? 0.0 : std::sin(2.0 * M_PI * k / ny);
        lamy[k] = -s * s / (h * h);
    }
    for (int ky = 0; ky < ny; ++ky)
        for (int kx = 0; kx < nx; ++kx) {
            const double lam = lamx[kx] + lamy[ky];
            dhat[std::int64_t(ky) * nx + kx] = lam == 0.0 ? Complex(0.0, 0.0)
                                                          : dhat[std::int64_t(ky) * nx + kx] / lam;
        }
    CArray phat = fft2_inverse(dhat, nx, ny);
    ScalarField p(div.spec);
    for (std::int64_t i = 0; i < p.values.size(); ++i) p.values[i] = phat[i].real();
    subtract_gradient(vel, p, BoundaryMode::periodic);
    diag.projection_iterations = 0;
    diag.projection_converged = true;
}

/// SOR on the composed operator div(grad p) = div u. Cells on the east
/// column hold p = 0 (outflow Dirichlet); the west/south Neumann ghosts
/// come from the gradient convention, and the divergence ghost makes the
/// north row couple in x only.
void project_channel(VelocityField& vel, const ScalarField& div, const FlowConfig& cfg,
                     double uscale, StepDiagnostics& diag) {
    const int nx = div.nx(), ny = div.ny();
    const double h = div.spec.dx;
    ScalarField p(div.spec);
    const double omega = 2.0 / (1.0 + std::sin(M_PI / std::max(nx, ny)));
    const double tol_abs = cfg.projection_tol * uscale / h;

    auto lap = [&](int x, int y) {
        const double pc = p(x, y);
        double acc = p(x + 1, y) - pc;                       // east link always present
        if (x > 0) acc -= pc - p(x - 1, y);
        if (y + 1 < ny) {
            acc += p(x, y + 1) - pc;
            if (y > 0) acc -= pc - p(x, y - 1);
        }
        return acc / (h * h);
    };
    auto degree = [&](int x, int y) {
        int n = 1 + (x > 0 ? 1 : 0);
        if (y + 1 < ny) n += 1 + (y > 0 ? 1 : 0);
        return double(n) / (h * h);
    };

    int sweeps = 0;
    double residual = 0.0;
    for (; sweeps < cfg.projection_iters; ++sweeps) {
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx - 1; ++x)
                p(x, y) += omega * (lap(x, y) - div(x, y)) / degree(x, y);
        residual = 0.0;
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx - 1; ++x)
                residual = std::max(residual, std::abs(div(x, y) - lap(x, y)));
        if (residual <= tol_abs) {
            ++sweeps;
            break;
        }
    }
    subtract_gradient(vel, p, BoundaryMode::channel);
    diag.projection_iterations = sweeps;
    diag.projection_residual = residual * h / uscale;
    diag.projection_converged = residual <= tol_abs;
}

} // namespace

VelocityField project_divergence_free(const VelocityField& vel, const BuildingMask& mask,
                                      const FlowConfig& cfg, StepDiagnostics* diag) {
    check_grid(vel.u.spec, mask.spec, "velocity and mask");
    if (vel.u.nx() < 2 || vel.u.ny() < 2)
        throw ContractError("flow: projection needs at least a 2x2 grid");
    cfg.validate(true);
    StepDiagnostics local;
    StepDiagnostics& d = diag ? *diag : local;

    VelocityField out = vel;
    zero_inside(out, mask);
    const ScalarField div = divergence(out, cfg.boundary_mode);
    const double uscale = std::max(out.u.values.abs().maxCoeff(), out.v.values.abs().maxCoeff());
    const double divmax = div.values.abs().maxCoeff();
    if (divmax == 0.0 || uscale == 0.0) {
        d.projection_iterations = 0;
        d.projection_residual = 0.0;
        d.projection_converged = true;
        return out;
    }

    if (cfg.boundary_mode == BoundaryMode::periodic) {
        project_periodic(out, div, d);
        const ScalarField res = divergence(out, BoundaryMode::periodic);
        d.projection_residual = res.values.abs().maxCoeff() * out.u.spec.dx / uscale;
        d.projection_converged = d.projection_residual <= cfg.projection_tol;
    } else {
        project_channel(out, div, cfg, uscale, d);
    }
    zero_inside(out, mask);
    return out;
}

FlowState step(const FlowState& state, const BuildingMask& mask, const FlowConfig& cfg,
               StepDiagnostics* diag, int step_index) {
    check_grid(state.velocity.u.spec, mask.spec, "state and mask");
    if (mask.nx() < 4 || mask.ny() < 4)
        throw ContractError("flow: step needs at least a 4x4 grid");
    cfg.validate(true);
    StepDiagnostics local;
    StepDiagnostics& d = diag ? *diag : local;
    const double h = mask.spec.dx;
    const ScalarField speed_before = magnitude(state.velocity);

    FlowState next;
    next.time = state.time + cfg.dt;

    // (1) advect everything with the incoming velocity
    next.velocity.u = semi_lagrangian_advect(state.velocity.u, state.velocity, cfg.dt, cfg.boundary_mode);
    next.velocity.v = semi_lagrangian_advect(state.velocity.v, state.velocity, cfg.dt, cfg.boundary_mode);
    if (state.theta)
        next.theta = semi_lagrangian_advect(*state.theta, state.velocity, cfg.dt, cfg.boundary_mode);

    // (2) diffusion, substepped to keep FTCS stable
    const ScalarField nu_t = eddy_viscosity(next.velocity, cfg.smagorinsky_cs, h);
    ScalarField coef_u(nu_t.spec);
    coef_u.values = nu_t.values + 1.0 / cfg.reynolds;
    ScalarField coef_theta(nu_t.spec);
    if (next.theta)
        coef_theta.values = nu_t.values / kTurbulentPrandtl + 1.0 / (cfg.reynolds * cfg.prandtl);
    double cmax = coef_u.values.maxCoeff();
    if (next.theta) cmax = std::max(cmax, coef_theta.values.maxCoeff());
    const double dt_stable = h * h / (4.0 * cmax);
    int nsub = 1;
    if (cfg.dt > dt_stable) {
        const double want = std::ceil(cfg.dt / dt_stable);
        nsub = want > kMaxDiffusionSubsteps ? kMaxDiffusionSubsteps : int(want);
        d.diffusion_substep_capped = want > kMaxDiffusionSubsteps;
        static bool warned = false;
        if (!warned) {
            std::fprintf(stderr,
                         "flow: dt %g exceeds the diffusion stability limit %g; "
                         "substepping x%d%s (warning printed once)\n",
                         cfg.dt, dt_stable, nsub, d.diffusion_substep_capped ? " (capped)" : "");
            warned = true;
        }
    }
    d.diffusion_substeps = nsub;
    const double dt_sub = cfg.dt / nsub;
    for (int s = 0; s < nsub; ++s) {
        diffuse_once(next.velocity.u, coef_u, dt_sub, cfg.boundary_mode);
        diffuse_once(next.velocity.v, coef_u, dt_sub, cfg.boundary_mode);
        if (next.theta) diffuse_once(*next.theta, coef_theta, dt_sub, cfg.boundary_mode);
    }

    // (3) buoyancy
    if (next.theta)
        next.velocity.v.values -= cfg.dt * (cfg.grashof / (cfg.reynolds * cfg.reynolds)) * next.theta->values;

    // (4) boundaries
    if (cfg.boundary_mode == BoundaryMode::channel) {
        apply_channel_velocity_bcs(next.velocity, cfg);
        if (next.theta) apply_channel_scalar_bcs(*next.theta);
    }

    // (5) projection + (6) mask zeroing
    next.velocity = project_divergence_free(next.velocity, mask, cfg, &d);
    if (next.theta) zero_inside(*next.theta, mask);

    bool finite = next.velocity.u.values.allFinite() && next.velocity.v.values.allFinite();
    if (next.theta) finite = finite && next.theta->values.allFinite();
    if (!finite)
        throw SimulationDiverged(step_index, "non-finite value after step");

    d.correlation = pearson(speed_before.values, magnitude(next.velocity).values);
    return next;
}

FlowState initial_state(const BuildingMask& mask, const FlowConfig& cfg) {
    cfg.validate(true);
    FlowState s;
    s.velocity = VelocityField(mask.spec);
    const int nx = mask.nx(), ny = mask.ny();
    const double ref = cfg.inflow_speed_ref;
    UnitRng rng(cfg.seed);
    const double amp = 0.05 * ref;
    for (int y = 0; y < ny; ++y) {
        const double base = cfg.boundary_mode == BoundaryMode::channel
                                ? power_law(ref, cfg.inflow_exponent, y, ny)
                                : ref;
        for (int x = 0; x < nx; ++x) {
            if (ref == 0.0) continue;
            s.velocity.u(x, y) = base + amp * (2.0 * rng.unit() - 1.0);
            s.velocity.v(x, y) = amp * (2.0 * rng.unit() - 1.0);
        }
    }
    zero_inside(s.velocity, mask);
    return s;
}

SimulationResult run_simulation(const BuildingMask& mask, const FlowConfig& cfg,
                                int n_steps, int record_every) {
    if (n_steps < 1) throw ContractError("flow: n_steps must be at least 1");
    if (record_every < 1) throw ContractError("flow: record_every must be at least 1");
    SimulationResult out;
    out.magnitude.spec = mask.spec;
    out.magnitude.dt = cfg.dt * record_every;
    FlowState state = initial_state(mask, cfg);
    for (int i = 0; i < n_steps; ++i) {
        StepDiagnostics d;
        state = step(state, mask, cfg, &d, i);
        out.diagnostics.push_back(d);
        if ((i + 1) % record_every == 0) {
            out.velocity.push_back(state.velocity);
            out.magnitude.frames.push_back(magnitude(state.velocity));
        }
    }
    return out;
}

} // namespace uwf
