#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "uwf/flow.hpp"
#include "uwf/rng.hpp"

using namespace uwf;

namespace {

VelocityField random_velocity(const GridSpec& spec, std::uint64_t seed, double amp = 1.0) {
    VelocityField v(spec);
    UnitRng rng(seed);
    for (std::int64_t i = 0; i < v.u.values.size(); ++i) {
        v.u.values[i] = amp * (2.0 * rng.unit() - 1.0);
        v.v.values[i] = amp * (2.0 * rng.unit() - 1.0);
    }
    return v;
}

void expect_config_error(nlohmann::json j, const std::string& key, bool allow_cs_override = false) {
    try {
        flow_config_from_json(j, allow_cs_override);
        FAIL_CHECK("expected ContractError mentioning \"" << key << "\"");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
}

FlowConfig periodic_config() {
    FlowConfig cfg;
    cfg.boundary_mode = BoundaryMode::periodic;
    cfg.smagorinsky_cs = 0.0;
    cfg.inflow_speed_ref = 0.0;
    cfg.projection_tol = 1e-8;
    return cfg;
}

double kinetic_energy(const VelocityField& vel) {
    const double h = vel.u.spec.dx;
    return 0.5 * (vel.u.values.square().sum() + vel.v.values.square().sum()) * h * h;
}

} // namespace

TEST_CASE("flow config json round-trips and rejects bad documents") {
    FlowConfig cfg;
    cfg.reynolds = 250.0;
    cfg.seed = 12345;
    cfg.boundary_mode = BoundaryMode::periodic;
    const nlohmann::json j = flow_config_to_json(cfg);
    const FlowConfig back = flow_config_from_json(j);
    CHECK(back.reynolds == cfg.reynolds);
    CHECK(back.seed == cfg.seed);
    CHECK(back.boundary_mode == BoundaryMode::periodic);
    CHECK(back.projection_iters == cfg.projection_iters);

    nlohmann::json good = flow_config_to_json(FlowConfig{});

    auto without = [&](const std::string& key) {
        nlohmann::json copy = good;
        copy.erase(key);
        return copy;
    };
    for (const std::string key : {"reynolds", "grashof", "prandtl", "smagorinsky_cs", "dt",
                                  "inflow_speed_ref", "inflow_exponent", "boundary_mode",
                                  "projection_iters", "projection_tol", "seed"})
        expect_config_error(without(key), key);

    nlohmann::json extra = good;
    extra["extra_key"] = 1.0;
    expect_config_error(extra, "extra_key");

    auto with = [&](const std::string& key, nlohmann::json value) {
        nlohmann::json copy = good;
        copy[key] = std::move(value);
        return copy;
    };
    expect_config_error(with("dt", 0.0), "dt");
    expect_config_error(with("dt", "0.1"), "dt");
    expect_config_error(with("reynolds", -10.0), "reynolds");
    expect_config_error(with("prandtl", 0.0), "prandtl");
    expect_config_error(with("projection_tol", 0.0), "projection_tol");
    expect_config_error(with("projection_iters", 0), "projection_iters");
    expect_config_error(with("projection_iters", 2.5), "projection_iters");
    expect_config_error(with("boundary_mode", "diagonal"), "diagonal");
    expect_config_error(with("seed", -3), "seed");
    expect_config_error(with("inflow_speed_ref", -1.0), "inflow_speed_ref");

    // c_s range is enforced unless explicitly overridden; negative never is.
    expect_config_error(with("smagorinsky_cs", 0.5), "smagorinsky_cs");
    CHECK(flow_config_from_json(with("smagorinsky_cs", 0.5), true).smagorinsky_cs == 0.5);
    CHECK(flow_config_from_json(with("smagorinsky_cs", 0.0), true).smagorinsky_cs == 0.0);
    expect_config_error(with("smagorinsky_cs", -0.1), "smagorinsky_cs", true);

    const std::string path = "/tmp/uwf_flow_cfg.json";
    {
        std::ofstream f(path);
        f << good.dump();
    }
    const FlowConfig loaded = load_flow_config(path);
    CHECK(loaded.dt == FlowConfig{}.dt);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_flow_config("/tmp/uwf_flow_missing.json"), FormatError);
    {
        std::ofstream f(path);
        f << "{not json";
    }
    CHECK_THROWS_AS(load_flow_config(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("eddy viscosity: uniform flow, linear shear, cs scaling") {
    const GridSpec spec(16, 12, 0.5);

    VelocityField uniform(spec);
    uniform.u.values.setConstant(3.7);
    uniform.v.values.setConstant(-1.2);
    CHECK((eddy_viscosity(uniform, 0.17, spec.dx).values == 0.0).all());

    // u = gamma * y, v = 0 has |S| = gamma exactly, interior and edges alike.
    const double gamma = 0.37;
    VelocityField shear(spec);
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x < spec.nx; ++x)
            shear.u(x, y) = gamma * spec.center_y(y);
    const ScalarField nu = eddy_viscosity(shear, 0.2, spec.dx);
    const double expected = (0.2 * spec.dx) * (0.2 * spec.dx) * gamma;
    CHECK((nu.values - expected).abs().maxCoeff() <= 1e-10);

    const VelocityField rnd = random_velocity(spec, 11);
    const ScalarField nu1 = eddy_viscosity(rnd, 0.1, spec.dx);
    const ScalarField nu2 = eddy_viscosity(rnd, 0.2, spec.dx);
    CHECK(((nu2.values - 4.0 * nu1.values).abs() <= 1e-12 * nu2.values.abs().max(1e-300)).all());
}

TEST_CASE("semi-lagrangian advection: fixed points and exact shifts") {
    const GridSpec spec(8, 8, 1.0);
    ScalarField f(spec);
    UnitRng rng(5);
    for (std::int64_t i = 0; i < f.values.size(); ++i) f.values[i] = rng.unit();

    VelocityField zero(spec);
    const ScalarField same = semi_lagrangian_advect(f, zero, 0.25, BoundaryMode::periodic);
    CHECK((same.values == f.values).all());
    const ScalarField same2 = semi_lagrangian_advect(f, zero, 0.25, BoundaryMode::channel);
    CHECK((same2.values == f.values).all());

    // u*dt/dx == 1 exactly: the field shifts circularly by one cell in x.
    VelocityField unif(spec);
    unif.u.values.setConstant(2.0);
    const ScalarField shifted = semi_lagrangian_advect(f, unif, 0.5, BoundaryMode::periodic);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            CHECK(shifted(x, y) == f((x + 7) % 8, y));

    VelocityField bad(GridSpec(4, 4, 1.0));
    CHECK_THROWS_AS(semi_lagrangian_advect(f, bad, 0.1, BoundaryMode::periodic), ContractError);
}

TEST_CASE("advected gaussian blob tracks the analytic trajectory") {
    const GridSpec spec(64, 64, 1.0);
    ScalarField f(spec);
    const double x0 = 16.0, y0 = 20.0, sigma = 2.0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            f(x, y) = std::exp(-((x - x0) * (x - x0) + (y - y0) * (y - y0)) / (2.0 * sigma * sigma));

    VelocityField vel(spec);
    vel.u.values.setConstant(0.5);
    vel.v.values.setConstant(0.25);
    const double dt = 0.5;
    const int n = 100;
    ScalarField g = f;
    for (int i = 0; i < n; ++i) g = semi_lagrangian_advect(g, vel, dt, BoundaryMode::periodic);

    double m = 0.0, mx = 0.0, my = 0.0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            m += g(x, y);
            mx += g(x, y) * x;
            my += g(x, y) * y;
        }
    const double cx = mx / m, cy = my / m;
    const double ex = x0 + n * 0.5 * dt / spec.dx, ey = y0 + n * 0.25 * dt / spec.dx;
    CHECK(std::abs(cx - ex) <= 1.0);
    CHECK(std::abs(cy - ey) <= 1.0);
}

TEST_CASE("advection obeys the discrete maximum principle") {
    const GridSpec spec(32, 32, 1.0);
    ScalarField f(spec);
    UnitRng rng(3);
    for (std::int64_t i = 0; i < f.values.size(); ++i) f.values[i] = 2.0 * rng.unit() - 1.0;
    const VelocityField vel = random_velocity(spec, 4, 1.5);
    const double m0 = f.values.abs().maxCoeff();
    for (int i = 0; i < 20; ++i) {
        f = semi_lagrangian_advect(f, vel, 0.3, BoundaryMode::periodic);
        CHECK(f.values.abs().maxCoeff() <= m0 * (1.0 + 1e-12));
    }
}

TEST_CASE("periodic projection is spectrally exact and idempotent") {
    const GridSpec spec(64, 32, 0.5);
    const BuildingMask mask(spec);
    FlowConfig cfg = periodic_config();

    // constant flow is already divergence-free: returned untouched
    VelocityField constant(spec);
    constant.u.values.setConstant(1.25);
    constant.v.values.setConstant(-0.5);
    const VelocityField still = project_divergence_free(constant, mask, cfg);
    CHECK((still.u.values == constant.u.values).all());
    CHECK((still.v.values == constant.v.values).all());

    // uniform-divergence ramp
    VelocityField ramp(spec);
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x < spec.nx; ++x)
            ramp.u(x, y) = x * spec.dx;
    StepDiagnostics d;
    const VelocityField pr = project_divergence_free(ramp, mask, cfg, &d);
    CHECK(divergence(pr, BoundaryMode::periodic).values.abs().maxCoeff() <= 1e-8);
    CHECK(d.projection_converged);

    // random field: divergence drops to roundoff, projecting twice is a no-op
    const VelocityField rnd = random_velocity(spec, 7);
    const VelocityField once = project_divergence_free(rnd, mask, cfg, &d);
    CHECK(divergence(once, BoundaryMode::periodic).values.abs().maxCoeff() <= 1e-8);
    CHECK(d.projection_residual <= cfg.projection_tol);
    const VelocityField twice = project_divergence_free(once, mask, cfg);
    CHECK((twice.u.values - once.u.values).abs().maxCoeff() <= 1e-12);
    CHECK((twice.v.values - once.v.values).abs().maxCoeff() <= 1e-12);

    // spectral solve needs power-of-two grids
    const GridSpec odd(48, 40, 1.0);
    CHECK_THROWS_AS(project_divergence_free(random_velocity(odd, 1), BuildingMask(odd), cfg),
                    ContractError);
}

TEST_CASE("channel projection converges under the configured tolerance") {
    const GridSpec spec(48, 40, 1.0);
    const BuildingMask mask(spec);
    FlowConfig cfg;
    cfg.boundary_mode = BoundaryMode::channel;
    cfg.projection_tol = 1e-4;
    cfg.projection_iters = 5000;

    const VelocityField rnd = random_velocity(spec, 9);
    StepDiagnostics d;
    const VelocityField out = project_divergence_free(rnd, mask, cfg, &d);
    CHECK(d.projection_converged);
    CHECK(d.projection_residual <= cfg.projection_tol);
    CHECK(d.projection_iterations <= cfg.projection_iters);

    const double umax = std::max(out.u.values.abs().maxCoeff(), out.v.values.abs().maxCoeff());
    const ScalarField div = divergence(out, BoundaryMode::channel);
    double dmax = 0.0;   // solved cells: the east column holds the outflow pin
    for (int y = 0; y < spec.ny; ++y)
        for (int x = 0; x + 1 < spec.nx; ++x)
            dmax = std::max(dmax, std::abs(div(x, y)));
    CHECK(dmax * spec.dx <= 10.0 * cfg.projection_tol * umax);
    CHECK(dmax <= 1e-3 * umax);

    // an exhausted budget is reported, not thrown
    cfg.projection_iters = 3;
    StepDiagnostics d3;
    project_divergence_free(rnd, mask, cfg, &d3);
    CHECK_FALSE(d3.projection_converged);
    CHECK(d3.projection_iterations == 3);

    // masked cells come back exactly zero
    BuildingMask blocky(spec);
    for (int y = 10; y < 18; ++y)
        for (int x = 12; x < 20; ++x) blocky(x, y) = 1;
    cfg.projection_iters = 5000;
    const VelocityField masked = project_divergence_free(rnd, blocky, cfg);
    for (int y = 10; y < 18; ++y)
        for (int x = 12; x < 20; ++x) {
            CHECK(masked.u(x, y) == 0.0);
            CHECK(masked.v(x, y) == 0.0);
        }

    const VelocityField small = random_velocity(GridSpec(8, 8, 1.0), 2);
    CHECK_THROWS_AS(project_divergence_free(small, mask, cfg), ContractError);
}

TEST_CASE("zero velocity with no inflow is a fixed point of step") {
    for (const BoundaryMode mode : {BoundaryMode::channel, BoundaryMode::periodic}) {
        const GridSpec spec(16, 16, 1.0);
        const BuildingMask mask(spec);
        FlowConfig cfg;
        cfg.boundary_mode = mode;
        cfg.inflow_speed_ref = 0.0;
        cfg.smagorinsky_cs = 0.17;
        FlowState s;
        s.velocity = VelocityField(spec);
        for (int i = 0; i < 5; ++i) {
            StepDiagnostics d;
            s = step(s, mask, cfg, &d, i);
            CHECK((s.velocity.u.values == 0.0).all());
            CHECK((s.velocity.v.values == 0.0).all());
            CHECK(d.correlation == 1.0);
        }
        CHECK(s.time == doctest::Approx(5 * cfg.dt));
    }
}

TEST_CASE("taylor-green: viscous decay rate and momentum conservation") {
    const int N = 64;
    const double h = 2.0 * M_PI / N;
    const GridSpec spec(N, N, h);
    const BuildingMask mask(spec);
    FlowConfig cfg = periodic_config();
    cfg.reynolds = 1.0;     // nu = 1 so 50 steps of dt=0.002 give a visible decay
    cfg.dt = 0.002;

    FlowState s;
    s.velocity = VelocityField(spec);
    for (int y = 0; y < N; ++y)
        for (int x = 0; x < N; ++x) {
            const double X = spec.center_x(x), Y = spec.center_y(y);
            s.velocity.u(x, y) = std::sin(X) * std::cos(Y);
            s.velocity.v(x, y) = -std::cos(X) * std::sin(Y);
        }

    s = step(s, mask, cfg, nullptr, 0);
    const double ke1 = kinetic_energy(s.velocity);
    const double t1 = s.time;
    double ke_prev = ke1;
    for (int i = 1; i < 50; ++i) {
        const double su = s.velocity.u.values.sum();
        const double sv = s.velocity.v.values.sum();
        s = step(s, mask, cfg, nullptr, i);
        CHECK(std::abs(s.velocity.u.values.sum() - su) <= 1e-10);
        CHECK(std::abs(s.velocity.v.values.sum() - sv) <= 1e-10);
        const double ke = kinetic_energy(s.velocity);
        CHECK(ke < ke_prev);
        ke_prev = ke;
    }
    // KE of the k=1 vortex decays at 4*nu*k^2 (amplitude at 2*nu*k^2)
    const double rate = -std::log(ke_prev / ke1) / (s.time - t1);
    CHECK(std::abs(rate - 4.0) / 4.0 <= 0.2);
}

TEST_CASE("channel flow develops a wake behind a square obstacle") {
    const GridSpec spec(64, 48, 1.0);
    BuildingMask mask(spec);
    for (int y = 20; y < 28; ++y)
        for (int x = 16; x < 24; ++x) mask(x, y) = 1;
    FlowConfig cfg;
    cfg.boundary_mode = BoundaryMode::channel;
    cfg.reynolds = 1000.0;
    cfg.smagorinsky_cs = 0.17;
    cfg.dt = 0.05;
    cfg.inflow_speed_ref = 7.8;
    cfg.inflow_exponent = 0.25;
    cfg.projection_iters = 600;
    cfg.seed = 3;

    const SimulationResult res = run_simulation(mask, cfg, 300, 300);
    REQUIRE(res.magnitude.size() == 1);
    const ScalarField& speed = res.magnitude.frames.back();
    double wake = 0.0, inflow = 0.0;
    int n = 0;
    for (int y = 20; y < 28; ++y)
        for (int x = 26; x < 34; ++x) {
            wake += speed(x, y);
            inflow += speed(1, y);
            ++n;
        }
    wake /= n;
    inflow /= n;
    CHECK(wake < 0.7 * inflow);

    for (int y = 20; y < 28; ++y)
        for (int x = 16; x < 24; ++x) {
            CHECK(res.velocity.back().u(x, y) == 0.0);
            CHECK(res.velocity.back().v(x, y) == 0.0);
        }
    CHECK(res.diagnostics.back().projection_converged);
    CHECK(res.diagnostics.back().correlation > 0.9);
}

TEST_CASE("non-finite fields raise SimulationDiverged with the step index") {
    const GridSpec spec(8, 8, 1.0);
    const BuildingMask mask(spec);
    FlowConfig cfg = periodic_config();
    cfg.reynolds = 1.0;
    cfg.dt = 0.5;

    FlowState s;
    s.velocity = VelocityField(spec);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            s.velocity.u(x, y) = ((x + y) % 2 ? 1.0 : -1.0) * 1e308;
    try {
        step(s, mask, cfg, nullptr, 7);
        FAIL_CHECK("expected SimulationDiverged");
    } catch (const SimulationDiverged& e) {
        CHECK(e.step == 7);
    }

    // a diffusion coefficient far beyond the substep cap blows up and is
    // reported with the failing step index by run_simulation
    FlowConfig hot;
    hot.boundary_mode = BoundaryMode::channel;
    hot.reynolds = 1e-12;
    hot.dt = 0.1;
    hot.inflow_speed_ref = 1.0;
    hot.projection_iters = 50;
    try {
        run_simulation(BuildingMask(GridSpec(16, 16, 1.0)), hot, 5, 1);
        FAIL_CHECK("expected SimulationDiverged");
    } catch (const SimulationDiverged& e) {
        CHECK(e.step >= 0);
    }
}

TEST_CASE("run_simulation: frame cadence, determinism, argument checks") {
    const GridSpec spec(16, 16, 1.0);
    BuildingMask mask(spec);
    for (int y = 6; y < 10; ++y)
        for (int x = 4; x < 8; ++x) mask(x, y) = 1;
    FlowConfig cfg;
    cfg.boundary_mode = BoundaryMode::channel;
    cfg.inflow_speed_ref = 2.0;
    cfg.dt = 0.05;
    cfg.seed = 42;
    cfg.projection_iters = 400;

    const SimulationResult a = run_simulation(mask, cfg, 10, 2);
    CHECK(a.magnitude.size() == 5);
    CHECK(a.velocity.size() == 5);
    CHECK(int(a.diagnostics.size()) == 10);
    CHECK(a.magnitude.dt == doctest::Approx(0.1));

    const SimulationResult b = run_simulation(mask, cfg, 10, 2);
    for (int i = 0; i < 5; ++i) {
        CHECK((a.magnitude.frames[i].values == b.magnitude.frames[i].values).all());
        CHECK((a.velocity[i].u.values == b.velocity[i].u.values).all());
        CHECK((a.velocity[i].v.values == b.velocity[i].v.values).all());
    }
    for (int y = 6; y < 10; ++y)
        for (int x = 4; x < 8; ++x)
            CHECK(a.magnitude.frames.back()(x, y) == 0.0);

    CHECK_THROWS_AS(run_simulation(mask, cfg, 0, 1), ContractError);
    CHECK_THROWS_AS(run_simulation(mask, cfg, 10, 0), ContractError);
}
