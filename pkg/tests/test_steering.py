import numpy as np
import pytest

from nlscontrol.dynamics import EvolutionParams, evolve
from nlscontrol.errors import DecayTooSlowError, SteeringError
from nlscontrol.linear_control import ControlGeometry
from nlscontrol.nonlinear_control import local_null_control
from nlscontrol.spectral import (
    ConstantCutoff, TorusGrid, make_bump, random_field, sample, to_spectral,
)
from nlscontrol.steering import (
    RampProfile, control_parity_defect, damped_observability_ratio,
    damped_observability_scan, damped_trajectory, decay_ensemble, decay_rate_fit,
    fit_exponential, stabilize_until, steer,
)

OMEGA = make_bump((0.0, np.pi / 2), (np.pi / 8, 3 * np.pi / 8))


@pytest.fixture(scope="module")
def geom():
    return ControlGeometry.build(32, T=1.0, dt=1e-3)


def unit_field(grid, seed, norm=1.0, kmax=4):
    u = random_field(grid, np.random.default_rng(seed), kmax=kmax)
    return u * (norm / u.norm())


# -- fits ----------------------------------------------------------------------------------

def test_fit_synthetic_exponential():
    t = np.linspace(0, 10, 1001)
    fit = fit_exponential(t, 3.0 * np.exp(-0.3 * t), window=(1, 10))
    assert fit.gamma == pytest.approx(0.3, abs=1e-6)
    assert fit.C == pytest.approx(1.0, rel=1e-9)
    assert fit.r2 >= 1 - 1e-9
    assert fit.as_dict()["t_a"] == 1


def test_fit_constant_norm():
    t = np.linspace(0, 10, 101)
    fit = fit_exponential(t, np.full_like(t, 2.0))
    assert abs(fit.gamma) <= 1e-9 and fit.r2 == 1.0


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_exponential([0, 1, 2], [1, 1, 1], window=(5, 6))
    with pytest.raises(ValueError):
        fit_exponential([0, 1, 2], [1, 0, 1])


def test_decay_fit_on_trace():
    grid = TorusGrid(32)
    tr = damped_trajectory(unit_field(grid, 0), ConstantCutoff(), 0.0, 2.0, dt=1e-2)
    fit = decay_rate_fit(tr)
    assert fit.gamma == pytest.approx(1.0, rel=1e-10)


def test_decay_ensemble_defocusing():
    grid = TorusGrid(32)
    fields = [unit_field(grid, s) for s in range(3)]
    fits = decay_ensemble(fields, OMEGA, 1.0, t1=10.0, dt=2e-3)
    assert all(f.gamma > 0 and f.r2 >= 0.95 for f in fits)


# -- damping profile -------------------------------------------------------------------------

def test_ramp_profile():
    p = RampProfile(0.5, t0=1.0)
    assert p(np.array([1.0]))[0] == 0 and p(np.array([1.5]))[0] == 1
    t = np.linspace(1.0, 1.5, 200)
    assert np.all(np.diff(p(t)) >= 0)
    p.switch_off(3.0)
    assert p(np.array([3.0]))[0] == 1 and p(np.array([3.5]))[0] == 0
    assert p(np.array([2.9999]))[0] == pytest.approx(p(np.array([3.0001]))[0], abs=1e-6)
    q = RampProfile(0.5)
    q.switch_off(0.25)
    assert q.level == pytest.approx(0.5)
    assert q(np.array([0.5]))[0] < q.level


# -- stabilization ---------------------------------------------------------------------------

def test_stabilize_zero_data():
    grid = TorusGrid(32)
    res = stabilize_until(grid.zeros(), OMEGA, 1.0, 1e-2)
    assert res.t_star == 0 and res.control.n_steps == 0
    assert res.final.norm() == 0


def test_stabilize_closed_form():
    grid = TorusGrid(32)
    u0 = unit_field(grid, 1, norm=2.0)
    dt, thr = 1e-3, 1e-2
    res = stabilize_until(u0, ConstantCutoff(), 0.0, thr, dt=dt, ramp=0.0)
    assert abs(res.t_star - np.log(2.0 / thr)) <= dt


def test_stabilize_replay():
    grid = TorusGrid(64)
    u0 = unit_field(grid, 2, kmax=16)
    res = stabilize_until(u0, OMEGA, 1.0, 1e-2, dt=2e-3, t_max=100.0)
    assert np.isfinite(res.t_star) and res.final.norm() <= 1e-2
    replay = evolve(u0, 0.0, res.t_end, EvolutionParams(lam=1.0, dt=2e-3), res.control)
    assert np.max(np.abs(replay.coeffs - res.trace.coeffs)) <= 1e-8
    outside = sample(OMEGA, grid) == 0
    assert np.all(res.control.values[:, outside] == 0)
    # damping is back off at the end of the run
    assert res.profile(np.array([res.t_end]))[0] == 0


def test_stabilize_too_slow():
    grid = TorusGrid(32)
    with pytest.raises(DecayTooSlowError) as exc:
        stabilize_until(unit_field(grid, 3), OMEGA, 1.0, 1e-6, t_max=1.0, dt=1e-2)
    assert exc.value.fit is not None and exc.value.trace is not None
    with pytest.raises(ValueError):
        stabilize_until(unit_field(grid, 3), OMEGA, 1.0, 0.0)


# -- damped observability ----------------------------------------------------------------------

def test_damped_observability_closed_form():
    grid = TorusGrid(32)
    T = 2.0
    num, den = damped_observability_ratio(unit_field(grid, 4), ConstantCutoff(), 0.0, T)
    assert num / den == pytest.approx(2 / (1 - np.exp(-2 * T)), rel=1e-6)


def test_damped_observability_far_data():
    grid = TorusGrid(64)
    blob = make_bump((np.pi, 3 * np.pi / 2), (1.2 * np.pi, 1.3 * np.pi))
    u0 = to_spectral(sample(blob, grid).astype(complex), grid)
    scan = damped_observability_scan(OMEGA, 1.0, 2.0, [u0])
    assert np.isfinite(scan.constant) and not scan.flagged


def test_damped_observability_nested_ensembles():
    from nlscontrol.config import preset
    from nlscontrol.experiments import run_experiment
    sc = run_experiment(preset("damped-observability")).scalars
    for tag in ("+1", "-1"):
        c1, c5 = sc[f"C[{tag},R0=1]"], sc[f"C[{tag},R0=5]"]
        assert np.isfinite(c5) and c5 >= c1 > 0


def test_damped_observability_ensemble_finite():
    grid = TorusGrid(32)
    small = damped_observability_scan(OMEGA, -1.0, 2.0, [unit_field(grid, s, 1.0) for s in range(3)])
    assert len(small.ratios) == 3 and np.all(np.isfinite(small.ratios))


# -- steering ------------------------------------------------------------------------------------

def test_steer_zero_to_zero(geom):
    plan = steer(geom.grid.zeros(), geom.grid.zeros(), geom, 1.0, gate=0.05)
    assert np.all(plan.control.values == 0)
    assert plan.end_error == 0


def test_steer_small_data_is_null_control(geom):
    u0 = unit_field(geom.grid, 5, norm=1e-2)
    plan = steer(u0, geom.grid.zeros(), geom, 1.0, gate=0.05)
    sol = local_null_control(u0, geom, 1.0)
    assert plan.phases[0].info["skipped"]
    np.testing.assert_array_equal(plan.control.values, sol.control.values)
    assert plan.T_total == pytest.approx(geom.T)


def test_steer_two_points(geom):
    u0 = unit_field(geom.grid, 6, norm=0.2)
    u1 = unit_field(geom.grid, 7, norm=0.2)
    plan = steer(u0, u1, geom, 1.0, gate=0.02, keep_trace=True)
    assert plan.end_error <= 1e-6
    assert plan.endpoint_values() == (0.0, 0.0)
    outside = sample(geom.a, geom.grid) == 0
    assert np.all(plan.control.values[:, outside] == 0)
    names = [p.name for p in plan.phases]
    assert names == ["stabilize", "null_control", "reversed_null_control"]
    assert plan.manifest()["T_total"] == plan.T_total


def test_steer_verification_failure(geom):
    u0 = unit_field(geom.grid, 6, norm=0.2)
    with pytest.raises(SteeringError) as exc:
        steer(u0, geom.grid.zeros(), geom, 1.0, gate=0.02, tol=1e-30)
    assert exc.value.phase == "verification" and exc.value.plan is not None


def test_control_parity_defect_zero_for_odd(geom):
    from nlscontrol.dynamics import StepSource
    vals = np.sin(geom.grid.x)[None, :] * np.ones((4, 1))
    src = StepSource(0.0, 0.1, vals.astype(complex))
    assert control_parity_defect(src, geom.grid, "odd") <= 1e-30
    assert control_parity_defect(src, geom.grid, "even") > 0.1
