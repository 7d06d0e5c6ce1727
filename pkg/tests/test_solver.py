import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sigma_evolve import harness
from sigma_evolve.cli import read_config
from sigma_evolve.solver import (NORM_COLUMNS, SolverConfig, Trajectory, evolve, nonlinearity,
                                 picard_solve, step, weighted_solution_norm)
from sigma_evolve.spectral import Field, Grid, StatePair, build_propagator, linear_propagate, lq_norm


def gaussian_state(grid, eps, width=1.0):
    r2 = sum(x * x for x in grid.mesh())
    u = Field(grid, values=eps * np.exp(-r2 / width ** 2))
    return StatePair(u, Field(grid, values=0.5 * eps * np.exp(-r2 / width ** 2)))


class TestConfig:
    def test_whole_steps(self):
        with pytest.raises(ValueError):
            SolverConfig(p=2, dt=0.3, T=1.0)
        assert SolverConfig(p=2, dt=0.1, T=1.0).n_steps == 10

    @pytest.mark.parametrize("kw", [dict(p=1), dict(dt=0), dict(integrator="RK4"), dict(oversample=0.5)])
    def test_invalid(self, kw):
        base = dict(p=2, dt=0.1, T=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            SolverConfig(**base)

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            SolverConfig.from_dict({"p": 2, "dt": 0.1, "T": 1.0, "cfl": 1})


class TestNonlinearity:
    def test_zero(self):
        g = Grid((16, 16), 2.0)
        assert not np.any(nonlinearity(Field.zeros(g), 3).values)

    def test_constant(self):
        g = Grid((16,), 2.0)
        out = nonlinearity(Field(g, values=np.full(16, -2.0)), 3)
        assert np.allclose(out.values, 8.0, atol=1e-12)

    def test_sine_squared(self):
        g = Grid((64,), math.pi)
        x = g.axis_coords(0)
        out = nonlinearity(Field(g, values=np.sin(x)), 2)
        assert np.max(np.abs(out.values - (1 - np.cos(2 * x)) / 2)) < 1e-10

    def test_non_finite_rejected(self):
        g = Grid((8,), 1.0)
        with pytest.raises(ValueError):
            nonlinearity(Field(g, values=np.array([np.nan] + [0.0] * 7)), 2)

    def test_source_is_nonnegative_on_grid_without_padding(self):
        g = Grid((32,), 3.0)
        f = Field(g, values=np.random.default_rng(0).standard_normal(32))
        assert np.all(nonlinearity(f, 1.7, oversample=1.0).values >= -1e-12)


def test_step_without_source_is_linear_flow():
    g = Grid((16, 16), 4.0)
    s0 = gaussian_state(g, 0.3)
    cfg = SolverConfig(p=3, dt=0.2, T=1.0, nonlinear=False)
    table = build_propagator(g, 1.0, 0.2)
    a, b = s0, s0
    for _ in range(5):
        a = step(a, table, cfg)
        b = linear_propagate(b, table)
        for x, y in ((a.u, b.u), (a.v, b.v)):
            assert np.max(np.abs(x.values - y.values)) <= 1e-14 * max(1.0, np.max(np.abs(y.values)))


def _run(state, dt, T, p=3.0, integrator="ETD2RK"):
    cfg = SolverConfig(p=p, dt=dt, T=T, integrator=integrator)
    table = build_propagator(state.grid, 1.0, dt)
    s = state
    for _ in range(cfg.n_steps):
        s = step(s, table, cfg)
    return s


def test_local_error_order():
    g = Grid((32,), 6.0)
    s0 = gaussian_state(g, 0.8)
    errs = []
    for h in (0.2, 0.1, 0.05):
        one = _run(s0, h, h)
        two = _run(s0, h / 2, h)
        # u gains an extra power of h by integration; the state error is led by v
        errs.append(max(np.max(np.abs(one.u.values - two.u.values)),
                        np.max(np.abs(one.v.values - two.v.values))))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(6.0 < r < 10.0 for r in ratios), ratios


def test_global_second_order():
    g = Grid((64,), 8.0)
    s0 = gaussian_state(g, 0.8)
    ref = _run(s0, 1 / 256, 1.0)
    errs = [np.max(np.abs(_run(s0, h, 1.0).u.values - ref.u.values)) for h in (0.1, 0.05, 0.025)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(abs(r - 4) <= 0.5 for r in ratios), ratios


def test_constant_state_matches_scalar_ode():
    g = Grid((8, 8), 3.0)
    eps, p, h = 0.5, 3.0, 0.025
    s0 = StatePair(Field(g, values=np.full(g.sizes, eps)), Field.zeros(g))
    s1 = _run(s0, h, h, p=p)
    ode = solve_ivp(lambda t, y: [y[1], abs(y[0]) ** p], (0, h), [eps, 0.0],
                    method="DOP853", rtol=1e-13, atol=1e-15)
    assert abs(s1.u.mean() - ode.y[0, -1]) < 1e-6
    assert abs(s1.v.mean() - ode.y[1, -1]) < 1e-6


def test_zero_data_evolves_to_zero():
    g = Grid((8, 8, 8), 4.0)
    traj = evolve(StatePair.zeros(g), SolverConfig(p=3, dt=0.5, T=5.0))
    assert traj.completed and not np.any(traj.norms)


def test_linear_evolve_matches_propagator():
    g = Grid((32, 32), 10.0)
    s0 = gaussian_state(g, 1.0, 2.0)
    cfg = SolverConfig(p=2, dt=0.5, T=5.0, nonlinear=False)
    traj = evolve(s0, cfg)
    exact = linear_propagate(s0, build_propagator(g, 1.0, 5.0))
    assert math.isclose(traj.column("norm_lq")[-1], lq_norm(exact.u, 2), rel_tol=1e-12)
    assert np.allclose(traj.final_state.u.values, exact.u.values, atol=1e-13)


def test_blowup_detected():
    g = Grid((8, 8), 3.0)
    s0 = StatePair(Field(g, values=np.full(g.sizes, 2.0)), Field(g, values=np.full(g.sizes, 1.0)))
    traj = evolve(s0, SolverConfig(p=3, dt=0.01, T=5.0, blowup_threshold=1e4))
    assert traj.outcome == "BlowUp" and 0 < traj.blowup_time < 5.0


def test_trajectory_csv(tmp_path):
    g = Grid((8,), 2.0)
    traj = evolve(gaussian_state(g, 0.1), SolverConfig(p=2, dt=0.5, T=2.0))
    path = traj.to_csv(tmp_path / "t.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "t," + ",".join(NORM_COLUMNS) and len(lines) == 6


class TestWeightedNorm:
    def _traj(self, values):
        t = np.arange(len(values), dtype=float)
        norms = np.zeros((len(values), len(NORM_COLUMNS)))
        norms[:, 0] = values
        norms[:, 3] = values
        return Trajectory(t, norms, "Completed")

    def test_zero(self):
        assert weighted_solution_norm(self._traj([0.0, 0.0, 0.0]), (0.5, 1.5)) == 0.0

    def test_unweighted_is_plain_sup(self):
        assert weighted_solution_norm(self._traj([1.0, 3.0, 2.0]), (0, 0)) == 6.0

    def test_blowup_rejected(self):
        with pytest.raises(ValueError):
            weighted_solution_norm(Trajectory(np.zeros(1), np.zeros((1, 5)), "BlowUp", 1.0), (0, 0))


def test_linear_weighted_norm_stabilizes():
    g = Grid((32, 32, 32), 40.0)
    r2 = sum(x * x for x in g.mesh())
    u0 = Field(g, values=0.2 * np.exp(-r2 / 9)).minus_mean()
    u1 = Field(g, values=0.2 * np.exp(-r2 / 9)).minus_mean()
    traj = evolve(StatePair(u0, u1), SolverConfig(p=3, dt=0.5, T=100.0, nonlinear=False))
    m = traj.times <= 50
    w50 = weighted_solution_norm(Trajectory(traj.times[m].copy(), traj.norms[m].copy(), "Completed"), (0.5, 1.5))
    w100 = weighted_solution_norm(traj, (0.5, 1.5))
    assert abs(w100 - w50) / w50 < 0.1


class TestPicard:
    def test_zero_data(self):
        g = Grid((8, 8), 2.0)
        res = picard_solve(StatePair.zeros(g), SolverConfig(p=3, dt=0.5, T=2.0), K=3)
        assert res.distances == [0.0, 0.0, 0.0] and res.status == "Completed"

    def test_small_data_contracts(self):
        g = Grid((16, 16, 16), 12.0)
        res = picard_solve(gaussian_state(g, 0.2, 2.0), SolverConfig(p=3, dt=0.25, T=5.0), K=4,
                           weights=(0.5, 1.5))
        assert res.contractive and all(r < 1 for r in res.ratios)

    def test_large_positive_data_not_contractive(self):
        g = Grid((16, 16, 16), 12.0)
        res = picard_solve(gaussian_state(g, 5.0, 3.0), SolverConfig(p=1.5, dt=0.25, T=10.0), K=8)
        assert res.status == "NotContractive"

    def test_k_validation(self):
        with pytest.raises(ValueError):
            picard_solve(StatePair.zeros(Grid((8,), 1.0)), SolverConfig(p=2, dt=0.5, T=1.0), K=1)


@pytest.mark.slow
def test_small_data_weighted_norm_uniform_in_horizon():
    spec, _ = harness.parse_config(read_config("nl_n3_p3"))
    spec = harness.replace(spec, solver=spec.solver.replace(T=200.0, record_every=10))
    state0, _ = spec.initial_state()
    traj = evolve(state0, spec.solver)
    assert traj.completed
    weights = (0.5, 1.5)
    vals = []
    for horizon in (50.0, 100.0, 200.0):
        m = traj.times <= horizon + 1e-9
        vals.append(weighted_solution_norm(Trajectory(traj.times[m].copy(), traj.norms[m].copy(), "Completed"), weights))
    assert (max(vals) - min(vals)) / min(vals) < 0.1, vals


@pytest.mark.slow
def test_nonlinear_run_stays_within_factor_two_of_linear():
    spec, _ = harness.parse_config(read_config("nl_n3_p3"))
    state0, _ = spec.initial_state()
    nl = evolve(state0, spec.solver)
    lin = evolve(state0, spec.solver.replace(nonlinear=False))
    assert nl.completed
    ratio = nl.column("norm_lq") / lin.column("norm_lq")
    assert np.all((ratio > 0.5) & (ratio < 2.0)), f"max ratio {ratio.max():.2f}"
