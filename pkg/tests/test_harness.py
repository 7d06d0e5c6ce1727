import json
import math
from dataclasses import replace

import numpy as np
import pytest

from sigma_evolve import harness, theory
from sigma_evolve.cli import read_config
from sigma_evolve.harness import (ConfigError, ExperimentRefused, ExperimentSpec, Profile,
                                  critical_sweep, emit_report, fit_decay_rate, parse_config,
                                  run_decay_experiment, verify_integral_lemma)


def small_spec(**overrides) -> ExperimentSpec:
    d = {
        "name": "small",
        "params": {"n": 3, "sigma": 1, "q": 2, "m1": 1, "m2": 1, "p": 3},
        "grid": {"sizes": [16, 16, 16], "half_length": 12},
        "u0": {"kind": "gaussian", "scale": 2.0, "amplitude": 0.05},
        "u1": {"kind": "gaussian", "scale": 2.0, "amplitude": 0.05},
        "solver": {"dt": 0.5, "T": 20},
    }
    d.update(overrides)
    return ExperimentSpec.from_dict(d)


class TestFit:
    def test_power_law(self):
        t = np.linspace(0, 100, 50)
        fit = fit_decay_rate(t, (1 + t) ** -0.5, (10, 100))
        assert math.isclose(fit.slope, -0.5, abs_tol=1e-12) and math.isclose(fit.r2, 1.0)

    def test_constant(self):
        t = np.linspace(0, 100, 50)
        fit = fit_decay_rate(t, np.full(50, 3.0), (10, 100))
        assert abs(fit.slope) < 1e-12 and 0 <= fit.r2 <= 1

    def test_too_few_samples(self):
        t = np.linspace(0, 100, 10)
        with pytest.raises(ValueError):
            fit_decay_rate(t, np.ones(10), (50, 100))

    def test_nonpositive(self):
        t = np.linspace(0, 100, 50)
        v = np.ones(50)
        v[40] = 0.0
        with pytest.raises(ValueError):
            fit_decay_rate(t, v, (10, 100))

    def test_density_doubling(self):
        spec, _ = parse_config(read_config("linear_1d"))
        fine = run_decay_experiment(spec)
        coarse = run_decay_experiment(replace(spec, solver=spec.solver.replace(record_every=2)))
        assert abs(fine.fit_u.slope - coarse.fit_u.slope) < 0.01
        assert abs(fine.fit_grad.slope - coarse.fit_grad.slope) < 0.01


class TestSpec:
    def test_round_trip(self):
        spec = small_spec(seed=4, random_center=True, fit_window=[2, 20])
        again = ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        assert again == spec

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            small_spec(colour="red")

    def test_window_outside_horizon(self):
        with pytest.raises(ConfigError):
            small_spec(fit_window=[5, 50])

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            small_spec(grid={"sizes": [16, 16], "half_length": 12})

    def test_profiles(self):
        from sigma_evolve.spectral import Grid
        g = Grid((64,), 4.0)
        bump = Profile("bump", 2.0, 1.5).sample(g)
        x = g.axis_coords(0)
        assert np.all(bump[np.abs(x) >= 2.0] == 0) and math.isclose(bump.max(), 1.5)
        assert np.all(Profile("zero").sample(g) == 0)
        with pytest.raises(ConfigError):
            Profile("square")

    def test_random_centre_reproducible(self):
        spec = small_spec(seed=11, random_center=True)
        assert spec.center() == spec.center()
        assert spec.center() != small_spec(seed=12, random_center=True).center()

    def test_mean_subtraction_recorded(self):
        state, means = small_spec().initial_state()
        assert means[0] > 0 and abs(state.u.mean()) < 1e-15


class TestDecayExperiment:
    def test_theory_annotation_matches_engine(self):
        rep = run_decay_experiment(small_spec())
        assert rep.theory_rates == theory.decay_rates(small_spec().params)
        assert rep.weights == theory.solution_norm_weights(small_spec().params)
        assert rep.outcome == "Completed"

    def test_linear_annotation(self):
        spec = small_spec(solver={"dt": 0.5, "T": 20, "nonlinear": False})
        rep = run_decay_experiment(spec)
        assert rep.theory_rates == theory.linear_decay_rates(spec.params)

    def test_refuses_not_covered(self):
        spec = small_spec(params={"n": 2, "sigma": 1, "q": 2, "m1": 1, "m2": 1, "p": 3},
                          grid={"sizes": [16, 16], "half_length": 12})
        with pytest.raises(ExperimentRefused, match="fails"):
            run_decay_experiment(spec)

    def test_refuses_p_outside_range(self):
        spec = small_spec(params={"n": 3, "sigma": 1, "q": 2, "m1": 1, "m2": 1, "p": 4})
        with pytest.raises(ExperimentRefused, match="outside"):
            run_decay_experiment(spec)

    def test_guard_warning(self):
        rep = run_decay_experiment(small_spec())
        assert any("wrap-around" in w for w in rep.warnings)
        assert rep.to_dict()["warnings"] == rep.warnings


class TestLemma:
    @pytest.mark.parametrize("a,b,exp,log", [(2, 0.5, -0.5, False), (1, 1, -1, True), (0.3, 0.4, 0.3, False)])
    def test_branches(self, a, b, exp, log):
        chk = verify_integral_lemma(a, b)
        assert chk.agree and chk.log_factor is log
        assert abs(chk.fitted - exp) < 0.05

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            verify_integral_lemma(2, 0.5, np.geomspace(1, 100, 8))
        with pytest.raises(ValueError):
            verify_integral_lemma(2, 0.5, np.linspace(100, 1000, 8))
        with pytest.raises(ValueError):
            verify_integral_lemma(2, 0.5, np.geomspace(100, 1000, 4))


@pytest.fixture(scope="module")
def sweep_spec():
    spec, plan = parse_config(read_config("sweep_n3"))
    return replace(spec, solver=spec.solver.replace(T=20.0), fit_window=(2.0, 20.0)), plan


class TestSweep:
    def test_empty_grid(self, sweep_spec, tmp_path):
        rep = critical_sweep(sweep_spec[0], [], 0.1)
        assert rep.entries == [] and rep.bracket is None
        paths = emit_report(rep, tmp_path)
        data = json.loads(paths[0].read_text())
        assert data["entries"] == [] and data["p_grid"] == []

    def test_unsorted_rejected(self, sweep_spec):
        with pytest.raises(ValueError):
            critical_sweep(sweep_spec[0], [2.0, 1.5], 0.1)
        with pytest.raises(ValueError):
            critical_sweep(sweep_spec[0], [1.0, 1.5], 0.1)

    def test_workers_identical(self, sweep_spec):
        spec, _ = sweep_spec
        a = critical_sweep(spec, [1.5, 2.5], 0.05, workers=1)
        b = critical_sweep(spec, [1.5, 2.5], 0.05, workers=2)
        assert a.to_dict() == b.to_dict()

    def test_theory_annotation(self, sweep_spec):
        rep = critical_sweep(sweep_spec[0], [2.5], 0.05)
        assert rep.theory["p1"] == 2.0

    def test_bracket_is_interval(self):
        p = [1.5, 2.0, 2.5, 3.0]
        assert harness.transition_bracket(p, ["Growing", "BlowUp", "Decaying", "Decaying"]) == ((2.0, 2.5), [])
        assert harness.transition_bracket(p, ["BlowUp"] * 4) == (None, [])
        assert harness.transition_bracket(p, [None, "Decaying", "Decaying", "Decaying"]) == (None, [])

    def test_monotonicity_violation_flagged(self):
        _, v = harness.transition_bracket([2.0, 2.5, 3.0], ["Decaying", "BlowUp", "Decaying"])
        assert v == ["Decaying at p=2 but BlowUp at p=2.5"]

    def test_subcritical_positive_data(self, sweep_spec):
        spec, plan = parse_config(read_config("sweep_n3"))
        rep = critical_sweep(spec, [1.2], plan.epsilon)
        assert rep.entries[0]["classification"] in ("Growing", "BlowUp")

    def test_far_supercritical_small_data_decays(self):
        spec, _ = parse_config(read_config("sweep_n3"))
        rep = critical_sweep(spec, [3.0], 0.01)
        assert rep.entries[0]["classification"] == "Decaying", rep.entries[0]


class TestReport:
    def test_decay_files(self, tmp_path):
        rep = run_decay_experiment(small_spec())
        paths = emit_report(rep, tmp_path)
        assert paths[0] == tmp_path / "small" / "report.json"
        data = json.loads(paths[0].read_text())
        assert data["schema"] == 1 and "generated_at" in data
        assert ExperimentSpec.from_dict(data["spec"]) == small_spec()
        series = (tmp_path / "small" / "series_u.csv").read_text().splitlines()
        assert series[0] == "t,measured,theory_envelope"
        assert len(series) == 1 + len(rep.trajectory.times)

    def test_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            emit_report(run_decay_experiment(small_spec()), blocker)


class TestConfigParsing:
    def test_byte_offset(self):
        with pytest.raises(ConfigError, match="byte 13"):
            parse_config(b'{"name": "x",, }')

    def test_schema(self):
        with pytest.raises(ConfigError, match="schema"):
            parse_config(json.dumps({"schema": 2}).encode())

    def test_sweep_section(self):
        _, plan = parse_config(read_config("sweep_n3"))
        assert plan.p_grid[0] == 1.2 and plan.p_grid[-1] == 3.0 and len(plan.p_grid) == 10

    def test_bundled_configs_parse(self):
        for name in ("linear_1d", "nl_n3_p3", "sweep_n3"):
            spec, _ = parse_config(read_config(name))
            assert spec.name == name
