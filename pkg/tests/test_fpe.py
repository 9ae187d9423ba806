import dataclasses

import numpy as np
import pytest

from qbm import (
    CFLViolation,
    DensityField,
    GridMismatch,
    NegativeDiffusion,
    NonFiniteCoefficient,
    PoleWindow,
    SolverConfig,
    build_table,
    solve,
    step,
)


def _cfg(**kw):
    base = dict(
        n_q=401, dt=1e-3, q0=1.0, init_var=1e-2, compare_analytic=True, n_table=1025
    )
    base.update(kw)
    return SolverConfig(**base)


class TestConfigAndField:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(n_q=3)
        with pytest.raises(ValueError):
            SolverConfig(dt=0.0)
        with pytest.raises(ValueError):
            SolverConfig(scheme="spectral")
        with pytest.raises(ValueError):
            SolverConfig(boundary="periodic")
        with pytest.raises(ValueError):
            SolverConfig(init_var=0.0)

    def test_field_grid_validation(self):
        with pytest.raises(GridMismatch):
            DensityField(np.array([0.0, 1.0, 0.5]), np.zeros(3), 0.0)
        with pytest.raises(GridMismatch):
            DensityField(np.array([0.0, 0.5, 2.0]), np.zeros(3), 0.0)
        with pytest.raises(GridMismatch):
            DensityField(np.linspace(0, 1, 4), np.zeros(3), 0.0)

    def test_gaussian_init_is_normalized(self):
        f = DensityField.gaussian(np.linspace(-8, 8, 1001), 1.0, 0.04)
        assert f.mass() == pytest.approx(1.0, abs=1e-14)


class TestSolveClassical:
    def test_unknown_form_and_mode(self, p_over):
        with pytest.raises(ValueError):
            solve(p_over, form="kramers")
        with pytest.raises(ValueError):
            solve(p_over, mode="wkb")
        with pytest.raises(ValueError):
            solve(p_over, t_final=0.0)

    def test_mass_conservation_zero_flux(self, p_over):
        res = solve(p_over, t_final=1.0, cfg=_cfg())
        assert abs(res.mass_drift) < 1e-12
        assert res.n_steps == 1000

    def test_tracks_analytic_gaussian(self, p_over):
        res = solve(p_over, t_final=1.0, cfg=_cfg())
        assert res.linf_error / res.peak_density < 5e-3

    def test_second_order_refinement(self, p_over):
        # halving both dt and dq should cut the error by about four
        coarse = solve(p_over, t_final=1.0, cfg=_cfg(n_q=401, dt=1e-3))
        fine = solve(p_over, t_final=1.0, cfg=_cfg(n_q=801, dt=5e-4))
        ratio = coarse.linf_error / fine.linf_error
        assert 3.0 < ratio < 5.2

    def test_split_upwind_first_order(self, p_over):
        coarse = solve(p_over, t_final=1.0, cfg=_cfg(scheme="split-upwind", n_q=801, dt=1e-3))
        fine = solve(p_over, t_final=1.0, cfg=_cfg(scheme="split-upwind", n_q=1601, dt=5e-4))
        ratio = coarse.linf_error / fine.linf_error
        assert 1.5 < ratio < 2.6

    def test_split_upwind_cfl_violation(self, p_over):
        with pytest.raises(CFLViolation):
            solve(p_over, t_final=2.0, cfg=_cfg(scheme="split-upwind", n_q=2001, dt=0.5))

    def test_snapshots_land_exactly(self, p_over):
        cfg = _cfg(snapshot_times=(0.25, 0.7003))
        res = solve(p_over, t_final=1.0, cfg=cfg)
        assert set(res.snapshots) == {0.25, 0.7003}
        for rho in res.snapshots.values():
            assert rho.shape == res.field.q.shape
        # 0.7003 is not a multiple of dt; the stepper must shorten a step
        # to land on it exactly, then another one to land on t_final
        assert res.n_steps == 1001

    def test_snapshot_validation(self, p_over):
        with pytest.raises(ValueError):
            solve(p_over, t_final=1.0, cfg=_cfg(snapshot_times=(1.5,)))
        with pytest.raises(ValueError):
            solve(p_over, t_final=1.0, cfg=_cfg(snapshot_times=(0.0,)))

    def test_absorbing_boundary_loses_mass(self, p_over):
        cfg = _cfg(boundary="absorbing", q_min=-2.5, q_max=2.5, compare_analytic=False)
        res = solve(p_over, t_final=2.0, cfg=cfg)
        assert res.mass_final < res.mass_initial - 1e-4
        assert res.min_density > -1e-12

    def test_underdamped_refuses_pole_window(self, p_under):
        with pytest.raises(PoleWindow):
            solve(p_under, t_final=2.2, cfg=_cfg())

    def test_underdamped_ok_before_pole(self, p_under):
        res = solve(p_under, t_final=1.0, cfg=_cfg())
        assert res.linf_error / res.peak_density < 5e-3


class TestStepGuards:
    def test_negative_diffusion_rejected(self, p_over):
        table = build_table(p_over, np.linspace(0.0, 1.0, 65))
        bad = dataclasses.replace(table, d_fpe=table.d_fpe - 2.0)
        f = DensityField.gaussian(np.linspace(-5, 5, 201), 0.0, 0.1, t=0.5)
        with pytest.raises(NegativeDiffusion):
            step(f, bad, SolverConfig(n_q=201))

    def test_nan_coefficient_rejected(self, p_over):
        table = build_table(p_over, np.linspace(0.0, 1.0, 65))
        d = table.d_fpe.copy()
        d[32] = np.nan
        bad = dataclasses.replace(table, d_fpe=d)
        f = DensityField.gaussian(np.linspace(-5, 5, 201), 0.0, 0.1, t=0.5)
        with pytest.raises(NonFiniteCoefficient):
            step(f, bad, SolverConfig(n_q=201))

    def test_step_outside_table_rejected(self, p_over):
        table = build_table(p_over, np.linspace(0.0, 1.0, 65))
        f = DensityField.gaussian(np.linspace(-5, 5, 201), 0.0, 0.1, t=0.9999)
        with pytest.raises(GridMismatch):
            step(f, table, SolverConfig(n_q=201, dt=0.1))

    def test_single_step_preserves_mass(self, p_over):
        table = build_table(p_over, np.linspace(0.0, 1.0, 65))
        f = DensityField.gaussian(np.linspace(-6, 6, 301), 0.5, 0.05, t=0.2)
        g = step(f, table, SolverConfig(n_q=301, dt=1e-3))
        assert g.t == pytest.approx(0.201)
        assert g.mass() == pytest.approx(f.mass(), abs=1e-14)


class TestSolveQuantum:
    def test_requires_positive_start(self, pq_over):
        with pytest.raises(ValueError):
            solve(pq_over, mode="quantum", t_final=1.0, cfg=_cfg(t_start=0.0))

    def test_small_quantum_run(self, pq_over):
        cfg = _cfg(t_start=0.2, init_var=0.05, n_q=301, dt=2e-3, n_table=33,
                   n_max=400, compare_analytic=True)
        res = solve(pq_over, mode="quantum", t_final=0.8, cfg=cfg)
        assert abs(res.mass_drift) < 1e-12
        assert res.linf_error / res.peak_density < 2e-2
