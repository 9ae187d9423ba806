import math

import numpy as np
import pytest
from scipy.integrate import quad

from qbm import (
    CoefficientTable,
    HbarZero,
    build_table,
    chi_q,
    chi_v,
    chi_v_dot,
    d1_classical,
    d1_quantum,
    d1_quantum_detail,
    d_cl_closed,
    d_fpe,
    derive,
    omega_drift,
    sigma1_classical,
    sigma1_quantum,
    sigma_cl_closed,
    sigma_q,
    xi_q0_sum,
)
from qbm.coefficients import _mode_r


class TestClassicalClosedForms:
    @pytest.mark.parametrize("regime", ["over", "under", "crit"])
    def test_sigma1_integrates_d1(self, regime, request):
        p = request.getfixturevalue(f"p_{regime}")
        for t in (0.4, 1.5, 4.0):
            want, err = quad(lambda u: d1_classical(p, u), 0.0, t, epsabs=1e-12, limit=200)
            assert sigma1_classical(p, t) == pytest.approx(want, abs=max(1e-10, 4 * err))

    @pytest.mark.parametrize("regime", ["over", "under", "crit"])
    def test_variance_route_identity(self, regime, request):
        p = request.getfixturevalue(f"p_{regime}")
        t = np.linspace(0.0, 12.0, 100)
        lhs = np.atleast_1d(sigma1_classical(p, t)) + (p.kT / p.M) * np.atleast_1d(
            chi_v(p, t)
        ) ** 2
        rhs = np.atleast_1d(sigma_cl_closed(p, t))
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * p.kT / p.omega0_sq)

    def test_d_cl_equals_chi_ratio(self, p_over):
        for t in (0.2, 1.0, 5.0):
            want = (2.0 * p_over.kT / p_over.M) * chi_v(p_over, t) / chi_q(p_over, t)
            assert d_cl_closed(p_over, t) == pytest.approx(want, rel=1e-13)

    def test_d_cl_saturation_value(self, p_over):
        # 4*kT/(M*(gamma+w)) = 4/1.6 = 2.5 on the overdamped benchmark
        assert d_cl_closed(p_over, 80.0) == pytest.approx(2.5, rel=1e-12)

    def test_sigma_cl_long_time_is_equilibrium(self, p_over):
        assert sigma_cl_closed(p_over, 100.0) == pytest.approx(
            p_over.kT / p_over.omega0_sq, rel=1e-12
        )

    def test_very_large_time_no_overflow(self, p_over):
        # the folded branch must keep everything finite far beyond
        # where cosh/sinh of w*t would overflow
        for t in (700.0, 2000.0, 1e5):
            v = sigma1_classical(p_over, t)
            assert math.isfinite(v)
        assert sigma1_classical(p_over, 2000.0) == pytest.approx(
            p_over.kT / p_over.omega0_sq * (1.0 - math.exp(-2.0 * 0.2 * 2000.0) * (0.8 / 0.6) ** 2),
            rel=1e-10,
        )

    def test_d1_zero_at_origin(self, p_over):
        assert d1_classical(p_over, 0.0) == 0.0
        assert sigma1_classical(p_over, 0.0) == 0.0


class TestQuantumModeTerms:
    @pytest.mark.parametrize("regime", ["over", "under"])
    @pytest.mark.parametrize("n", [1, 3])
    def test_mode_term_against_quadrature(self, regime, n, request):
        # each mode applies delta(tau) - (nu_n/2)*exp(-nu_n*|tau|) to the
        # chi_v(t-u)*chi_v(t-v) double integral; the time derivative of that
        # reduces to a single convolution, which scipy can check directly
        p = request.getfixturevalue(f"pq_{regime}")
        nu_n = n * p.matsubara_nu()
        t = 0.7
        conv, err = quad(
            lambda s: chi_v(p, t - s) * math.exp(-nu_n * s), 0.0, t, epsabs=1e-14
        )
        cv = chi_v(p, t)
        want = cv * cv / 2.0 - nu_n / 2.0 * cv * conv
        got = float(_mode_r(p, np.array([nu_n]), t)[0])
        assert got == pytest.approx(want, rel=1e-10, abs=max(1e-13, 4 * err))

    def test_mode_term_large_n_asymptote(self, pq_over):
        # R_n -> chi_v_dot*chi_v/(2*nu_n) for large n
        p = pq_over
        t = 0.9
        a = chi_v_dot(p, t) * chi_v(p, t) / 2.0
        n = np.array([200.0, 400.0, 800.0]) * p.matsubara_nu()
        r = _mode_r(p, n, t)
        np.testing.assert_allclose(r * n, a, rtol=5e-3)

    def test_critical_split_is_finite_and_smooth(self, pq_crit):
        r = _mode_r(pq_crit, np.arange(1, 50, dtype=float) * pq_crit.matsubara_nu(), 0.6)
        assert np.all(np.isfinite(r))


class TestD1Quantum:
    def test_requires_quantum_params(self, p_over):
        with pytest.raises(HbarZero):
            d1_quantum(p_over, 1.0)

    def test_requires_positive_time(self, pq_over):
        with pytest.raises(ValueError):
            d1_quantum(pq_over, 0.0)

    def test_decomposition_sums_to_value(self, pq_over):
        det = d1_quantum_detail(pq_over, 0.8, n_max=500)
        assert det.value == pytest.approx(det.white + det.modes + det.correlation, rel=1e-14)
        assert det.white == pytest.approx(d1_classical(pq_over, 0.8), rel=1e-14)
        assert det.n_modes == 500

    def test_doubling_bound_is_honest(self, pq_over):
        for t in (0.3, 1.0):
            a = d1_quantum_detail(pq_over, t, n_max=1000)
            b = d1_quantum_detail(pq_over, t, n_max=2000)
            assert abs(b.value - a.value) <= a.doubling_bound

    def test_doubling_matches_log_coefficient(self, pq_over):
        # the n_max -> 2*n_max shift is dominated by log_coefficient * ln(2)
        a = d1_quantum_detail(pq_over, 1.0, n_max=4000)
        b = d1_quantum_detail(pq_over, 1.0, n_max=8000)
        h = sum(1.0 / k for k in range(4001, 8001))
        assert (b.value - a.value) == pytest.approx(a.log_coefficient * h, rel=0.02)

    def test_frictionless_limit_is_white_only(self):
        p = derive(1.0, 0.0, 1.0, 1.0, hbar=1.0)
        det = d1_quantum_detail(p, 1.0)
        assert det.value == 0.0
        assert det.modes == 0.0
        assert det.correlation == 0.0

    def test_correlation_term_uses_sum_fallback_at_small_time(self, pq_over):
        # nu*t < 0.01 puts the hypergeometric argument beyond its cutoff, so
        # the spectral-sum route must take over transparently
        p = pq_over
        t = 0.001 / p.matsubara_nu()
        det = d1_quantum_detail(p, t, n_max=64)
        xi = xi_q0_sum(p, t, tol=1e-10)
        want_corr = 2.0 * chi_q(p, t) * xi
        assert det.correlation == pytest.approx(want_corr, rel=1e-6)

    def test_classical_collapse(self):
        p = derive(1.0, 1.0, 0.16, 1.0, hbar=1e-4)
        for t in (0.5, 2.0):
            dq = d1_quantum(p, t)
            dc = d1_classical(p, t)
            assert dq == pytest.approx(dc, rel=1e-3)

    def test_rejects_bad_n_max(self, pq_over):
        with pytest.raises(ValueError):
            d1_quantum(pq_over, 1.0, n_max=0)


class TestSigma1Quantum:
    def test_zero_at_origin(self, pq_over):
        assert sigma1_quantum(pq_over, 0.0) == 0.0

    def test_integral_identity_with_matched_modes(self, pq_over):
        # sigma1(t2) - sigma1(t1) must equal the integral of D1 between them
        # when both use the same frozen mode count
        p = pq_over
        n = 200
        t1, t2 = 0.3, 1.0
        want, err = quad(
            lambda u: d1_quantum(p, u, n_max=n), t1, t2, epsabs=1e-10, limit=60
        )
        got = sigma1_quantum(p, t2, n_max=n) - sigma1_quantum(p, t1, n_max=n)
        assert got == pytest.approx(want, abs=max(5e-9, 10 * err))

    def test_exceeds_classical_variance(self, pq_over):
        # quantum bath adds fluctuation on top of the white-noise part
        assert sigma1_quantum(pq_over, 1.0, n_max=2000) > sigma1_classical(pq_over, 1.0)


class TestSigmaQAndDFpe:
    def test_classical_mode_matches_closed(self, p_over):
        t = np.linspace(0.0, 5.0, 20)
        np.testing.assert_allclose(
            sigma_q(p_over, t, "classical"), sigma_cl_closed(p_over, t), rtol=1e-14
        )

    def test_quantum_mode_assembly(self, pq_over):
        t = 0.9
        want = (
            sigma1_quantum(pq_over, t, n_max=800)
            + (pq_over.kT / pq_over.M) * chi_v(pq_over, t) ** 2
        )
        assert sigma_q(pq_over, t, "quantum", n_max=800) == pytest.approx(want, rel=1e-10)

    def test_rejects_unknown_mode(self, p_over):
        with pytest.raises(ValueError):
            sigma_q(p_over, 1.0, "semiclassical")
        with pytest.raises(ValueError):
            d_fpe(p_over, 1.0, "semiclassical")

    def test_classical_d_fpe_equals_closed_form(self, p_over):
        t = np.linspace(0.05, 8.0, 40)
        np.testing.assert_allclose(
            d_fpe(p_over, t, "classical"), d_cl_closed(p_over, t), rtol=1e-11
        )

    def test_quantum_d_fpe_identity(self, pq_over):
        # D = sigma_dot - 2*Omega*sigma assembled from the pieces
        p = pq_over
        t = 0.8
        sdot = d1_quantum(p, t, n_max=800) + (2.0 * p.kT / p.M) * chi_v(p, t) * chi_v_dot(p, t)
        want = sdot - 2.0 * omega_drift(p, t) * sigma_q(p, t, "quantum", n_max=800)
        assert d_fpe(p, t, "quantum", n_max=800) == pytest.approx(want, rel=1e-10)


class TestCoefficientTable:
    def test_classical_columns_and_csv(self, p_over, tmp_path):
        grid = np.linspace(0.0, 5.0, 21)
        table = build_table(p_over, grid, mode="classical")
        assert np.all(np.isfinite(table.d1))
        assert np.all(np.isfinite(table.d_fpe))
        path = tmp_path / "t.csv"
        table.to_csv(path)
        text = path.read_text().splitlines()
        assert text[0] == "t,omega,d1,sigma1,sigma_q,d_fpe"
        data = np.genfromtxt(path, delimiter=",", names=True)
        np.testing.assert_allclose(data["d_fpe"], table.d_fpe, rtol=1e-15)
        np.testing.assert_allclose(data["t"], grid, rtol=1e-15)

    def test_manifest_contents(self, p_over):
        table = build_table(p_over, np.linspace(0.0, 2.0, 5))
        m = table.manifest()
        assert m["params"]["gamma"] == 1.0
        assert m["mode"] == "classical"
        assert m["columns"] == ["t", "omega", "d1", "sigma1", "sigma_q", "d_fpe"]
        assert m["n_points"] == 5

    def test_underdamped_pole_windows_are_nan(self, p_under):
        grid = np.linspace(0.0, 6.0, 301)
        table = build_table(p_under, grid, mode="classical")
        assert len(table.pole_windows) >= 1
        a, b = table.pole_windows[0]
        inside = (grid >= a) & (grid <= b)
        assert inside.any()
        assert np.all(np.isnan(table.omega[inside]))
        assert np.all(np.isnan(table.d_fpe[inside]))
        outside = ~inside & (grid < table.pole_windows[1][0] if len(table.pole_windows) > 1 else ~inside)
        assert np.all(np.isfinite(table.sigma_q))
        assert table.in_pole_window(a + 1e-6, a + 1e-5)
        assert not table.in_pole_window(0.0, a - 0.1)

    def test_grid_validation(self, p_over, pq_over):
        with pytest.raises(ValueError):
            build_table(p_over, np.array([1.0, 0.5]))
        with pytest.raises(ValueError):
            build_table(p_over, np.array([-1.0, 0.5]))
        with pytest.raises(ValueError):
            build_table(p_over, np.array([0.0, 1.0]), mode="wkb")
        with pytest.raises(ValueError):
            build_table(pq_over, np.array([0.0, 1.0]), mode="quantum")

    def test_quantum_table_thread_determinism(self, pq_over):
        grid = np.linspace(0.2, 1.0, 5)
        a = build_table(pq_over, grid, mode="quantum", n_max=300)
        b = build_table(pq_over, grid, mode="quantum", n_max=300, threads=3)
        np.testing.assert_array_equal(a.d1, b.d1)
        np.testing.assert_array_equal(a.sigma_q, b.sigma_q)
        assert "d1_tail_bound_max" in a.diagnostics

    def test_quantum_csv_roundtrip(self, pq_over, tmp_path):
        grid = np.linspace(0.2, 1.0, 4)
        table = build_table(pq_over, grid, mode="quantum", n_max=200)
        path = tmp_path / "q.csv"
        table.to_csv(path)
        data = np.genfromtxt(path, delimiter=",", names=True)
        np.testing.assert_allclose(data["sigma_q"], table.sigma_q, rtol=1e-15)
