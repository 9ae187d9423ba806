"""Self-consistency check suite shared by the CLI and the test bench.

Every check pits two independently-derived routes against each other:
closed-form vs assembled coefficients, series vs spectral sums, quadrature
vs analytic averages, grid solver vs exact Gaussian evolution.  Each returns
a CheckResult with the measured discrepancy and its limit, so failures are
quantitative rather than boolean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coefficients import (
    d1_classical,
    d1_quantum_detail,
    d_cl_closed,
    sigma1_classical,
    sigma1_quantum,
    sigma_cl_closed,
)
from .fpe import SolverConfig, solve
from .model import PhysicalParams
from .propagator import maxwell_average_check
from .response import chi_q, chi_q_dot, chi_v, chi_v_dot, omega_drift, pole_times
from .special import noise_kernel_closed, noise_kernel_modes, xi_q0_closed, xi_q0_sum

__all__ = ["CheckResult", "ValidationReport", "run_suite"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    limit: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.limit)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.value:.3e} (limit {self.limit:.1e})"


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        return [c.line() for c in self.checks]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [
                {
                    "name": c.name,
                    "value": c.value,
                    "limit": c.limit,
                    "passed": c.passed,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def _grid(p: PhysicalParams, n: int = 61) -> np.ndarray:
    return np.linspace(0.05 / p.gamma, 6.0 / p.gamma, n) if p.gamma > 0 else np.linspace(0.05, 6.0, n)


def _safe_grid(p: PhysicalParams, t: np.ndarray) -> np.ndarray:
    """Drop points too close to underdamped drift poles."""
    if p.regime != "underdamped":
        return t
    keep = np.ones(len(t), dtype=bool)
    env = np.exp(-p.gamma * t / 2.0) * (1.0 + p.gamma * t / 2.0)
    cq = np.atleast_1d(chi_q(p, t))
    keep &= np.abs(cq) > 1e-2 * env
    return t[keep]


def run_suite(p: PhysicalParams, mode: str = "classical", quick: bool = True) -> ValidationReport:
    rep = ValidationReport()
    t = _safe_grid(p, _grid(p))

    # response-function identity: d/dt chi_q = Omega * chi_q
    cq = np.atleast_1d(chi_q(p, t))
    cqd = np.atleast_1d(chi_q_dot(p, t))
    om = np.atleast_1d(omega_drift(p, t))
    scale = np.max(np.abs(cqd)) + 1e-300
    rep.checks.append(
        CheckResult(
            "drift-ratio-identity",
            float(np.max(np.abs(cqd - om * cq)) / scale),
            1e-12,
            "chi_q_dot vs omega_drift*chi_q",
        )
    )

    # variance routes: sigma1 + (kT/M) chi_v^2 vs closed form
    s_route = np.atleast_1d(sigma1_classical(p, t)) + (p.kT / p.M) * np.atleast_1d(chi_v(p, t)) ** 2
    s_closed = np.atleast_1d(sigma_cl_closed(p, t))
    rep.checks.append(
        CheckResult(
            "classical-variance-routes",
            float(np.max(np.abs(s_route - s_closed)) / (p.kT / p.omega0_sq)),
            1e-12,
            "sigma1+thermal-drift vs 1-chi_q^2 closed form",
        )
    )

    # assembled D vs algebraic closed form
    sdot = np.atleast_1d(d1_classical(p, t)) + (2.0 * p.kT / p.M) * np.atleast_1d(
        chi_v(p, t)
    ) * np.atleast_1d(chi_v_dot(p, t))
    d_assembled = sdot - 2.0 * om * s_closed
    d_closed = np.atleast_1d(d_cl_closed(p, t))
    rep.checks.append(
        CheckResult(
            "classical-diffusion-routes",
            float(np.max(np.abs(d_assembled - d_closed)) / (np.max(np.abs(d_closed)) + 1e-300)),
            1e-10,
            "sigma_dot - 2*Omega*sigma vs tanhc closed form",
        )
    )

    # Maxwell average of conditional density vs averaged closed form
    tq = float(t[len(t) // 2])
    qgrid = np.linspace(-4.0, 4.0, 41) * np.sqrt(p.kT / p.omega0_sq)
    avg, closed = maxwell_average_check(p, tq, qgrid, q0=0.7, n_quad=80)
    rep.checks.append(
        CheckResult(
            "maxwell-average",
            float(np.max(np.abs(avg - closed)) / np.max(closed)),
            1e-10,
            f"Gauss-Hermite v0 average at t={tq:.3g}",
        )
    )

    # grid solver conserves mass and tracks the exact Gaussian
    n_q, n_steps = (401, 400) if quick else (1201, 2000)
    t_final = 1.0 / p.gamma if p.gamma > 0 else 1.0
    poles = pole_times(p, 2.0 * t_final)
    if len(poles):
        t_final = min(t_final, 0.7 * float(poles[0]))
    cfg = SolverConfig(
        n_q=n_q,
        dt=t_final / n_steps,
        init_var=0.04 * p.kT / p.omega0_sq,
        q0=0.5,
        compare_analytic=True,
        n_table=513,
    )
    try:
        res = solve(p, "adelman", "classical", t_final, cfg)
        rep.checks.append(
            CheckResult(
                "fpe-mass-conservation",
                abs(res.mass_drift),
                1e-10,
                f"{res.n_steps} steps, zero-flux",
            )
        )
        rep.checks.append(
            CheckResult(
                "fpe-vs-analytic",
                float(res.linf_error / res.peak_density),
                5e-3,
                "relative sup-norm deviation from exact Gaussian",
            )
        )
    except Exception as exc:  # pole windows in strongly underdamped runs
        rep.checks.append(
            CheckResult("fpe-run", 1.0, 0.0, f"solver aborted: {exc}")
        )

    if mode == "quantum":
        nu = p.matsubara_nu()
        for tt in (0.3 / nu, 2.0 / nu, 10.0 / nu):
            closed_v = xi_q0_closed(p, tt, 1e-12)
            summed_v = xi_q0_sum(p, tt, tol=1e-12)
            scale_x = abs(2.0 * p.gamma * p.kT / max(nu * tt, 1e-6)) + abs(closed_v)
            rep.checks.append(
                CheckResult(
                    f"xi-q0-routes-nut={nu * tt:.2g}",
                    abs(closed_v - summed_v) / scale_x,
                    1e-10,
                    "hypergeometric closed form vs spectral sum",
                )
            )
        # noise kernel: truncated mode sum vs closed form
        tau = 1.5 / nu
        exp_ = noise_kernel_modes(p, n_max=400, t_min=tau / 2.0)
        val_modes = exp_.evaluate(tau)
        val_closed = noise_kernel_closed(p, tau)
        rep.checks.append(
            CheckResult(
                "noise-kernel-routes",
                abs(val_modes - val_closed) / (abs(val_closed) + 1e-300),
                max(1e-10, 2.0 * exp_.tail_bound / (abs(val_closed) + 1e-300)),
                "mode expansion vs closed hyperbolic form",
            )
        )
        # d/dt sigma1 = D1 at the truncated-mode level.  The step is kept
        # coarse: near degenerate damping the root-splitting leaves ~1e-7
        # pointwise noise on sigma1, which a small-h difference would amplify.
        tc = 1.0 / p.gamma if p.gamma > 0 else 1.0
        h = 2e-3 * tc
        nmx = 2000
        der = (
            sigma1_quantum(p, tc + h, n_max=nmx)
            - sigma1_quantum(p, tc - h, n_max=nmx)
        ) / (2.0 * h)
        d1v = d1_quantum_detail(p, tc, n_max=nmx).value
        rep.checks.append(
            CheckResult(
                "quantum-variance-rate",
                abs(der - d1v) / (abs(d1v) + 1e-300),
                5e-4,
                "finite-difference sigma1' vs D1 at matched mode count",
            )
        )
    return rep
