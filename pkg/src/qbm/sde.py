"""Stochastic-trajectory cross-checks of the FPE description.

Two simulators over ensembles of paths:

* ``simulate_reduced`` — Euler-Maruyama for the one-dimensional reduced SDE
  dq = Omega(t) q dt + sqrt(D(t)) dW with coefficients interpolated from a
  CoefficientTable at the step midpoint.
* ``simulate_langevin`` — the underlying two-dimensional Langevin dynamics
  dq = v dt, dv = (-gamma v - (omega0_sq/M) q) dt + sqrt(2 gamma k_B T/M) dW,
  integrated by BAOAB splitting with the exact Ornstein-Uhlenbeck kick, so the
  friction/noise substep introduces no stepsize bias.

Reproducibility: paths are split over 16 fixed RNG blocks, each seeded by
SeedSequence((seed, block)) driving Philox counters, and all reductions run
in fixed block order — results are bit-identical for a given seed regardless
of thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .coefficients import CoefficientTable
from .errors import GridMismatch, NegativeDiffusion, NonFiniteCoefficient, PoleWindow
from .model import PhysicalParams

__all__ = [
    "EnsembleStats",
    "simulate_reduced",
    "simulate_langevin",
    "equivalence_report",
]

_N_BLOCKS = 16
_N_RECORD = 64


def _block_sizes(n_paths: int) -> list:
    base, extra = divmod(n_paths, _N_BLOCKS)
    return [base + (1 if i < extra else 0) for i in range(_N_BLOCKS)]


def _rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, block))))


def _step_times(t0: float, t_final: float, dt: float) -> np.ndarray:
    n = int(math.ceil((t_final - t0) / dt - 1e-12))
    t = t0 + dt * np.arange(1, n + 1)
    t[-1] = t_final
    return t


def _record_mask(n_steps: int) -> np.ndarray:
    every = max(1, round(n_steps / _N_RECORD))
    mask = np.zeros(n_steps, dtype=bool)
    mask[every - 1 :: every] = True
    mask[-1] = True
    return mask


@dataclass(frozen=True)
class EnsembleStats:
    """Moment trajectories and position samples of a path ensemble.

    ``samples_q`` holds the final-time positions; ``samples_at`` maps each
    requested checkpoint time to its full position sample.
    """

    t: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    se_mean: np.ndarray
    se_var: np.ndarray
    n_paths: int
    samples_q: np.ndarray
    label: str = ""
    mean_v: Optional[np.ndarray] = None
    var_v: Optional[np.ndarray] = None
    samples_v: Optional[np.ndarray] = None
    samples_at: Optional[dict] = None
    paths: Optional[np.ndarray] = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            f.write("t,mean,var,se_mean,se_var\n")
            for i in range(len(self.t)):
                f.write(
                    "%.17g,%.17g,%.17g,%.17g,%.17g\n"
                    % (self.t[i], self.mean[i], self.var[i], self.se_mean[i], self.se_var[i])
                )

    def dump_paths(self, path) -> None:
        """Raw-path binary dump.

        Layout (little-endian): two uint64 header words {n_paths, n_times},
        then n_paths * n_times float64 positions in row-major order (path
        index varies slowest).  Rows follow the deterministic block order, so
        the file is bit-identical for a given seed regardless of threads.
        """
        if self.paths is None:
            raise ValueError("ensemble was simulated without keep_paths=True")
        with open(path, "wb") as f:
            f.write(np.asarray(self.paths.shape, dtype="<u8").tobytes())
            f.write(np.ascontiguousarray(self.paths, dtype="<f8").tobytes())


def _combine(block_sums: list, n_paths: int, n_rec: int) -> tuple:
    """Fixed-order pairwise combination of per-block moment accumulators."""
    s1 = np.zeros(n_rec)
    s2 = np.zeros(n_rec)
    for k in range(n_rec):
        s1[k] = math.fsum(b[0][k] for b in block_sums)
        s2[k] = math.fsum(b[1][k] for b in block_sums)
    mean = s1 / n_paths
    var = (s2 - n_paths * mean * mean) / (n_paths - 1)
    se_mean = np.sqrt(np.maximum(var, 0.0) / n_paths)
    se_var = np.maximum(var, 0.0) * math.sqrt(2.0 / (n_paths - 1))
    return mean, var, se_mean, se_var


def _sample_indices(times: np.ndarray, sample_times, t0: float) -> list:
    idx = []
    for ts in sample_times:
        ts = float(ts)
        if not (t0 < ts <= float(times[-1]) + 1e-12):
            raise ValueError(f"sample time {ts} outside ({t0}, {times[-1]}]")
        k = int(np.argmin(np.abs(times - ts)))
        if abs(float(times[k]) - ts) > 1e-9 * max(1.0, abs(ts)):
            raise ValueError(
                f"sample time {ts} does not land on the step grid (dt mismatch)"
            )
        idx.append(k)
    return idx


def _table_coeff_mid(table: CoefficientTable, t_lo: float, t_hi: float) -> tuple:
    pad = float(table.t[1] - table.t[0]) if len(table.t) > 1 else 0.0
    for a, b in table.pole_windows:
        if t_lo <= b + pad and t_hi >= a - pad:
            raise PoleWindow(
                f"step [{t_lo}, {t_hi}] overlaps drift pole window [{a}, {b}]"
            )
    tm = (t_lo + t_hi) / 2.0
    om = float(np.interp(tm, table.t, table.omega))
    dc = float(np.interp(tm, table.t, table.d_fpe))
    if not (math.isfinite(om) and math.isfinite(dc)):
        raise NonFiniteCoefficient(f"omega/d_fpe not finite near t={tm}")
    if dc < 0.0:
        raise NegativeDiffusion(f"D(t={tm}) = {dc} < 0")
    return om, dc


def simulate_reduced(
    p: PhysicalParams,
    table: CoefficientTable,
    q0: float,
    n_paths: int,
    dt: float,
    t_final: float,
    seed: int,
    threads: int = 1,
    sample_times: tuple = (),
    keep_paths: bool = False,
) -> EnsembleStats:
    """Euler-Maruyama ensemble for the reduced position SDE."""
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    if not (dt > 0.0):
        raise ValueError("dt must be positive")
    t0 = float(table.t[0])
    if not (t_final > t0):
        raise ValueError(f"t_final must exceed table start {t0}")
    if t_final > float(table.t[-1]) + 1e-12:
        raise GridMismatch(f"t_final={t_final} beyond table range")
    times = _step_times(t0, t_final, dt)
    rec = _record_mask(len(times))
    samp_idx = _sample_indices(times, sample_times, t0)
    # precompute per-step coefficients once; identical for every block
    oms = np.empty(len(times))
    dcs = np.empty(len(times))
    t_prev = t0
    for k, tk in enumerate(times):
        oms[k], dcs[k] = _table_coeff_mid(table, t_prev, float(tk))
        t_prev = float(tk)
    dts = np.diff(np.concatenate(([t0], times)))

    n_rec = int(rec.sum())

    def run_block(b: int, n_b: int):
        rng = _rng(seed, b)
        q = np.full(n_b, float(q0))
        s1 = np.empty(n_rec)
        s2 = np.empty(n_rec)
        traj = np.empty((n_b, n_rec)) if keep_paths else None
        snaps = {}
        j = 0
        for k in range(len(times)):
            h = dts[k]
            q += oms[k] * q * h + math.sqrt(dcs[k] * h) * rng.standard_normal(n_b)
            if rec[k]:
                s1[j] = float(np.sum(q))
                s2[j] = float(np.sum(q * q))
                if traj is not None:
                    traj[:, j] = q
                j += 1
            if k in samp_idx:
                snaps[float(times[k])] = q.copy()
        return (s1, s2), q, snaps, traj

    sizes = _block_sizes(n_paths)
    results = _run_blocks(run_block, sizes, threads)
    block_sums = [r[0] for r in results]
    samples = np.concatenate([r[1] for r in results])
    samples_at = {
        float(times[k]): np.concatenate([r[2][float(times[k])] for r in results])
        for k in samp_idx
    } or None
    mean, var, se_mean, se_var = _combine(block_sums, n_paths, n_rec)
    return EnsembleStats(
        t=times[rec],
        mean=mean,
        var=var,
        se_mean=se_mean,
        se_var=se_var,
        n_paths=n_paths,
        samples_q=samples,
        label="reduced-em",
        samples_at=samples_at,
        paths=np.concatenate([r[3] for r in results]) if keep_paths else None,
    )


def simulate_langevin(
    p: PhysicalParams,
    q0: float,
    v0_mode: str,
    n_paths: int,
    dt: float,
    t_final: float,
    seed: int,
    threads: int = 1,
    sample_times: tuple = (),
    keep_paths: bool = False,
) -> EnsembleStats:
    """BAOAB ensemble for the underlying classical Langevin dynamics.

    v0_mode is 'zero' (sharp v0 = 0) or 'thermal' (v0 drawn from the Maxwell
    distribution at the bath temperature).
    """
    if v0_mode not in ("zero", "thermal"):
        raise ValueError(f"v0_mode must be 'zero' or 'thermal', got {v0_mode!r}")
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    if not (dt > 0.0 and t_final > 0.0):
        raise ValueError("dt and t_final must be positive")
    times = _step_times(0.0, t_final, dt)
    rec = _record_mask(len(times))
    samp_idx = _sample_indices(times, sample_times, 0.0)
    dts = np.diff(np.concatenate(([0.0], times)))
    k_spring = p.omega0_sq / p.M
    v_std = math.sqrt(p.kT / p.M)
    n_rec = int(rec.sum())

    def run_block(b: int, n_b: int):
        rng = _rng(seed, b)
        q = np.full(n_b, float(q0))
        v = (v_std * rng.standard_normal(n_b) if v0_mode == "thermal"
             else np.zeros(n_b))
        sq1 = np.empty(n_rec)
        sq2 = np.empty(n_rec)
        sv1 = np.empty(n_rec)
        sv2 = np.empty(n_rec)
        traj = np.empty((n_b, n_rec)) if keep_paths else None
        snaps = {}
        j = 0
        for k in range(len(times)):
            h = dts[k]
            c = math.exp(-p.gamma * h)
            o_std = v_std * math.sqrt(max(1.0 - c * c, 0.0))
            v += -(h / 2.0) * k_spring * q
            q += (h / 2.0) * v
            v = c * v + o_std * rng.standard_normal(n_b)
            q += (h / 2.0) * v
            v += -(h / 2.0) * k_spring * q
            if rec[k]:
                sq1[j] = float(np.sum(q))
                sq2[j] = float(np.sum(q * q))
                sv1[j] = float(np.sum(v))
                sv2[j] = float(np.sum(v * v))
                if traj is not None:
                    traj[:, j] = q
                j += 1
            if k in samp_idx:
                snaps[float(times[k])] = q.copy()
        return (sq1, sq2), (sv1, sv2), q, v, snaps, traj

    sizes = _block_sizes(n_paths)
    results = _run_blocks(run_block, sizes, threads)
    mean, var, se_mean, se_var = _combine([r[0] for r in results], n_paths, n_rec)
    mean_v, var_v, _, _ = _combine([r[1] for r in results], n_paths, n_rec)
    samples_at = {
        float(times[k]): np.concatenate([r[4][float(times[k])] for r in results])
        for k in samp_idx
    } or None
    return EnsembleStats(
        t=times[rec],
        mean=mean,
        var=var,
        se_mean=se_mean,
        se_var=se_var,
        n_paths=n_paths,
        samples_q=np.concatenate([r[2] for r in results]),
        label=f"langevin-baoab-{v0_mode}",
        mean_v=mean_v,
        var_v=var_v,
        samples_v=np.concatenate([r[3] for r in results]),
        samples_at=samples_at,
        paths=np.concatenate([r[5] for r in results]) if keep_paths else None,
    )


def _run_blocks(run_block, sizes, threads):
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            futs = [ex.submit(run_block, b, n_b) for b, n_b in enumerate(sizes)]
            return [f.result() for f in futs]
    return [run_block(b, n_b) for b, n_b in enumerate(sizes)]


def equivalence_report(
    stats_a: EnsembleStats,
    stats_b: EnsembleStats,
    analytic: Optional[dict] = None,
    z_limit: float = 3.0,
) -> dict:
    """Moment-by-moment comparison of two ensembles (and optional analytic
    reference) on their shared record grid.

    The analytic reference, if given, maps 'mean' and 'var' to callables of t
    or to arrays aligned with the record grid.  z-scores use combined
    standard errors; ``passed`` requires every |z| <= z_limit.
    """
    if len(stats_a.t) != len(stats_b.t) or not np.allclose(
        stats_a.t, stats_b.t, rtol=1e-12, atol=1e-12
    ):
        raise GridMismatch("ensembles were recorded on different time grids")
    z_mean = np.abs(stats_a.mean - stats_b.mean) / np.hypot(stats_a.se_mean, stats_b.se_mean)
    z_var = np.abs(stats_a.var - stats_b.var) / np.hypot(stats_a.se_var, stats_b.se_var)
    report = {
        "n_points": int(len(stats_a.t)),
        "max_z_mean": float(np.max(z_mean)),
        "max_z_var": float(np.max(z_var)),
        "labels": (stats_a.label, stats_b.label),
    }
    if analytic is not None:
        for key, stats in (("a", stats_a), ("b", stats_b)):
            ref_mean = analytic["mean"]
            ref_var = analytic["var"]
            m = ref_mean(stats.t) if callable(ref_mean) else np.asarray(ref_mean)
            v = ref_var(stats.t) if callable(ref_var) else np.asarray(ref_var)
            report[f"max_z_mean_{key}_vs_analytic"] = float(
                np.max(np.abs(stats.mean - m) / np.maximum(stats.se_mean, 1e-300))
            )
            report[f"max_z_var_{key}_vs_analytic"] = float(
                np.max(np.abs(stats.var - v) / np.maximum(stats.se_var, 1e-300))
            )
    report["passed"] = all(
        val <= z_limit for name, val in report.items() if name.startswith("max_z")
    )
    return report
