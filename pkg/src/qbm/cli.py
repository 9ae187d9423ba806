"""Command-line interface.

Subcommands: ``coeffs`` (tabulate coefficients to CSV + JSON manifest),
``fpe`` (grid solve), ``sde`` (ensemble simulation / equivalence check) and
``validate`` (consistency suite, written as a JSON report).

Exit codes: 0 success, 1 bad input or a failed consistency check, 2 a
numerical failure inside the engines (unbounded tail, pole-window crossing,
non-finite state, ...).

Settings may come from a flat key-value config file (``--config``): one
``key = value`` pair per line, ``#`` comments, keys spelled like the long
flags with ``-`` or ``_``.  Explicit command-line flags override config
values, which override built-in defaults.  Every output file is accompanied
by a ``<out>.json`` manifest echoing the effective configuration, seeds and
tolerances that produced it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .coefficients import build_table
from .errors import InvalidInput, QbmError
from .fpe import SolverConfig, solve
from .model import derive
from .sde import equivalence_report, simulate_langevin, simulate_reduced
from .validation import run_suite

__all__ = ["main", "build_parser", "load_config", "save_config"]

_PHYS_KEYS = ("gamma", "omega0_sq", "mass", "temp", "hbar", "classical", "unit_mode")


# ---------------------------------------------------------------------------
# flat key-value config files


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def load_config(path) -> dict:
    """Parse a flat ``key = value`` file into a dict.

    Keys are normalized to underscores; values are coerced to bool, int or
    float when they parse as such, else kept as strings.
    """
    cfg = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, val = line.partition("=")
            else:
                parts = line.split(None, 1)
                if len(parts) != 2:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'key = value', got {line!r}"
                    )
                key, val = parts
            key = key.strip().replace("-", "_")
            if not key:
                raise ValueError(f"{path}:{lineno}: empty key")
            cfg[key] = _coerce(val.strip())
    return cfg


def save_config(cfg: dict, path) -> None:
    """Write a dict in the flat key-value format ``load_config`` reads back."""
    with open(path, "w", newline="") as fh:
        for key, val in cfg.items():
            if isinstance(val, bool):
                text = "true" if val else "false"
            elif val is None:
                continue
            else:
                text = repr(val) if isinstance(val, float) else str(val)
            fh.write(f"{key.replace('-', '_')} = {text}\n")


def _apply_config_defaults(parsers, overrides: dict) -> None:
    for parser in parsers:
        dests = {a.dest for a in parser._actions}
        hit = {k: v for k, v in overrides.items() if k in dests}
        if hit:
            parser.set_defaults(**hit)


# ---------------------------------------------------------------------------
# parser


def _add_physics(ap: argparse.ArgumentParser) -> None:
    g = ap.add_argument_group("physical parameters")
    g.add_argument("--gamma", type=float, default=1.0, help="friction rate")
    g.add_argument("--omega0-sq", type=float, default=0.16, help="potential curvature")
    g.add_argument("--mass", type=float, default=1.0, help="particle mass")
    g.add_argument("--temp", type=float, default=1.0, help="bath temperature")
    g.add_argument("--hbar", type=float, default=0.0, help="Planck constant over 2*pi (0 = classical)")
    g.add_argument(
        "--classical", action="store_true", help="force hbar = 0 regardless of --hbar"
    )
    g.add_argument(
        "--unit-mode",
        choices=("reduced", "si"),
        default="reduced",
        help="unit system for k_B",
    )


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("QBM_THREADS")
    return max(1, int(env)) if env else 1


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qbm",
        description="Brownian oscillator in an Ohmic bath: FPE coefficients, "
        "grid solver, and trajectory ensembles.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--config", default=None, help="flat key-value settings file")
    ap.add_argument("--threads", type=int, default=None, help="worker threads (or QBM_THREADS)")
    ap.add_argument(
        "--validate",
        action="store_true",
        help="run the quick consistency suite before the subcommand",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeffs", help="tabulate coefficients to CSV")
    _add_physics(c)
    c.add_argument("--mode", choices=("classical", "quantum"), default=None)
    c.add_argument("--t-min", type=float, default=None)
    c.add_argument("--t-max", type=float, default=10.0)
    c.add_argument("--n-points", "--n", type=int, default=201, dest="n_points")
    c.add_argument("--n-max", type=int, default=None, help="Matsubara modes kept")
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--out", default="coeffs.csv")

    f = sub.add_parser("fpe", help="evolve a density on a grid")
    _add_physics(f)
    f.add_argument("--mode", choices=("classical", "quantum"), default=None)
    f.add_argument("--form", choices=("adelman",), default="adelman")
    f.add_argument("--t-final", type=float, default=5.0)
    f.add_argument("--t-start", type=float, default=0.0)
    f.add_argument("--n-q", type=int, default=801)
    f.add_argument("--dt", type=float, default=1e-3)
    f.add_argument("--scheme", choices=("cn-central", "split-upwind"), default="cn-central")
    f.add_argument("--boundary", choices=("zero-flux", "absorbing"), default="zero-flux")
    f.add_argument("--q0", type=float, default=0.0)
    f.add_argument("--init-var", type=float, default=1e-2)
    f.add_argument("--compare-analytic", action="store_true")
    f.add_argument("--out", default="fpe.csv")

    s = sub.add_parser("sde", help="simulate path ensembles")
    _add_physics(s)
    s.add_argument("--paths", type=int, default=10000)
    s.add_argument("--dt", type=float, default=1e-3)
    s.add_argument("--t-final", type=float, default=5.0)
    s.add_argument("--seed", type=int, default=20260823)
    s.add_argument("--q0", type=float, default=1.0)
    s.add_argument("--v0-mode", choices=("zero", "thermal"), default="thermal")
    s.add_argument(
        "--compare",
        action="store_true",
        help="run both the reduced SDE and the Langevin dynamics and report equivalence",
    )
    s.add_argument(
        "--dump-paths",
        default=None,
        help="also write recorded positions as binary: uint64 {n_paths, n_times} "
        "header then row-major float64, all little-endian",
    )
    s.add_argument("--out", default="sde.csv")

    v = sub.add_parser("validate", help="run the consistency suite")
    _add_physics(v)
    v.add_argument("--mode", choices=("classical", "quantum"), default=None)
    v.add_argument(
        "--suite",
        choices=("quick", "full", "classical", "quantum"),
        default="quick",
        help="quick/full pick the depth; the mode names run the full suite "
        "for that mode",
    )
    v.add_argument("--out", default="validation.json")

    if config:
        _apply_config_defaults([ap, c, f, s, v], config)
    return ap


# ---------------------------------------------------------------------------
# command implementations


def _params(args):
    hbar = 0.0 if args.classical else args.hbar
    return derive(args.mass, args.gamma, args.omega0_sq, args.temp, hbar, args.unit_mode)


def _resolve_mode(args, p) -> str:
    mode = getattr(args, "mode", None)
    if mode == "quantum" and p.is_classical:
        raise ValueError("quantum mode requires a nonzero --hbar")
    if mode:
        return mode
    return "classical" if p.is_classical else "quantum"


def _effective(args, keys) -> dict:
    cfg = {k: getattr(args, k) for k in _PHYS_KEYS + tuple(keys)}
    cfg["threads"] = _threads(args)
    return cfg


def _write_manifest(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump({"version": __version__, **payload}, fh, indent=2)
        fh.write("\n")


def _cmd_coeffs(args) -> int:
    p = _params(args)
    mode = _resolve_mode(args, p)
    t_min = args.t_min
    if t_min is None:
        t_min = 0.0 if mode == "classical" else args.t_max / (10.0 * args.n_points)
    grid = np.linspace(t_min, args.t_max, args.n_points)
    table = build_table(p, grid, mode=mode, n_max=args.n_max, tol=args.tol,
                        threads=_threads(args))
    table.to_csv(args.out)
    manifest_path = args.out + ".json"
    cfg = _effective(args, ("t_max", "n_points", "n_max", "tol", "out"))
    cfg["t_min"] = t_min
    _write_manifest(
        manifest_path,
        {**table.manifest(), "csv": os.path.basename(args.out), "config": cfg},
    )
    print(f"wrote {args.out} ({len(grid)} rows, mode={mode}) and {manifest_path}")
    if table.pole_windows:
        print(f"pole windows: {table.pole_windows}")
    return 0


def _cmd_fpe(args) -> int:
    p = _params(args)
    mode = _resolve_mode(args, p)
    t_start = args.t_start
    if mode == "quantum" and t_start <= 0.0:
        t_start = args.t_final / 1000.0
    cfg = SolverConfig(
        n_q=args.n_q,
        dt=args.dt,
        scheme=args.scheme,
        boundary=args.boundary,
        t_start=t_start,
        q0=args.q0,
        init_var=args.init_var,
        compare_analytic=args.compare_analytic,
    )
    res = solve(p, args.form, mode, args.t_final, cfg)
    with open(args.out, "w", newline="") as fh:
        fh.write("q,rho\n")
        for qi, ri in zip(res.field.q, res.field.rho):
            fh.write("%.17g,%.17g\n" % (qi, ri))
    effective = _effective(
        args,
        ("form", "t_final", "n_q", "dt", "scheme", "boundary", "q0",
         "init_var", "compare_analytic", "out"),
    )
    effective["t_start"] = t_start
    effective["mode"] = mode
    summary = {
        "config": effective,
        "t_final": res.field.t,
        "mass_initial": res.mass_initial,
        "mass_final": res.mass_final,
        "min_density": res.min_density,
        "peclet_max": res.peclet_max,
        "n_steps": res.n_steps,
    }
    if res.linf_error is not None:
        summary["linf_error"] = res.linf_error
        summary["peak_density"] = res.peak_density
    _write_manifest(args.out + ".json", summary)
    print(f"wrote {args.out}: mass drift {res.mass_drift:.3e}, {res.n_steps} steps")
    if res.linf_error is not None:
        rel = res.linf_error / res.peak_density
        print(f"sup-norm deviation from analytic: {rel:.3e} of peak")
        if rel > 5e-3:
            return 1
    return 0


def _cmd_sde(args) -> int:
    p = _params(args)
    threads = _threads(args)
    stats_l = simulate_langevin(
        p, args.q0, args.v0_mode, args.paths, args.dt, args.t_final, args.seed,
        threads=threads, keep_paths=args.dump_paths is not None,
    )
    stats_l.to_csv(args.out)
    effective = _effective(
        args,
        ("paths", "dt", "t_final", "seed", "q0", "v0_mode", "compare",
         "dump_paths", "out"),
    )
    manifest = {"config": effective, "label": stats_l.label, "n_record": len(stats_l.t)}
    if args.dump_paths:
        stats_l.dump_paths(args.dump_paths)
        manifest["paths_file"] = os.path.basename(args.dump_paths)
        manifest["paths_layout"] = "uint64 n_paths, uint64 n_times, then row-major float64 (little-endian)"
    print(f"wrote {args.out} ({stats_l.label}, {args.paths} paths)")
    if not args.compare:
        _write_manifest(args.out + ".json", manifest)
        return 0
    from .response import chi_q
    from .coefficients import sigma_cl_closed

    grid = np.linspace(0.0, args.t_final, 1025)
    table = build_table(p, grid, mode="classical")
    stats_r = simulate_reduced(
        p, table, args.q0, args.paths, args.dt, args.t_final, args.seed + 1,
        threads=threads,
    )
    analytic = {
        "mean": lambda t: np.atleast_1d(chi_q(p, t)) * args.q0,
        "var": lambda t: np.atleast_1d(sigma_cl_closed(p, t)),
    }
    rep = equivalence_report(stats_r, stats_l, analytic)
    for k, v in rep.items():
        print(f"  {k}: {v}")
    manifest["equivalence"] = {k: v for k, v in rep.items() if k != "labels"}
    _write_manifest(args.out + ".json", manifest)
    return 0 if rep["passed"] else 1


def _cmd_validate(args) -> int:
    p = _params(args)
    if args.suite in ("classical", "quantum"):
        if args.mode and args.mode != args.suite:
            raise ValueError(f"--suite {args.suite} conflicts with --mode {args.mode}")
        args.mode = args.suite
        quick = False
    else:
        quick = args.suite == "quick"
    mode = _resolve_mode(args, p)
    rep = run_suite(p, mode=mode, quick=quick)
    for line in rep.lines():
        print(line)
    _write_manifest(
        args.out,
        {"config": _effective(args, ("suite", "out")), "mode": mode, **rep.to_dict()},
    )
    print(f"wrote {args.out}")
    return 0 if rep.passed else 1


def main(argv=None) -> int:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    overrides = {}
    if known.config:
        try:
            overrides = load_config(known.config)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 1
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    ap = build_parser(overrides)
    args = ap.parse_args(argv)
    try:
        if args.validate:
            p = _params(args)
            rep = run_suite(p, mode=_resolve_mode(args, p), quick=True)
            for line in rep.lines():
                print(line)
            out = getattr(args, "out", None)
            if out and args.command != "validate":
                _write_manifest(out + ".validation.json", rep.to_dict())
            if not rep.passed:
                return 1
        handler = {
            "coeffs": _cmd_coeffs,
            "fpe": _cmd_fpe,
            "sde": _cmd_sde,
            "validate": _cmd_validate,
        }[args.command]
        return handler(args)
    except (InvalidInput, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except QbmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
