"""Command-line front end: ``solitonlab {integrate,scan,verify,linearize}``.

Every run that writes files also writes a JSON manifest.  A manifest can be
passed back with ``--config`` to reproduce the run; flags given on the
command line override values from the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .dynamics import ham_residual, vector_field
from .errors import SolitonLabError
from .geometry import OrbitPreset, preset_catalog
from .integrator import IntegratorConfig, integrate
from .output import (
    clusters_json,
    manifest_json,
    scan_csv,
    scatter_svg,
    trajectory_csv,
    write_text,
)
from .shooting import DEFAULT_THRESHOLD, ScanGrid, find_clusters, scan
from .warped import (
    OracleKind,
    WarpedPreset,
    oracle,
    oracle_residuals,
    oracle_state,
    oracle_state_rate,
    p_plus_linearization,
    p_point,
    phase_of,
    phase_rate_of,
    warped_rhs,
)

EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE = 0, 1, 2
ORACLE_TOL = 1e-10
GAUSSIAN_MATCH_TOL = 1e-4
ORACLE_SAMPLES = 100
SAMPLE_WINDOW = 2.0  # residual sampling window for the Gaussians
TURNING_TOL = 1e-8
_RANGE_FLAGS = ("--hbar-range", "--ubar-range")


class UsageError(Exception):
    pass


def _fmt_float(x: float | None) -> Any:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    return float(x)


def _load_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config file must hold a JSON object")
    return data


def _param(args, file: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    return file.get("parameters", {}).get(name, default)


def _resolve_preset(args, file: dict) -> OrbitPreset:
    choice = args.preset if args.preset is not None else file.get("preset")
    if choice is None:
        raise UsageError("--preset is required (or a config file naming one)")
    preset = preset_catalog(choice) if isinstance(choice, str) else OrbitPreset.from_dict(choice)
    if args.epsilon is not None:
        preset = preset.with_epsilon(args.epsilon)
    return preset


def _resolve_config(args, file: dict) -> IntegratorConfig:
    fields = dict(file.get("config", {}))
    overrides = {
        "step": args.step,
        "t_max": args.tmax,
        "record_every": getattr(args, "record_every", None),
        "precision": args.precision,
        "t0_factor": getattr(args, "t0_factor", None),
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return IntegratorConfig(**fields)
    except TypeError as exc:
        raise UsageError(f"bad integrator config: {exc}") from None


def _manifest(command: str, started: float, **parts) -> dict:
    doc = {"command": command, "version": __version__}
    doc.update(parts)
    doc["duration_s"] = round(time.perf_counter() - started, 6)
    return doc


# -- integrate ------------------------------------------------------------------


def cmd_integrate(args) -> int:
    started = time.perf_counter()
    file = _load_file(args.config)
    preset = _resolve_preset(args, file)
    config = _resolve_config(args, file)
    hbar = _param(args, file, "hbar")
    ubar = _param(args, file, "ubar", 0.0)
    out = _param(args, file, "out")
    if hbar is None or out is None:
        raise UsageError("--hbar and --out are required")
    traj = integrate(preset, float(hbar), float(ubar), config)
    out_path = Path(out)
    digest = write_text(out_path, trajectory_csv(traj))
    summary = {
        "termination": traj.termination.value,
        "end_t": traj.end_t,
        "min_sol": traj.min_sol,
        "argmin_sol_t": _fmt_float(traj.argmin_sol_t),
        "turning_time": traj.turning_time,
        "winding": traj.winding,
        "series_residual": traj.series_residual,
    }
    manifest = _manifest(
        "integrate",
        started,
        preset=preset.to_dict(),
        config=config.to_dict(),
        parameters={"hbar": float(hbar), "ubar": float(ubar), "out": str(out_path)},
        summary=summary,
        outputs={out_path.name: digest},
        warnings=[],
    )
    write_text(out_path.with_suffix(".manifest.json"), manifest_json(manifest))
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# -- scan -----------------------------------------------------------------------


def cmd_scan(args) -> int:
    started = time.perf_counter()
    file = _load_file(args.config)
    preset = _resolve_preset(args, file)
    config = _resolve_config(args, file)
    hr = _param(args, file, "hbar_range")
    ur = _param(args, file, "ubar_range")
    prefix = _param(args, file, "out_prefix")
    threshold = float(_param(args, file, "threshold", DEFAULT_THRESHOLD))
    svg = bool(args.svg or file.get("parameters", {}).get("svg", False))
    workers = int(_param(args, file, "workers", 1))
    if hr is None or ur is None or prefix is None:
        raise UsageError("--hbar-range, --ubar-range and --out-prefix are required")
    grid = ScanGrid.parse(hr, ur)
    result = scan(preset, grid, config, workers=workers)
    clusters = find_clusters(result, threshold)

    base = Path(prefix)
    outputs = {}
    files = [(f"{base.name}.scan.csv", scan_csv(result)),
             (f"{base.name}.clusters.json", clusters_json(clusters, threshold))]
    if svg:
        files.append((f"{base.name}.svg", scatter_svg(result, threshold)))
    for name, text in files:
        outputs[name] = write_text(base.parent / name, text)
    manifest = _manifest(
        "scan",
        started,
        preset=preset.to_dict(),
        config=config.to_dict(),
        parameters={
            "hbar_range": hr, "ubar_range": ur, "out_prefix": str(prefix),
            "threshold": threshold, "svg": svg, "workers": workers,
        },
        grid=result.grid.to_dict(),
        summary={"cells": int(result.min_sol.size), "clusters": len(clusters)},
        outputs=outputs,
        warnings=result.warnings,
    )
    write_text(base.parent / f"{base.name}.manifest.json", manifest_json(manifest))
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps({"cells": int(result.min_sol.size), "clusters": len(clusters)}))
    return EXIT_OK


# -- verify ---------------------------------------------------------------------


def _parse_factors(text: str) -> tuple[tuple[int, float], ...]:
    """``"2,2"`` (unit spheres) or ``"2:1,3:2.5"`` (dimension:Einstein constant)."""
    factors = []
    for item in text.split(","):
        item = item.strip()
        if ":" in item:
            d, lam = item.split(":")
            factors.append((int(d), float(lam)))
        else:
            factors.append((int(item), int(item) - 1.0))
    return tuple(factors)


def _oracle_times(preset: WarpedPreset, kind: OracleKind) -> np.ndarray:
    k = np.arange(1, ORACLE_SAMPLES + 1)
    if kind is OracleKind.SPHERICAL_CONE:
        end = math.pi / math.sqrt(-preset.epsilon / (2.0 * preset.n))
        return end * k / (ORACLE_SAMPLES + 1)
    return SAMPLE_WINDOW * k / ORACLE_SAMPLES


def verify_oracle(preset: WarpedPreset, kind: OracleKind) -> dict:
    """Worst residuals of a closed form over its sample times."""
    ode = ham = phase = 0.0
    two = preset.m == 2
    orbit = preset.to_orbit_preset() if two and preset.factors[0][1] == preset.factors[0][0] - 1 else None
    for t in _oracle_times(preset, kind):
        s = oracle(preset, kind, float(t))
        r = oracle_residuals(preset, s)
        ode = max(ode, max(float(np.max(np.abs(v))) for k, v in r.items() if k != "ham"))
        ham = max(ham, abs(float(r["ham"])))
        if abs(s.xi) > TURNING_TOL:  # phase variables are undefined at the turning point
            ph = phase_of(preset, s)
            diff = warped_rhs(preset, ph).as_array() - phase_rate_of(preset, s).as_array()
            # the field is cubic, so compare against the cube of the state size
            scale = max(1.0, float(np.max(np.abs(ph.as_array())))) ** 3
            phase = max(phase, float(np.max(np.abs(diff))) / scale)
        if orbit is not None:
            z = oracle_state(s)
            ode = max(ode, float(np.max(np.abs(vector_field(orbit, z) - oracle_state_rate(s)))))
            ham = max(ham, abs(ham_residual(orbit, z)))
    return {"max_ode_residual": ode, "max_ham_residual": ham, "max_phase_residual": phase}


def gaussian_shot(preset: WarpedPreset, config: IntegratorConfig) -> dict:
    """Shoot the z-system from the Gaussian's initial data and track the
    deviation of ``u`` from the closed form."""
    orbit = preset.to_orbit_preset()
    hbar = math.sqrt(2.0 * preset.factors[1][1] / -preset.epsilon)
    ubar = -(preset.factors[0][0] + 1) / 2.0
    traj = integrate(orbit, hbar, ubar, config)
    t = traj.times()
    dev = np.abs(traj.column("u") - (-preset.epsilon * t * t / 4.0 + ubar))
    bad = np.nonzero(dev > GAUSSIAN_MATCH_TOL)[0]
    matched_until = float(t[bad[0] - 1]) if bad.size and bad[0] > 0 else (float(t[-1]) if not bad.size else None)
    return {
        "hbar": hbar,
        "ubar": ubar,
        "initial_deviation": float(dev[0]),
        "matched_until": matched_until,
        "max_deviation": float(dev.max()),
        "termination": traj.termination.value,
        "end_t": traj.end_t,
        "t_max": config.resolved_t_max(orbit),
    }, (t, dev)


def cmd_verify(args) -> int:
    file = _load_file(args.config)
    kind = OracleKind(_param(args, file, "oracle"))
    factors = _parse_factors(_param(args, file, "factors", "2,2"))
    n = sum(d for d, _ in factors)
    eps = args.epsilon if args.epsilon is not None else file.get("parameters", {}).get("epsilon")
    if eps is None:
        eps = -2.0 * n if kind is OracleKind.SPHERICAL_CONE else -8.0
    preset = WarpedPreset(factors, eps)
    report = {"oracle": kind.value, "factors": [list(f) for f in factors], "epsilon": eps}
    report.update(verify_oracle(preset, kind))
    ok = max(report["max_ode_residual"], report["max_ham_residual"], report["max_phase_residual"]) < ORACLE_TOL
    if kind is OracleKind.SMOOTH_GAUSSIAN and preset.m == 2:
        config = IntegratorConfig(step=args.step or 0.005, t_max=args.tmax)
        shot, _ = gaussian_shot(preset, config)
        report["trajectory"] = shot
        ok = ok and shot["initial_deviation"] < GAUSSIAN_MATCH_TOL
    report["pass"] = ok
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    out = _param(args, file, "out")
    if out:
        write_text(Path(out), text)
    sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_TOLERANCE


# -- linearize ------------------------------------------------------------------


def _int_range(text: str) -> list[int]:
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return list(range(lo, hi + 1))
    return [int(text)]


def cmd_linearize(args) -> int:
    rows = []
    for n in _int_range(args.n):
        lin = p_plus_linearization(n)
        rows.append({
            "n": n,
            "matrix": lin.matrix.tolist(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in lin.eigenvalues],
            "discriminant": lin.discriminant,
            "is_focus": bool(lin.is_focus),
        })
    report: dict[str, Any] = {"linearizations": rows,
                              "focus_n": [r["n"] for r in rows if r["is_focus"]]}
    if args.factors:
        factors = _parse_factors(args.factors)
        n = sum(d for d, _ in factors)
        wp = WarpedPreset(factors, args.epsilon if args.epsilon is not None else -2.0 * n)
        report["fixed_point_residual"] = {
            label: float(np.max(np.abs(warped_rhs(wp, p_point(wp, sign)).as_array())))
            for label, sign in (("P+", 1), ("P-", -1))
        }
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config or manifest; flags override its values")
    p.add_argument("--preset", help="preset name, e.g. cp2, s5, hp(2)")
    p.add_argument("--epsilon", type=float, help="override the soliton constant")
    p.add_argument("--step", type=float, help="RK4 step (default 0.005)")
    p.add_argument("--tmax", type=float, help="integration horizon (default 50/sqrt(-epsilon))")
    p.add_argument("--precision", choices=["double", "extended"], help="floating-point width")
    p.add_argument("--t0-factor", dest="t0_factor", type=float,
                   help="series start time in steps (default 10); fix t0 when comparing step sizes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solitonlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"solitonlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("integrate", help="shoot one trajectory and write it as CSV")
    _add_run_flags(p)
    p.add_argument("--hbar", type=float)
    p.add_argument("--ubar", type=float)
    p.add_argument("--record-every", dest="record_every", type=int)
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("scan", help="min-SOL over an (hbar, ubar) grid")
    _add_run_flags(p)
    p.add_argument("--hbar-range", dest="hbar_range", help="lo:hi:step")
    p.add_argument("--ubar-range", dest="ubar_range", help="lo:hi:step")
    p.add_argument("--threshold", type=float, help=f"cluster threshold (default {DEFAULT_THRESHOLD})")
    p.add_argument("--out-prefix", dest="out_prefix")
    p.add_argument("--svg", action="store_true", help="also write a scatter plot")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("verify", help="check a closed-form soliton")
    p.add_argument("--config")
    p.add_argument("--oracle", choices=[k.value for k in OracleKind])
    p.add_argument("--factors", help='"2,2" for unit spheres or "d:lambda,..."')
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tmax", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("linearize", help="linearisation at P+ and focus test")
    p.add_argument("--n", default="2:12", help="orbit dimension or lo:hi (default 2:12)")
    p.add_argument("--factors", help="also check P+/P- are fixed points for these factors")
    p.add_argument("--epsilon", type=float)
    p.set_defaults(func=cmd_linearize)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # ranges such as -3:3:0.1 would otherwise be read as options
    for i in range(len(argv) - 1, 0, -1):
        if argv[i - 1] in _RANGE_FLAGS:
            argv[i - 1 : i + 1] = [f"{argv[i - 1]}={argv[i]}"]
    args = parser.parse_args(argv)
    try:
        if args.command == "verify" and _param(args, _load_file(args.config), "oracle") is None:
            raise UsageError("--oracle is required")
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except (SolitonLabError, ValueError, KeyError) as exc:
        print(f"solitonlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
