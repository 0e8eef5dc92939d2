"""Byte-stable emission of trajectories, scans, clusters and manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .integrator import Trajectory
from .shooting import Cluster, ScanResult, sol_metric

TRAJECTORY_COLUMNS = (
    "t", "f", "fdot", "h", "hdot", "u", "udot",
    "xi", "W", "E", "F", "theta", "G", "Hcal", "Q", "Lcal", "Fcal", "S", "trL",
    "ham_residual", "normal_residual", "sol",
)
SCAN_COLUMNS = ("hbar", "ubar", "min_sol", "argmin_t", "termination")

_STATE_FIELDS = TRAJECTORY_COLUMNS[:7]
_DIAG_FIELDS = TRAJECTORY_COLUMNS[7:-1]


def fmt(value) -> str:
    """Shortest round-trip decimal; ``None`` and NaN become ``nan``."""
    if value is None:
        return "nan"
    x = float(value)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def trajectory_rows(traj: Trajectory) -> Iterable[list[str]]:
    pattern = traj.preset.collapse
    for state, diag in zip(traj.states, traj.diags):
        row = [fmt(getattr(state, name)) for name in _STATE_FIELDS]
        row += [fmt(getattr(diag, name)) for name in _DIAG_FIELDS]
        row.append(fmt(sol_metric(state, pattern)))
        yield row


def trajectory_csv(traj: Trajectory) -> str:
    return _csv_text(TRAJECTORY_COLUMNS, trajectory_rows(traj))


def scan_csv(result: ScanResult) -> str:
    rows = (
        [fmt(hb), fmt(ub), fmt(ms), fmt(at), term.value]
        for _, _, hb, ub, ms, at, term in result.cells()
    )
    return _csv_text(SCAN_COLUMNS, rows)


def clusters_json(clusters: Sequence[Cluster], threshold: float) -> str:
    doc = {"threshold": threshold, "clusters": [c.to_dict() for c in clusters]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def scatter_svg(result: ScanResult, threshold: float, width: int = 480, height: int = 360) -> str:
    """Static scatter of the sub-threshold cells over the scanned rectangle."""
    pad = 40
    g = result.grid
    h0, h1 = g.hbar_min, max(g.hbar_max, g.hbar_min + g.hbar_step)
    u0, u1 = g.ubar_min, max(g.ubar_max, g.ubar_min + g.ubar_step)

    def px(hb: float) -> float:
        return pad + (hb - h0) / (h1 - h0) * (width - 2 * pad)

    def py(ub: float) -> float:
        return height - pad - (ub - u0) / (u1 - u0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">hbar</text>',
        f'<text x="12" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 12 {height / 2:.1f})">ubar</text>',
        f'<text x="{pad}" y="{height - pad + 14}" font-size="10">{fmt(h0)}</text>',
        f'<text x="{width - pad}" y="{height - pad + 14}" font-size="10" text-anchor="end">{fmt(h1)}</text>',
        f'<text x="{pad - 4}" y="{height - pad}" font-size="10" text-anchor="end">{fmt(u0)}</text>',
        f'<text x="{pad - 4}" y="{pad + 8}" font-size="10" text-anchor="end">{fmt(u1)}</text>',
    ]
    for _, _, hb, ub, ms, _, _ in result.cells():
        if ms < threshold:
            out.append(f'<circle cx="{px(hb):.2f}" cy="{py(ub):.2f}" r="2" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_text(path: Path, text: str) -> str:
    """Write ``text`` with LF endings and return its sha256 digest."""
    data = text.encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return sha256_hex(data)


def manifest_json(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"
