"""Scan records, their CSV/JSON/SVG emission, and power-law fits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class ScanRecord:
    """One bound (or reference value) at one scan point.

    The field order is the CSV column order.  ``m`` is ``"2"`` for a
    correlator point and ``"0,2"`` for a codeword pair.  ``exact`` is ``None``
    above the exact-oracle cap; sub/superfidelity are ``None`` where they
    were not computed.
    """

    experiment: str
    n: int
    q: float
    axis: str
    m: str
    layout: str
    depth_t: int
    bound_kind: str
    value: float
    subfidelity: float | None
    superfidelity: float | None
    exact: float | None
    sweeps: int
    converged: bool
    seed: int
    wall_seconds: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"non-finite {self.bound_kind} value at N={self.n}")


COLUMNS = tuple(f.name for f in fields(ScanRecord))


def sort_key(r: ScanRecord) -> tuple:
    return (r.n, r.bound_kind, r.axis, r.m)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def to_csv(records: Sequence[ScanRecord], drop: Iterable[str] = ()) -> str:
    cols = [c for c in COLUMNS if c not in set(drop)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in records:
        d = asdict(r)
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def _parse(name: str, text: str):
    if text == "":
        return None
    if name in ("n", "depth_t", "sweeps", "seed"):
        return int(text)
    if name == "converged":
        return text == "1"
    if name in ("experiment", "axis", "m", "layout", "bound_kind"):
        return text
    return float(text)


def from_csv(text: str) -> list[ScanRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    head = rows[0]
    missing = [c for c in COLUMNS if c not in head]
    if missing:
        raise ValueError(f"CSV lacks columns {missing}")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        d = dict(zip(head, row))
        out.append(ScanRecord(**{c: _parse(c, d[c]) for c in COLUMNS}))
    return out


def to_json(records: Sequence[ScanRecord]) -> str:
    return json.dumps([asdict(r) for r in records], indent=1) + "\n"


def from_json(text: str) -> list[ScanRecord]:
    return [ScanRecord(**d) for d in json.loads(text)]


# ---------------------------------------------------------------- fits


@dataclass(frozen=True)
class PowerLawFit:
    """``value ~ prefactor * N ** exponent`` from a log-log least-squares fit."""

    exponent: float
    exponent_stderr: float
    prefactor: float
    r_squared: float
    points_used: int


def fit_power_law(points: Sequence[tuple[float, float]]) -> PowerLawFit:
    """Ordinary least squares of ``log(value)`` on ``log(N)``.

    Raises:
        ValueError: fewer than 3 points, or a nonpositive N or value.
    """
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError(f"a power-law fit needs at least 3 points, got {len(pts)}")
    if any(not (v > 0 and math.isfinite(v)) or n <= 0 for n, v in pts):
        raise ValueError("power-law fits need positive N and positive finite values")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    if np.ptp(x) == 0:
        raise ValueError("all points share one N")
    res = stats.linregress(x, y)
    return PowerLawFit(float(res.slope), float(res.stderr), float(np.exp(res.intercept)),
                       float(res.rvalue**2), len(pts))


def select(records: Iterable[ScanRecord], bound_kind: str, axis: str | None = None,
           n_min: int | None = None, n_max: int | None = None, m: str | None = None) -> list[ScanRecord]:
    out = []
    for r in records:
        if r.bound_kind != bound_kind or (axis is not None and r.axis != axis) or (m is not None and r.m != m):
            continue
        if (n_min is not None and r.n < n_min) or (n_max is not None and r.n > n_max):
            continue
        out.append(r)
    return sorted(out, key=lambda r: r.n)


def fit_records(records: Iterable[ScanRecord], bound_kind: str, use_exact: bool = False, **filters) -> PowerLawFit:
    """Fit ``value`` (or ``exact``) against N for one bound kind."""
    rows = select(records, bound_kind, **filters)
    if use_exact:
        return fit_power_law([(r.n, r.exact) for r in rows if r.exact is not None])
    return fit_power_law([(r.n, r.value) for r in rows])


# ---------------------------------------------------------------- svg


def to_svg(records: Sequence[ScanRecord], title: str = "") -> str:
    """Static log-log plot of every (bound_kind, axis, m) series, plus exact values."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[tuple[str, str, str], list[ScanRecord]] = {}
    exact: dict[tuple[str, str], dict[int, float]] = {}
    for r in records:
        if r.value > 0:
            series.setdefault((r.bound_kind, r.axis, r.m), []).append(r)
        if r.exact is not None and r.exact > 0:
            exact.setdefault((r.axis, r.m), {})[r.n] = r.exact
    with matplotlib.rc_context({"svg.hashsalt": "fidcert", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for (kind, axis, m), rows in sorted(series.items()):
            rows = sorted(rows, key=lambda r: r.n)
            ax.plot([r.n for r in rows], [r.value for r in rows], "o--", label=f"{kind} ({axis}, m={m})")
        for (axis, m), pts in sorted(exact.items()):
            ns = sorted(pts)
            ax.plot(ns, [pts[n] for n in ns], "k-", label=f"exact ({axis}, m={m})")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("N")
        ax.set_ylabel("value")
        if title:
            ax.set_title(title)
        ax.legend(fontsize=7)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()
