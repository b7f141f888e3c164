"""Scan configuration: INI-style text with one section per concern.

Example::

    [scan]
    experiment = codeword
    n_list = 8, 10, 12
    output = codeword.csv
    emit = csv, svg

    [noise]
    q = 0.3
    axes = Z, X

    [circuit]
    layout = sequential_composite
    depth_t = 2

Every key must be known; a misspelled key is an error rather than a silent
default.  Overrides use ``section.key=value``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from typing import Any, Iterable

from ..circuit import Layout
from ..variational import OptimizerConfig

EXPERIMENTS = ("correlator", "codeword", "perturbative")
EMITS = ("csv", "json", "svg")
REQUIRED = ("scan.experiment", "scan.n_list")
# restart policy used by the scans: a strongly perturbed identity start plus
# one further noisy restart
SCAN_OPTIMIZER = OptimizerConfig(max_sweeps=600, rel_tol=1e-7, restarts=2, init_noise=0.3)


class ConfigError(ValueError):
    """Invalid, missing or unknown configuration entry."""


@dataclass(frozen=True)
class ScanConfig:
    experiment: str
    n_list: tuple[int, ...]
    m_indices: tuple[int, ...] = ()  # empty: (0, 2) for codeword scans, else (2,)
    output: str = ""
    emit: tuple[str, ...] = ("csv",)
    exact_cap: int = 12
    workers: int = 1
    h: float = 1.0
    chi: int = 64
    state_chi: int = 32
    quartic: str = "auto"
    cache: str = ""
    q: float = 0.3
    axes: tuple[str, ...] = ("Z",)
    layout: str = Layout.SEQUENTIAL_COMPOSITE.value
    depth_t: int = 1
    d_a: int = 2
    trace_depth_t: int = 0
    nested: bool = True
    optimizer: OptimizerConfig = SCAN_OPTIMIZER
    source: str = "free_fermion"

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"scan.experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if not self.m_indices:
            object.__setattr__(self, "m_indices", (0, 2) if self.experiment == "codeword" else (2,))
        ns = list(self.n_list)
        if not ns:
            raise ConfigError("scan.n_list must be nonempty")
        if ns != sorted(set(ns)):
            raise ConfigError("scan.n_list must be strictly ascending")
        if self.experiment == "correlator" and any(n % 2 for n in ns):
            raise ConfigError("scan.n_list must hold even sizes for antipodal correlators")
        if min(ns) < 3:
            raise ConfigError("scan.n_list entries must be >= 3")
        if any(e not in EMITS for e in self.emit):
            raise ConfigError(f"scan.emit entries must be among {EMITS}")
        if any(a not in ("Z", "X") for a in self.axes):
            raise ConfigError("noise.axes entries must be Z or X")
        if not 0 <= self.q <= 1:
            raise ConfigError("noise.q must lie in [0, 1]")
        try:
            Layout(self.layout)
        except ValueError:
            raise ConfigError(f"unknown circuit.layout {self.layout!r}") from None
        if self.depth_t < 1 or self.trace_depth_t < 0 or self.d_a < 1:
            raise ConfigError("circuit depths and d_a must be positive")
        if self.workers < 1 or self.chi < 1 or self.exact_cap < 0:
            raise ConfigError("scan.workers, model.chi and scan.exact_cap must be positive")
        if self.experiment == "codeword" and set(self.m_indices) != {0, 2}:
            raise ConfigError("codeword scans compare m = 0 with m = 2; set scan.m_indices = 0, 2")
        if self.quartic not in ("auto", "true", "false"):
            raise ConfigError("scan.quartic must be auto, true or false")
        if self.state_chi < 0:
            raise ConfigError("model.state_chi must be >= 0")
        if self.source not in ("free_fermion", "mps"):
            raise ConfigError("perturbative.source must be free_fermion or mps")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.replace(",", " ").split())


def _words(text: str) -> tuple[str, ...]:
    return tuple(x for x in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# (section, key) -> (ScanConfig field or "optimizer.<field>", parser)
KEYS: dict[tuple[str, str], tuple[str, Any]] = {
    ("scan", "experiment"): ("experiment", str.strip),
    ("scan", "n_list"): ("n_list", _ints),
    ("scan", "m_indices"): ("m_indices", _ints),
    ("scan", "output"): ("output", str.strip),
    ("scan", "emit"): ("emit", _words),
    ("scan", "exact_cap"): ("exact_cap", int),
    ("scan", "workers"): ("workers", int),
    ("scan", "quartic"): ("quartic", lambda s: s.strip().lower()),
    ("model", "h"): ("h", float),
    ("model", "chi"): ("chi", int),
    ("model", "state_chi"): ("state_chi", int),
    ("model", "cache"): ("cache", str.strip),
    ("noise", "q"): ("q", float),
    ("noise", "axes"): ("axes", lambda s: tuple(a.upper() for a in _words(s))),
    ("circuit", "layout"): ("layout", str.strip),
    ("circuit", "depth_t"): ("depth_t", int),
    ("circuit", "d_a"): ("d_a", int),
    ("circuit", "trace_depth_t"): ("trace_depth_t", int),
    ("circuit", "nested"): ("nested", _bool),
    ("optimizer", "max_sweeps"): ("optimizer.max_sweeps", int),
    ("optimizer", "rel_tol"): ("optimizer.rel_tol", float),
    ("optimizer", "restarts"): ("optimizer.restarts", int),
    ("optimizer", "init_noise"): ("optimizer.init_noise", float),
    ("optimizer", "seed"): ("optimizer.seed", int),
    ("optimizer", "haar_restarts"): ("optimizer.haar_restarts", int),
    ("perturbative", "source"): ("source", str.strip),
}


def parse_overrides(items: Iterable[str]) -> dict[tuple[str, str], str]:
    """``section.key=value`` strings to a mapping."""
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        out[(section.lower(), key.strip().lower())] = value.strip()
    return out


def read_entries(text: str) -> dict[tuple[str, str], str]:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return {(sec.lower(), key): value for sec in cp.sections() for key, value in cp[sec].items()}


def build_config(entries: dict[tuple[str, str], str]) -> ScanConfig:
    """Validate raw entries into a :class:`ScanConfig`.

    Raises:
        ConfigError: naming the offending ``section.key``.
    """
    for sec, key in entries:
        if (sec, key) not in KEYS:
            raise ConfigError(f"unknown config key {sec}.{key}")
    for name in REQUIRED:
        sec, key = name.split(".")
        if (sec, key) not in entries or not entries[(sec, key)].strip():
            raise ConfigError(f"missing required key {name}")
    top: dict[str, Any] = {}
    opt: dict[str, Any] = {}
    for (sec, key), raw in entries.items():
        target, parse = KEYS[(sec, key)]
        try:
            value = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {sec}.{key}: {raw!r} ({exc})") from None
        if target.startswith("optimizer."):
            opt[target.split(".", 1)[1]] = value
        else:
            top[target] = value
    try:
        top["optimizer"] = dataclasses.replace(SCAN_OPTIMIZER, **opt)
    except ValueError as exc:
        raise ConfigError(f"optimizer section: {exc}") from None
    return ScanConfig(**top)


def load_config(text: str, overrides: Iterable[str] = ()) -> ScanConfig:
    entries = read_entries(text)
    entries.update(parse_overrides(overrides))
    return build_config(entries)


def dump_config(cfg: ScanConfig) -> str:
    """Config text that reloads to ``cfg``."""
    sections: dict[str, list[str]] = {}
    opt = dataclasses.asdict(cfg.optimizer)
    for (sec, key), (target, _) in KEYS.items():
        if target.startswith("optimizer."):
            value = opt[target.split(".", 1)[1]]
        else:
            value = getattr(cfg, target)
        if isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        sections.setdefault(sec, []).append(f"{key} = {value}")
    return "\n".join(f"[{sec}]\n" + "\n".join(lines) + "\n" for sec, lines in sections.items())
