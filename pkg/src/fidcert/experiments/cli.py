"""Command line entry point.

Exit codes: 0 on success, 2 for configuration or input errors, 3 for
numerical failures (non-convergence, bound violations, contraction errors).
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import lpdo as lp
from .. import models, oracle
from ..circuit import Layout
from ..variational import OptimizerConfig, certify_pair
from . import records as rec
from .config import ConfigError, ScanConfig, build_config, parse_overrides, read_entries
from .scans import run_scan

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
BUNDLED = "bundled:"


def data_path(name: str) -> Path:
    """Path of a file shipped in ``fidcert/data``."""
    return Path(str(resources.files("fidcert") / "data" / name))


def _resolve(path: str) -> Path:
    p = data_path(path[len(BUNDLED):]) if path.startswith(BUNDLED) else Path(path)
    if not p.exists():
        raise ConfigError(f"no such file: {path}")
    return p


def _read_text(path: str) -> str:
    return _resolve(path).read_text(encoding="utf-8")


# ---------------------------------------------------------------- subcommands


def _cmd_eigenstate(a: argparse.Namespace) -> int:
    energy, st, meta = models.eigenstate(models.IsingSpec(a.n, a.h), a.m, chi=a.chi, cache=a.cache)
    if a.out:
        models.save_mps(a.out, st, meta)
    print(json.dumps({"n": a.n, "m": a.m, "energy": energy, "method": meta["method"], "residual": meta["residual"],
                      "max_bond": st.max_bond}, sort_keys=True))
    return EXIT_OK


def _cmd_dephase(a: argparse.Namespace) -> int:
    st, _ = models.load_mps(_resolve(a.state))
    out = models.dephase_state(st, a.q, a.axis)
    lp.save_lpdo(a.out, out)
    print(f"wrote {a.out}: N={len(out)} kraus={out.kraus_dims} bonds={out.bond_dims}")
    return EXIT_OK


def _load_pair(a: argparse.Namespace) -> tuple[lp.LPDO, lp.LPDO]:
    try:
        return lp.load_lpdo(_resolve(a.rho)), lp.load_lpdo(_resolve(a.sigma))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot read LPDO file: {exc}") from exc


def _cmd_certify(a: argparse.Namespace) -> int:
    rho, sigma = _load_pair(a)
    try:
        cfg = OptimizerConfig(max_sweeps=a.max_sweeps, restarts=a.restarts, init_noise=a.init_noise, seed=a.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    iv = certify_pair(rho, sigma, a.layout, a.depth, cfg, a.d_a, nested=a.nested)
    if a.json:
        print(json.dumps(iv.to_record(), sort_keys=True))
    else:
        print(f"f_lower {iv.f_lower:.12f}")
        print(f"f_upper {iv.f_upper:.12f}")
        print(f"sqrt_subfidelity {iv.sqrt_subfidelity:.12f}")
        print(f"sqrt_superfidelity {iv.sqrt_superfidelity:.12f}")
        print(f"interval [{iv.f_lower:.12f}, {iv.f_upper:.12f}]")
    return EXIT_OK


def _cmd_oracle(a: argparse.Namespace) -> int:
    rho, sigma = _load_pair(a)
    r, s = rho.to_dense(), sigma.to_dense()
    sub, sup = lp.dense_moment_bounds(r, s)
    print(f"fidelity {oracle.dense_fidelity(r, s):.12f}")
    print(f"trace_norm {oracle.dense_trace_norm(r, s):.12f}")
    print(f"subfidelity {sub:.12f}")
    print(f"superfidelity {sup:.12f}")
    return EXIT_OK


def emit(records: Sequence[rec.ScanRecord], cfg: ScanConfig) -> list[Path]:
    """Write the requested formats next to ``cfg.output`` (or CSV to stdout)."""
    if not cfg.output:
        sys.stdout.write(rec.to_csv(records))
        return []
    stem = Path(cfg.output)
    if stem.suffix in (".csv", ".json", ".svg"):
        stem = stem.with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in cfg.emit:
        path = stem.with_suffix("." + kind)
        if kind == "csv":
            text = rec.to_csv(records)
        elif kind == "json":
            text = rec.to_json(records)
        else:
            text = rec.to_svg(records, title=cfg.experiment)
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def _cmd_scan(a: argparse.Namespace) -> int:
    entries = read_entries(_read_text(a.config)) if a.config else {}
    entries.update(parse_overrides(a.set or []))
    entries.setdefault(("scan", "experiment"), a.command)
    cfg = build_config(entries)
    if cfg.experiment != a.command:
        raise ConfigError(f"scan.experiment is {cfg.experiment!r} but the subcommand is {a.command!r}")
    records = run_scan(cfg)
    for path in emit(records, cfg):
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def _cmd_fit(a: argparse.Namespace) -> int:
    try:
        records = rec.from_csv(_read_text(a.csv))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse {a.csv}: {exc}") from exc
    filters = dict(axis=a.axis, m=a.m, n_min=a.n_min, n_max=a.n_max)
    try:
        fit = rec.fit_records(records, a.bound_kind, use_exact=a.exact, **filters)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(f"exponent {fit.exponent:.6f} +- {fit.exponent_stderr:.6f}")
    print(f"prefactor {fit.prefactor:.6g}")
    print(f"r_squared {fit.r_squared:.6f}")
    print(f"points_used {fit.points_used}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _pair_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("rho", help="LPDO file for rho (prefix bundled: for shipped files)")
    p.add_argument("sigma", help="LPDO file for sigma")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fidcert", description="Certified fidelity bounds for matrix product density operators.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigenstate", help="low-lying eigenstate of the periodic critical Ising chain")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--chi", type=int, default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eigenstate)

    p = sub.add_parser("dephase", help="apply uniform dephasing to a stored MPS")
    p.add_argument("--state", required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--axis", choices=("Z", "X"), default="Z")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dephase)

    p = sub.add_parser("certify", help="fidelity interval for two LPDO files")
    _pair_args(p)
    p.add_argument("--layout", choices=[x.value for x in Layout], default=Layout.SEQUENTIAL_COMPOSITE.value)
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--d-a", type=int, default=2)
    p.add_argument("--max-sweeps", type=int, default=500)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--init-noise", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nested", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("oracle", help="dense reference values for two small LPDO files")
    _pair_args(p)
    p.set_defaults(func=_cmd_oracle)

    for name, text in (("correlator", "fidelity-correlator scan"), ("codeword", "codeword distinguishability scan"),
                       ("perturbative", "first-order perturbative scan")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", default=None, help="config file (prefix bundled: for shipped files)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config entry")
        p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("fit", help="power-law fit of one bound kind from a scan CSV")
    p.add_argument("csv")
    p.add_argument("--bound-kind", default="fidelity_lower")
    p.add_argument("--axis", default=None)
    p.add_argument("--m", default=None)
    p.add_argument("--n-min", type=int, default=None)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--exact", action="store_true", help="fit the exact column instead of the bound")
    p.set_defaults(func=_cmd_fit)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
