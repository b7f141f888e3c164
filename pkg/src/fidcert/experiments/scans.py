"""Scan drivers: fidelity correlators, codeword distinguishability, and the
first-order perturbative scan.

Each scan point is an independent deterministic task, so points can run in a
process pool; output order is fixed by :func:`records.sort_key`.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from .. import free_fermion as ff
from .. import lpdo as lp
from .. import models
from .. import mps as mps_mod
from .. import oracle
from ..tensor import hermitian_eig, nuclear_norm
from ..variational import certify_pair
from .config import ScanConfig
from .records import ScanRecord, sort_key

X = models.X
TRANSLATION_EXACT_MAX_N = 16
QUARTIC_MAX_BOND = 6  # the quartic moment costs chi^8 memory per site


def antipodal_sites(n: int) -> tuple[int, int]:
    """Sites (i, i + N/2) with i the first site (0-based)."""
    return 0, n // 2


def _states(cfg: ScanConfig, n: int, m: int) -> mps_mod.MPS:
    """Eigenstate m, compressed to ``state_chi`` when that is set and smaller."""
    _, st, _ = models.eigenstate(models.IsingSpec(n, cfg.h), m, chi=cfg.chi, cache=cfg.cache or None)
    if cfg.state_chi and st.max_bond > cfg.state_chi:
        st = mps_mod.normalize(mps_mod.canonical_compress(st, chi_max=cfg.state_chi))
    return st


def _quartic(cfg: ScanConfig, *states: lp.LPDO) -> bool:
    if cfg.quartic == "auto":
        return max(max(s.bond_dims, default=1) for s in states) <= QUARTIC_MAX_BOND
    return cfg.quartic == "true"


def _interval_records(cfg: ScanConfig, base: dict, rho: lp.LPDO, sigma: lp.LPDO, exact: float | None) -> list[ScanRecord]:
    start = time.perf_counter()
    iv = certify_pair(rho, sigma, cfg.layout, cfg.depth_t, cfg.optimizer, cfg.d_a,
                      trace_depth_t=cfg.trace_depth_t or None, quartic=_quartic(cfg, rho, sigma), nested=cfg.nested)
    wall = time.perf_counter() - start
    sub = iv.subfidelity if np.isfinite(iv.subfidelity) else None
    out = []
    for rep in iv.reports:
        out.append(ScanRecord(**base, layout=rep.layout, depth_t=rep.depth_t, bound_kind=rep.kind, value=rep.value,
                              subfidelity=sub, superfidelity=iv.superfidelity, exact=exact,
                              sweeps=rep.sweeps_used, converged=rep.converged,
                              seed=cfg.optimizer.seed, wall_seconds=wall))
    return out


# ---------------------------------------------------------------- correlator


def correlator_point(cfg: ScanConfig, n: int, m: int, axis: str) -> list[ScanRecord]:
    """Noiseless |<X_i X_j>| plus certified bounds on F(rho, X_i X_j rho X_i X_j)."""
    start = time.perf_counter()
    psi = _states(cfg, n, m)
    i, j = antipodal_sites(n)
    noiseless = abs(mps_mod.two_point(psi, X, i, X, j))
    base = dict(experiment="correlator", n=n, q=cfg.q, axis=axis, m=str(m))
    exact = None
    if n <= min(cfg.exact_cap, models.DENSE_MAX_N):
        flipped = mps_mod.apply_site_op(mps_mod.apply_site_op(psi, i, X), j, X)
        exact = oracle.dephased_pure_fidelity(psi.to_dense(), flipped.to_dense(), cfg.q, axis)
    out = [ScanRecord(**base, layout="", depth_t=0, bound_kind="noiseless", value=float(noiseless),
                      subfidelity=None, superfidelity=None, exact=None, sweeps=0, converged=True,
                      seed=cfg.optimizer.seed, wall_seconds=time.perf_counter() - start)]
    if cfg.q > 0:
        rho = models.dephase_state(psi, cfg.q, axis)
        sigma = lp.conjugate_site_op(lp.conjugate_site_op(rho, i, X), j, X)
        out += _interval_records(cfg, base, rho, sigma, exact)
    return out


# ---------------------------------------------------------------- codeword


def codeword_exact(n: int, q: float, axis: str, psi0: mps_mod.MPS, psi2: mps_mod.MPS, h: float = 1.0) -> float:
    """Exact F(N(psi_0), N(psi_2)): dense for small n, momentum-blocked beyond."""
    if n <= models.DENSE_MAX_N:
        return oracle.dephased_pure_fidelity(psi0.to_dense(), psi2.to_dense(), q, axis)
    # MPS truncation breaks translation invariance, so the blocked oracle
    # takes the ED vectors
    vecs = models.eigenstates_ed(models.IsingSpec(n, h), 3).vectors
    return oracle.dephased_pure_fidelity_translation(vecs[0], vecs[2], q, axis)


def codeword_point(cfg: ScanConfig, n: int, axis: str) -> list[ScanRecord]:
    """Certified bounds on F(N(psi_0), N(psi_2)) for one noise axis."""
    psi0, psi2 = _states(cfg, n, 0), _states(cfg, n, 2)
    exact = None
    if n <= min(cfg.exact_cap, TRANSLATION_EXACT_MAX_N):
        exact = codeword_exact(n, cfg.q, axis, psi0, psi2, cfg.h)
    rho, sigma = models.dephase_state(psi0, cfg.q, axis), models.dephase_state(psi2, cfg.q, axis)
    base = dict(experiment="codeword", n=n, q=cfg.q, axis=axis, m="0,2")
    return _interval_records(cfg, base, rho, sigma, exact)


# ---------------------------------------------------------------- perturbative


def free_fermion_gram(n: int, h: float, q: float) -> models.CrossGram:
    """Cross-Gram matrices of the first-order factors from free-fermion correlators."""
    w = models._factor_weights(n, q)
    sites = n if q > 0 else 0

    def gram(bra: tuple[int, ...], ket: tuple[int, ...]) -> np.ndarray:
        ov, one, two = ff.z_profiles(n, h, bra, ket)
        g = models.gram_from_correlators(ov, one, one, ff.circulant(two), w)
        return g[: sites + 1, : sites + 1]

    return models.CrossGram(gram(ff.GROUND, ff.EPSILON), gram(ff.GROUND, ff.GROUND), gram(ff.EPSILON, ff.EPSILON))


def perturbative_quantities(g: models.CrossGram) -> tuple[float, float, float]:
    """(fidelity, sqrt Tr(rho sigma), sqrt(1 - T^2)) from the factor Grams.

    With ``C = [A, B]`` and ``J = diag(1, -1)``, ``rho - sigma = C J C^dagger``
    has the nonzero spectrum of ``K^(1/2) J K^(1/2)`` where ``K = C^dagger C``.
    """
    fid = nuclear_norm(g.ab)
    sqrt_tr = float(np.linalg.norm(g.ab))
    k = np.block([[g.aa, g.ab], [g.ab.conj().T, g.bb]])
    kw, kv = hermitian_eig(k, tol=1e-8)
    root = (kv * np.sqrt(np.clip(kw, 0.0, None))) @ kv.conj().T
    j = np.concatenate([np.ones(g.aa.shape[0]), -np.ones(g.bb.shape[0])])
    ev, _ = hermitian_eig(root @ (j[:, None] * root), tol=1e-8)
    t = min(0.5 * float(np.sum(np.abs(ev))), 1.0)
    return fid, sqrt_tr, float(np.sqrt(1.0 - t * t))


PERTURBATIVE_KINDS = ("fidelity_low_rank", "sqrt_tr_rho_sigma", "fidelity_upper_proxy")


def perturbative_point(cfg: ScanConfig, n: int) -> list[ScanRecord]:
    start = time.perf_counter()
    if cfg.q * n > 0.1:
        raise ValueError(f"qN = {cfg.q * n:.3g} exceeds 0.1; the first-order expansion does not apply")
    if cfg.source == "free_fermion":
        g = free_fermion_gram(n, cfg.h, cfg.q)
    else:
        g = models.perturbative_factors(_states(cfg, n, 0), _states(cfg, n, 2), cfg.q)
    vals = perturbative_quantities(g)
    wall = time.perf_counter() - start
    return [ScanRecord(experiment="perturbative", n=n, q=cfg.q, axis="Z", m="0,2", layout=cfg.source, depth_t=0,
                       bound_kind=kind, value=v, subfidelity=None, superfidelity=None, exact=None, sweeps=0,
                       converged=True, seed=cfg.optimizer.seed, wall_seconds=wall)
            for kind, v in zip(PERTURBATIVE_KINDS, vals)]


# ---------------------------------------------------------------- drivers


def _tasks(cfg: ScanConfig) -> list[tuple[Callable, tuple]]:
    if cfg.experiment == "correlator":
        return [(correlator_point, (cfg, n, m, a)) for n in cfg.n_list for m in cfg.m_indices for a in cfg.axes]
    if cfg.experiment == "codeword":
        return [(codeword_point, (cfg, n, a)) for n in cfg.n_list for a in cfg.axes]
    return [(perturbative_point, (cfg, n)) for n in cfg.n_list]


def _call(task: tuple[Callable, tuple]) -> list[ScanRecord]:
    fn, args = task
    return fn(*args)


def run_scan(cfg: ScanConfig) -> list[ScanRecord]:
    tasks = _tasks(cfg)
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_call, tasks))
    else:
        chunks = [_call(t) for t in tasks]
    return sorted((r for c in chunks for r in c), key=sort_key)


def correlator_scan(cfg: ScanConfig) -> list[ScanRecord]:
    if cfg.experiment != "correlator":
        raise ValueError("config is not a correlator scan")
    return run_scan(cfg)


def codeword_scan(cfg: ScanConfig) -> list[ScanRecord]:
    if cfg.experiment != "codeword":
        raise ValueError("config is not a codeword scan")
    return run_scan(cfg)


def perturbative_scan(cfg: ScanConfig) -> list[ScanRecord]:
    if cfg.experiment != "perturbative":
        raise ValueError("config is not a perturbative scan")
    return run_scan(cfg)
