"""Two-site DMRG with penalty projectors for low-lying Ising eigenstates.

Works in real arithmetic; the periodic coupling is a long-range channel of
the matrix-product operator.  Excited states are found as ground states of
``H + w sum_k |phi_k><phi_k|`` and an optional parity penalty
``w (1 - s P) / 2`` with ``P = prod Z`` selects the spin-flip sector ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .models import IsingSpec, Z, ising_mpo
from .mps import MPS, truncation_rank


@dataclass
class DMRGResult:
    energy: float
    state: MPS
    residual: float
    sweeps: int
    max_truncation: float
    overlaps: list[float]


def _right_canonical(ts: list[np.ndarray]) -> list[np.ndarray]:
    ts = [t.copy() for t in ts]
    for i in range(len(ts) - 1, 0, -1):
        l, d, r = ts[i].shape
        q, rr = np.linalg.qr(ts[i].reshape(l, d * r).T)
        ts[i] = q.T.reshape(-1, d, r)
        ts[i - 1] = np.einsum("ldr,rk->ldk", ts[i - 1], rr.T, optimize=True)
    ts[0] /= np.linalg.norm(ts[0])
    return ts


def _mpo_left(env, a, w):
    # env (x bra, p mpo, y ket) -> next
    t = np.einsum("xpy,ysr->xpsr", env, a, optimize=True)
    t = np.einsum("xpsr,pqus->xqur", t, w, optimize=True)
    return np.einsum("xqur,xuz->zqr", t, a, optimize=True)


def _mpo_right(env, a, w):
    t = np.einsum("ysr,zqr->yszq", a, env, optimize=True)
    t = np.einsum("yszq,pqus->yupz", t, w, optimize=True)
    return np.einsum("yupz,xuz->xpy", t, a, optimize=True)


def _ov_left(env, phi, a, op=None):
    # env (x phi, y psi)
    b = a if op is None else np.einsum("us,ysr->yur", op, a, optimize=True)
    t = np.einsum("xy,yur->xur", env, b, optimize=True)
    return np.einsum("xur,xuz->zr", t, phi, optimize=True)


def _ov_right(env, phi, a, op=None):
    b = a if op is None else np.einsum("us,ysr->yur", op, a, optimize=True)
    t = np.einsum("yur,zr->yuz", b, env, optimize=True)
    return np.einsum("yuz,xuz->xy", t, phi, optimize=True)


def _random_mps(n: int, chi: int, rng: np.random.Generator) -> list[np.ndarray]:
    dims = [1] + [min(chi, 2**k, 2 ** (n - k)) for k in range(1, n)] + [1]
    return [rng.normal(size=(dims[k], 2, dims[k + 1])) for k in range(n)]


def dmrg_excited(
    spec: IsingSpec,
    m: int,
    chi: int,
    penalty_weight: float = 10.0,
    lower_states: Sequence[MPS] = (),
    parity: int | None = None,
    parity_weight: float | None = None,
    max_sweeps: int = 40,
    energy_tol: float = 1e-11,
    svd_tol: float = 1e-14,
    seed: int = 0,
    init: MPS | None = None,
) -> DMRGResult:
    """Lowest state of H plus penalties; ``m`` is recorded only for bookkeeping.

    ``lower_states`` must cover every state below the target inside the
    selected parity sector (all states below it when ``parity`` is None).
    """
    n = spec.n
    w_mpo = ising_mpo(spec)
    rng = np.random.default_rng(seed)
    lowers = [[np.ascontiguousarray(t.real) for t in s.tensors] for s in lower_states]
    for s in lower_states:
        if np.max([np.abs(t.imag).max() for t in s.tensors]) > 1e-12:
            raise ValueError("lower states must be real")
    pw = penalty_weight if parity_weight is None else parity_weight
    ts = [np.ascontiguousarray(t.real) for t in init.tensors] if init is not None else _random_mps(n, min(chi, 8), rng)
    ts = _right_canonical(ts)

    one = np.ones((1, 1, 1))
    lenv: list = [None] * (n + 1)
    renv: list = [None] * (n + 1)
    lenv[0] = one
    renv[n] = one
    lov = [[None] * (n + 1) for _ in lowers]
    rov = [[None] * (n + 1) for _ in lowers]
    lpar: list = [None] * (n + 1)
    rpar: list = [None] * (n + 1)
    for k in range(len(lowers)):
        lov[k][0] = np.ones((1, 1))
        rov[k][n] = np.ones((1, 1))
    lpar[0] = np.ones((1, 1))
    rpar[n] = np.ones((1, 1))

    def build_right(i: int) -> None:
        renv[i] = _mpo_right(renv[i + 1], ts[i], w_mpo[i])
        for k, low in enumerate(lowers):
            rov[k][i] = _ov_right(rov[k][i + 1], low[i], ts[i])
        rpar[i] = _ov_right(rpar[i + 1], ts[i], ts[i], Z)

    def build_left(i: int) -> None:
        lenv[i + 1] = _mpo_left(lenv[i], ts[i], w_mpo[i])
        for k, low in enumerate(lowers):
            lov[k][i + 1] = _ov_left(lov[k][i], low[i], ts[i])
        lpar[i + 1] = _ov_left(lpar[i], ts[i], ts[i], Z)

    for i in range(n - 1, 0, -1):
        build_right(i)

    def solve(i: int) -> tuple[float, np.ndarray]:
        L, R = lenv[i], renv[i + 2]
        w1, w2 = w_mpo[i], w_mpo[i + 1]
        shape = (ts[i].shape[0], 2, 2, ts[i + 1].shape[2])
        projs = []
        for k, low in enumerate(lowers):
            p = np.einsum("xy,xsm,mtz,zr->ystr", lov[k][i], low[i], low[i + 1], rov[k][i + 2], optimize=True)
            projs.append(p.reshape(-1))
        lp_, rp_ = lpar[i], rpar[i + 2]

        def matvec(v: np.ndarray) -> np.ndarray:
            th = v.reshape(shape)
            t = np.einsum("xay,ystr->xastr", L, th, optimize=True)
            t = np.einsum("xastr,abus->xbutr", t, w1, optimize=True)
            t = np.einsum("xbutr,bcvt->xcuvr", t, w2, optimize=True)
            out = np.einsum("xcuvr,zcr->xuvz", t, R, optimize=True).reshape(-1)
            for p in projs:
                out += penalty_weight * p * (p @ v)
            if parity is not None:
                pv = np.einsum("xy,ystr,zr->xstz", lp_, th * np.array([1, -1])[None, :, None, None]
                               * np.array([1, -1])[None, None, :, None], rp_, optimize=True).reshape(-1)
                out += 0.5 * pw * (v - parity * pv)
            return out

        dim = int(np.prod(shape))
        v0 = np.einsum("lsm,mtr->lstr", ts[i], ts[i + 1], optimize=True).reshape(-1)
        if dim <= 32:
            hm = np.stack([matvec(e) for e in np.eye(dim)], axis=1)
            ev, evec = np.linalg.eigh((hm + hm.T) / 2)
            return float(ev[0]), evec[:, 0].reshape(shape)
        op = spla.LinearOperator((dim, dim), matvec=matvec, dtype=float)
        ev, evec = spla.eigsh(op, k=1, which="SA", v0=v0, tol=1e-12, ncv=min(dim, 20), maxiter=5000)
        return float(ev[0]), evec[:, 0].reshape(shape)

    def split(th: np.ndarray, i: int, to_right: bool) -> float:
        l, _, _, r = th.shape
        u, s, vh = np.linalg.svd(th.reshape(l * 2, 2 * r), full_matrices=False)
        keep = truncation_rank(s, chi, svd_tol)
        disc = float(np.sum(s[keep:] ** 2) / np.sum(s**2))
        s = s[:keep] / np.linalg.norm(s[:keep])
        if to_right:
            ts[i] = u[:, :keep].reshape(l, 2, keep)
            ts[i + 1] = (s[:, None] * vh[:keep]).reshape(keep, 2, r)
        else:
            ts[i] = (u[:, :keep] * s[None, :]).reshape(l, 2, keep)
            ts[i + 1] = vh[:keep].reshape(keep, 2, r)
        return disc

    energy_prev = np.inf
    max_trunc = 0.0
    sweeps = 0
    e = np.inf
    for sweeps in range(1, max_sweeps + 1):
        max_trunc = 0.0
        for i in range(n - 1):
            e, th = solve(i)
            max_trunc = max(max_trunc, split(th, i, True))
            build_left(i)
        for i in range(n - 2, -1, -1):
            e, th = solve(i)
            max_trunc = max(max_trunc, split(th, i, False))
            build_right(i + 1)
        if abs(e - energy_prev) < energy_tol * max(1.0, abs(e)):
            break
        energy_prev = e

    state = MPS(tuple(t.astype(np.complex128) for t in ts), center=0)
    energy, residual = _energy_and_residual(spec, ts)
    overlaps = [abs(_overlap(low, ts)) for low in lowers]
    if overlaps and max(overlaps) > 1e-4:
        raise RuntimeError(f"penalty too small: overlap {max(overlaps):.2e} with a lower state")
    if parity is not None:
        par = _expect_parity(ts)
        if abs(par - parity) > 1e-4:
            raise RuntimeError(f"DMRG state has parity {par:.6f}, expected {parity}")
    return DMRGResult(energy, state, residual, sweeps, max_trunc, overlaps)


def _overlap(a: list[np.ndarray], b: list[np.ndarray]) -> float:
    env = np.ones((1, 1))
    for ta, tb in zip(a, b):
        env = _ov_left(env, ta, tb)
    return float(env[0, 0])


def _expect_parity(ts: list[np.ndarray]) -> float:
    env = np.ones((1, 1))
    for t in ts:
        env = _ov_left(env, t, t, Z)
    return float(env[0, 0])


def _energy_and_residual(spec: IsingSpec, ts: list[np.ndarray]) -> tuple[float, float]:
    """<H> and ||(H - <H>) psi|| from <H> and <H^2> contracted with the MPO."""
    w = ising_mpo(spec)
    env1 = np.ones((1, 1, 1))
    env2 = np.ones((1, 1, 1, 1))
    for t, wt in zip(ts, w):
        env1 = _mpo_left(env1, t, wt)
        x = np.einsum("xpqy,ysr->xpqsr", env2, t, optimize=True)
        x = np.einsum("xpqsr,qbus->xpbur", x, wt, optimize=True)
        x = np.einsum("xpbur,pavu->xabvr", x, wt, optimize=True)
        env2 = np.einsum("xabvr,xvz->zabr", x, t, optimize=True)
    e = float(env1.reshape(-1)[0])
    h2 = float(env2.reshape(-1)[0])
    return e, float(np.sqrt(max(h2 - e * e, 0.0)))
