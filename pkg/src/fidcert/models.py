"""Periodic transverse-field Ising chain: eigenstates, dephasing, perturbative factors.

Site 0 is the most significant bit of a computational-basis index, matching
the C-order reshape used by :func:`fidcert.mps.from_dense`.  Bit value 1 is
the Z = -1 eigenstate.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import lpdo as lp
from . import mps as mps_mod
from .mps import MPS
from .oracle import LowRankFactor
from .tensor import read_tensors, write_tensors

DENSE_MAX_N = 12
SPARSE_MAX_N = 20
COMPRESSION_TOL = 1e-10
RESIDUAL_CAP = 1e-8
CACHE_ENV = "FIDCERT_CACHE"

X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.array([[1.0, 0.0], [0.0, -1.0]])


@dataclass(frozen=True)
class IsingSpec:
    n: int
    h: float = 1.0
    boundary: str = "periodic"

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError("the periodic Ising chain needs n >= 3")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundary conditions are supported")


@dataclass
class EigenstateSet:
    energies: list[float]
    states: list[MPS]
    residuals: list[float]
    provenance: str
    parities: list[int]
    vectors: list[np.ndarray] | None = field(default=None, repr=False)
    degenerate: list[bool] = field(default_factory=list)


# ---------------------------------------------------------------- exact diagonalization


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    c = np.zeros_like(x)
    while np.any(x):
        c += x & 1
        x >>= 1
    return c


def sector_basis(n: int, parity: int | None) -> np.ndarray:
    """Basis indices with prod Z = ``parity`` (all indices if None)."""
    idx = np.arange(2**n, dtype=np.int64)
    if parity is None:
        return idx
    if parity not in (1, -1):
        raise ValueError("parity must be +1 or -1")
    even = _popcount(idx) % 2 == 0
    return idx[even] if parity == 1 else idx[~even]


def hamiltonian(spec: IsingSpec, parity: int | None = None) -> sp.csr_matrix:
    """-sum_i (X_i X_{i+1} + h Z_i) with X_n X_1 included, optionally in a parity sector."""
    n = spec.n
    basis = sector_basis(n, parity)
    dim = basis.size
    pos = np.full(2**n, -1, dtype=np.int64)
    pos[basis] = np.arange(dim)
    bits = (basis[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    diag = -spec.h * np.sum(1 - 2 * bits, axis=1)
    rows, cols, vals = [np.arange(dim)], [np.arange(dim)], [diag.astype(float)]
    for i in range(n):
        j = (i + 1) % n
        mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
        rows.append(np.arange(dim))
        cols.append(pos[basis ^ mask])
        vals.append(-np.ones(dim))
    h = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    h.sum_duplicates()
    return h


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def _sector_lowest(spec: IsingSpec, parity: int, k: int, method: str) -> tuple[np.ndarray, np.ndarray, sp.csr_matrix]:
    h = hamiltonian(spec, parity)
    dim = h.shape[0]
    k = min(k, dim)
    if method == "dense_ed" or dim <= 64 or k >= dim - 1:
        w, v = np.linalg.eigh(h.toarray())
        return w[:k], v[:, :k], h
    v0 = np.full(dim, 1.0 / np.sqrt(dim))
    w, v = spla.eigsh(h, k=k, which="SA", tol=1e-13, v0=v0, ncv=max(2 * k + 12, 24), maxiter=20000)
    order = np.argsort(w)
    return w[order], v[:, order], h


def eigenstates_ed(spec: IsingSpec, k: int = 3, method: str | None = None, keep_vectors: bool = True) -> EigenstateSet:
    """The ``k`` lowest eigenstates, resolved by spin-flip parity.

    Each state is an exact parity eigenstate; degenerate levels (momentum
    pairs) keep the solver's lowest-index vector and are flagged.
    """
    if method is None:
        method = "dense_ed" if spec.n <= DENSE_MAX_N else "sparse_ed"
    if method not in ("dense_ed", "sparse_ed"):
        raise ValueError(f"unknown ED method {method!r}")
    cap = 14 if method == "dense_ed" else SPARSE_MAX_N
    if spec.n > cap:
        raise ValueError(f"{method} supports n <= {cap}, got {spec.n}")
    found = []
    for parity in (1, -1):
        try:
            w, v, h = _sector_lowest(spec, parity, k, method)
        except spla.ArpackNoConvergence as exc:
            raise RuntimeError(f"sparse ED did not converge for n={spec.n}") from exc
        basis = sector_basis(spec.n, parity)
        for e, vec in zip(w, v.T):
            res = float(np.linalg.norm(h @ vec - e * vec))
            full = np.zeros(2**spec.n)
            full[basis] = vec
            found.append((float(e), parity, _fix_sign(full), res))
    found.sort(key=lambda x: x[0])
    found = found[:k]
    energies = [f[0] for f in found]
    residuals = [f[3] for f in found]
    if max(residuals) > RESIDUAL_CAP:
        raise RuntimeError(f"ED residual {max(residuals):.2e} exceeds {RESIDUAL_CAP}")
    degenerate = [any(abs(e - e2) < 1e-10 for j, e2 in enumerate(energies) if j != i) for i, e in enumerate(energies)]
    states = [mps_mod.from_dense(f[2], 2, tol=COMPRESSION_TOL) for f in found]
    return EigenstateSet(energies, states, residuals, method, [f[1] for f in found],
                         [f[2] for f in found] if keep_vectors else None, degenerate)


def parity_expectation(m: MPS) -> float:
    return float(mps_mod.matrix_element(m, m, {i: Z for i in range(len(m))}).real)


# ---------------------------------------------------------------- matrix product operator


def ising_mpo(spec: IsingSpec) -> list[np.ndarray]:
    """MPO tensors (left, right, out, in) with bond dimension 4.

    Channel 0 is "nothing placed", 1 carries a nearest-neighbour X, 2 carries
    the X_1 of the boundary term across the chain and 3 is "complete".
    """
    n, h = spec.n, spec.h
    eye = np.eye(2)
    bulk = np.zeros((4, 4, 2, 2))
    bulk[0, 0] = eye
    bulk[0, 1] = -X
    bulk[1, 3] = X
    bulk[0, 3] = -h * Z
    bulk[2, 2] = eye
    bulk[3, 3] = eye
    first = np.zeros((1, 4, 2, 2))
    first[0, 0] = eye
    first[0, 1] = -X
    first[0, 2] = -X
    first[0, 3] = -h * Z
    last = np.zeros((4, 1, 2, 2))
    last[0, 0] = -h * Z
    last[1, 0] = X
    last[2, 0] = X
    last[3, 0] = eye
    return [first] + [bulk.copy() for _ in range(n - 2)] + [last]


def mpo_to_dense(w: Sequence[np.ndarray]) -> np.ndarray:
    out = w[0]
    for t in w[1:]:
        out = np.einsum("aiuv,ibst->abusvt", out, t)
        a, b, u, s, v, t_ = out.shape
        out = out.reshape(a, b, u * s, v * t_)
    return out[0, 0]


# ---------------------------------------------------------------- dephasing


def dephase_state(m: MPS, q: float, axis: str = "Z") -> lp.LPDO:
    """Uniform single-site dephasing of |psi><psi|."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q={q} outside [0, 1]")
    if axis.upper() not in ("Z", "X"):
        raise ValueError(f"axis must be Z or X, got {axis!r}")
    return lp.apply_channel(lp.from_pure(mps_mod.normalize(m)), lp.dephasing_channel(q, axis))


def dephase_dense(psi: np.ndarray, q: float, axis: str = "Z") -> np.ndarray:
    """Dense (prod_i N_i)(|psi><psi|) by site-by-site Kraus sums."""
    n = int(np.log2(psi.size))
    p = X if axis.upper() == "X" else Z
    rho = np.outer(psi, psi.conj()).reshape([2] * (2 * n))
    for i in range(n):
        flipped = np.tensordot(p, rho, axes=(1, i))
        flipped = np.tensordot(flipped, p.conj(), axes=(n + i, 0))
        flipped = np.moveaxis(np.moveaxis(flipped, 0, i), -1, n + i)
        rho = (1 - q / 2) * rho + (q / 2) * flipped
    return rho.reshape(2**n, 2**n)


# ---------------------------------------------------------------- perturbative expansion


@dataclass(frozen=True)
class CrossGram:
    """Inner products among the columns of two rank-(N+1) factors."""

    ab: np.ndarray
    aa: np.ndarray
    bb: np.ndarray


def _factor_weights(n: int, q: float) -> np.ndarray:
    if q * n > 0.1:
        warnings.warn(f"qN = {q * n:.3g} is not small; the first-order expansion is unreliable", stacklevel=3)
    return np.concatenate([[np.sqrt(max(1 - q * n / 2, 0.0))], np.full(n, np.sqrt(q / 2))])


def gram_from_correlators(ov: complex, one: np.ndarray, one_t: np.ndarray, two: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted Gram matrix of columns {psi, Z_i psi} vs {phi, Z_j phi}.

    ``one[j] = <psi|Z_j|phi>``, ``one_t[i] = <psi|Z_i|phi>`` seen from the
    other side, ``two[i, j] = <psi|Z_i Z_j|phi>`` (diagonal = overlap).
    """
    n = len(one)
    g = np.empty((n + 1, n + 1), dtype=np.complex128)
    g[0, 0] = ov
    g[0, 1:] = one
    g[1:, 0] = one_t
    g[1:, 1:] = two
    return w[:, None] * g * w[None, :]


def perturbative_factors(psi0: MPS, psi2: MPS, q: float, dense: bool = False) -> tuple[LowRankFactor, LowRankFactor] | CrossGram:
    """First-order rank-(N+1) factors of the Z-dephased pair.

    With ``dense=True`` the explicit factor columns are returned; otherwise
    the cross-Gram matrices are built from MPS one- and two-point functions.
    """
    n = len(psi0)
    w = _factor_weights(n, q)
    sites = n if q > 0 else 0  # without noise the factors are the bare states
    if dense:
        cols = []
        for m in (psi0, psi2):
            c = [m.to_dense()]
            for i in range(sites):
                c.append(mps_mod.apply_site_op(m, i, Z).to_dense())
            cols.append(LowRankFactor(np.stack(c, axis=1) * w[None, : sites + 1]))
        return cols[0], cols[1]

    def gram(a: MPS, b: MPS) -> np.ndarray:
        ov = mps_mod.inner(a, b)
        one = mps_mod.one_point_profile(a, b, Z)
        two = mps_mod.two_point_matrix(a, b, Z)
        np.fill_diagonal(two, ov)
        g = gram_from_correlators(ov, one, one, two, w)
        return g[: sites + 1, : sites + 1]

    return CrossGram(gram(psi0, psi2), gram(psi0, psi0), gram(psi2, psi2))


# ---------------------------------------------------------------- cache


def cache_dir(path: str | os.PathLike | None = None) -> Path | None:
    p = path if path is not None else os.environ.get(CACHE_ENV)
    return Path(p) if p else None


def _cache_file(root: Path, spec: IsingSpec, m: int, chi: int | None, method: str) -> Path:
    return root / f"ising_n{spec.n}_h{spec.h:.12g}_m{m}_chi{chi if chi else 'full'}_{method}.mps"


def save_mps(path, m: MPS, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("mps " + json.dumps(meta, sort_keys=True) + "\n")
        write_tensors(fh, m.tensors)


def load_mps(path) -> tuple[MPS, dict]:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline()
        if not head.startswith("mps "):
            raise ValueError(f"{path}: not an MPS file")
        meta = json.loads(head[4:])
        ts = read_tensors(fh)
    return MPS(tuple(ts)), meta


def eigenstate(spec: IsingSpec, m: int, chi: int | None = None, cache: str | os.PathLike | None = None,
               dmrg_kwargs: dict | None = None) -> tuple[float, MPS, dict]:
    """Eigenstate ``m`` from the cache, ED (n <= 20) or penalty DMRG.

    DMRG targets the m=0 and m=2 states in the parity-even sector and m=1 in
    the odd sector; higher m are not supported beyond ED sizes.
    """
    method = "ed" if spec.n <= SPARSE_MAX_N else "dmrg_penalty"
    root = cache_dir(cache)
    if root is not None:
        f = _cache_file(root, spec, m, chi, method)
        if f.exists():
            st, meta = load_mps(f)
            return float(meta["energy"]), st, meta
    if method == "ed":
        es = eigenstates_ed(spec, m + 1, keep_vectors=False)
        energy, st = es.energies[m], es.states[m]
        meta = {"energy": energy, "method": es.provenance, "parity": es.parities[m], "residual": es.residuals[m],
                "degenerate": es.degenerate[m], "n": spec.n, "h": spec.h, "m": m}
    else:
        from .dmrg import dmrg_excited

        if m not in (0, 1, 2):
            raise ValueError("DMRG targets only m in {0, 1, 2}")
        lower = []
        if m == 2:
            _, g, _ = eigenstate(spec, 0, chi, cache, dmrg_kwargs)
            lower = [g]
        res = dmrg_excited(spec, m, chi or 64, lower_states=lower, parity=-1 if m == 1 else 1, **(dmrg_kwargs or {}))
        energy, st = res.energy, res.state
        meta = {"energy": energy, "method": "dmrg_penalty", "parity": -1 if m == 1 else 1, "residual": res.residual,
                "degenerate": False, "n": spec.n, "h": spec.h, "m": m, "truncation": res.max_truncation,
                "sweeps": res.sweeps}
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)
        save_mps(_cache_file(root, spec, m, chi, method), st, meta)
    return energy, st, meta
