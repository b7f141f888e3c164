"""Open-boundary matrix product states.

Site tensors carry indices ``(left bond, physical, right bond)``.  States are
never renormalized behind the caller's back; use :func:`normalize`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .tensor import Tensor, svd_split

ISO_TOL = 1e-10


@dataclass(frozen=True)
class MPS:
    """Matrix product state.

    Attributes:
        tensors: rank-3 site tensors ``(chi_l, d, chi_r)``.
        center: site index of the orthogonality center, if the state is known
            to be in mixed canonical form.
    """

    tensors: tuple[Tensor, ...]
    center: int | None = field(default=None)

    def __post_init__(self) -> None:
        ts = tuple(np.asarray(t, dtype=np.complex128) for t in self.tensors)
        if not ts:
            raise ValueError("an MPS needs at least one site")
        if ts[0].shape[0] != 1 or ts[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for k, t in enumerate(ts):
            if t.ndim != 3:
                raise ValueError(f"site {k}: expected rank-3 tensor, got shape {t.shape}")
            if k and ts[k - 1].shape[2] != t.shape[0]:
                raise ValueError(f"bond mismatch between sites {k - 1} and {k}")
        object.__setattr__(self, "tensors", ts)

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max([1, *self.bond_dims])

    def to_dense(self) -> np.ndarray:
        v = self.tensors[0].reshape(-1, self.tensors[0].shape[2])
        for t in self.tensors[1:]:
            v = (v @ t.reshape(t.shape[0], -1)).reshape(-1, t.shape[2])
        return v.reshape(-1)

    def scaled(self, factor: complex) -> "MPS":
        ts = list(self.tensors)
        k = self.center if self.center is not None else 0
        ts[k] = ts[k] * factor
        return MPS(tuple(ts), self.center)


# ---------------------------------------------------------------- builders


def product_state(vectors: Sequence[np.ndarray]) -> MPS:
    return MPS(tuple(np.asarray(v, dtype=np.complex128).reshape(1, -1, 1) for v in vectors), center=None)


def basis_state(bits: Sequence[int], local_dim: int = 2) -> MPS:
    vecs = []
    for b in bits:
        v = np.zeros(local_dim)
        v[b] = 1.0
        vecs.append(v)
    return product_state(vecs)


def ghz_state(n: int) -> MPS:
    """(|0...0> + |1...1>)/sqrt(2) with bond dimension 2."""
    if n == 1:
        return product_state([np.array([1.0, 1.0]) / np.sqrt(2)])
    ts = []
    for k in range(n):
        if k == 0:
            t = np.zeros((1, 2, 2))
            t[0, 0, 0] = t[0, 1, 1] = 1 / np.sqrt(2)
        elif k == n - 1:
            t = np.zeros((2, 2, 1))
            t[0, 0, 0] = t[1, 1, 0] = 1.0
        else:
            t = np.zeros((2, 2, 2))
            t[0, 0, 0] = t[1, 1, 1] = 1.0
        ts.append(t)
    return MPS(tuple(ts))


def random_mps(n: int, local_dim: int, chi: int, rng: np.random.Generator, normalized: bool = True) -> MPS:
    dims = [1]
    for k in range(1, n):
        dims.append(min(chi, local_dim**k, local_dim ** (n - k)))
    dims.append(1)
    ts = [
        rng.normal(size=(dims[k], local_dim, dims[k + 1])) + 1j * rng.normal(size=(dims[k], local_dim, dims[k + 1]))
        for k in range(n)
    ]
    m = MPS(tuple(ts))
    return normalize(m) if normalized else m


# ---------------------------------------------------------------- truncation


def truncation_rank(s: np.ndarray, chi_max: int | None, weight_tol: float) -> int:
    """Number of singular values to keep.

    The largest tail whose squared weight is at most ``weight_tol`` times the
    total squared weight is dropped, then the rank is capped at ``chi_max``.
    """
    keep = len(s)
    if weight_tol > 0 and len(s) > 1:
        w = s**2
        tail = np.cumsum(w[::-1])[::-1]  # tail[k] = sum_{j>=k} w_j
        allowed = weight_tol * tail[0]
        drop = np.nonzero(tail <= allowed)[0]
        if drop.size:
            keep = max(int(drop[0]), 1)
    if chi_max is not None:
        keep = min(keep, int(chi_max))
    return max(keep, 1)


def from_dense(vec: np.ndarray, local_dim: int, chi_max: int | None = None, tol: float = 0.0) -> MPS:
    """Build an MPS by successive SVDs; result is left-canonical (center at the last site).

    ``tol`` is a total discarded-weight budget, split evenly over the bonds, so
    that ``|<result|vec>| >= (1 - tol) * |vec|^2``.
    """
    vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
    n = int(round(np.log(vec.size) / np.log(local_dim))) if vec.size > 1 else 1
    if local_dim**n != vec.size or vec.size < local_dim:
        raise ValueError(f"length {vec.size} is not a power of local_dim={local_dim}")
    per_bond = tol / max(n - 1, 1)
    ts = []
    rest = vec.reshape(1, -1)
    for _ in range(n - 1):
        chi_l = rest.shape[0]
        m = rest.reshape(chi_l * local_dim, -1)
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        keep = truncation_rank(s, chi_max, per_bond)
        ts.append(u[:, :keep].reshape(chi_l, local_dim, keep))
        rest = s[:keep, None] * vh[:keep]
    ts.append(rest.reshape(rest.shape[0], local_dim, 1))
    return MPS(tuple(ts), center=n - 1)


# ---------------------------------------------------------------- contractions


def _check_compatible(a: MPS, b: MPS) -> None:
    if len(a) != len(b) or a.phys_dims != b.phys_dims:
        raise ValueError(f"MPS dimension mismatch: {a.phys_dims} vs {b.phys_dims}")


def _transfer(env: np.ndarray, ta: np.ndarray, tb: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    """env(a_l, b_l) -> env(a_r, b_r) with <a| op |b> on the physical leg."""
    if op is not None:
        tb = np.einsum("st,ltr->lsr", op, tb)
    x = np.tensordot(env, tb, axes=(1, 0))  # a_l, s, b_r
    return np.tensordot(ta.conj(), x, axes=((0, 1), (0, 1)))


def matrix_element(a: MPS, b: MPS, ops: Mapping[int, np.ndarray] | None = None) -> complex:
    """<a| prod_i ops[i] |b>."""
    _check_compatible(a, b)
    ops = ops or {}
    for i, op in ops.items():
        if not 0 <= i < len(a):
            raise ValueError(f"site {i} out of range")
        if np.shape(op) != (a.phys_dims[i],) * 2:
            raise ValueError(f"operator at site {i} has shape {np.shape(op)}, expected {(a.phys_dims[i],) * 2}")
    env = np.ones((1, 1), dtype=np.complex128)
    for k in range(len(a)):
        env = _transfer(env, a.tensors[k], b.tensors[k], ops.get(k))
    return complex(env[0, 0])


def inner(a: MPS, b: MPS) -> complex:
    """<a|b> by left-to-right transfer contraction."""
    return matrix_element(a, b)


def norm(m: MPS) -> float:
    return float(np.sqrt(max(inner(m, m).real, 0.0)))


def normalize(m: MPS) -> MPS:
    nrm = norm(m)
    if not np.isfinite(nrm) or nrm == 0:
        raise ValueError("cannot normalize a zero or non-finite state")
    return m.scaled(1.0 / nrm)


def apply_site_op(m: MPS, i: int, op: np.ndarray) -> MPS:
    """|psi'> = O_i |psi>; bond dimensions unchanged."""
    if not 0 <= i < len(m):
        raise ValueError(f"site {i} out of range")
    op = np.asarray(op)
    if op.shape != (m.phys_dims[i],) * 2:
        raise ValueError(f"operator shape {op.shape} does not match physical dim {m.phys_dims[i]}")
    ts = list(m.tensors)
    ts[i] = np.einsum("st,ltr->lsr", op, ts[i])
    return MPS(tuple(ts))


def two_point(m: MPS, op_a: np.ndarray, i: int, op_b: np.ndarray, j: int) -> complex:
    """<psi| O_i O_j |psi> for i != j."""
    if i == j:
        raise ValueError("two_point needs distinct sites")
    return matrix_element(m, m, {i: op_a, j: op_b})


def one_point_profile(bra: MPS, ket: MPS, op: np.ndarray) -> np.ndarray:
    """Vector of <bra| O_i |ket> for every site i, in O(N) transfer steps."""
    _check_compatible(bra, ket)
    n = len(bra)
    lefts = _left_envs(bra, ket)
    rights = _right_envs(bra, ket)
    out = np.empty(n, dtype=np.complex128)
    for i in range(n):
        env = _transfer(lefts[i], bra.tensors[i], ket.tensors[i], op)
        out[i] = np.tensordot(env, rights[i + 1], axes=((0, 1), (0, 1)))
    return out


def two_point_matrix(bra: MPS, ket: MPS, op: np.ndarray) -> np.ndarray:
    """Matrix of <bra| O_i O_j |ket>; the diagonal holds <bra| O_i^2 |ket>.

    Uses O(N^2) transfer steps instead of O(N^3).
    """
    _check_compatible(bra, ket)
    n = len(bra)
    op = np.asarray(op, dtype=np.complex128)
    op2 = op @ op
    lefts = _left_envs(bra, ket)
    rights = _right_envs(bra, ket)
    out = np.empty((n, n), dtype=np.complex128)
    for i in range(n):
        env = _transfer(lefts[i], bra.tensors[i], ket.tensors[i], op2)
        out[i, i] = np.tensordot(env, rights[i + 1], axes=((0, 1), (0, 1)))
        env = _transfer(lefts[i], bra.tensors[i], ket.tensors[i], op)
        for j in range(i + 1, n):
            closed = _transfer(env, bra.tensors[j], ket.tensors[j], op)
            out[i, j] = np.tensordot(closed, rights[j + 1], axes=((0, 1), (0, 1)))
            env = _transfer(env, bra.tensors[j], ket.tensors[j])
    lower = np.tril_indices(n, -1)
    out[lower] = out.T[lower]  # the two operators sit on distinct sites, so they commute
    return out


def _left_envs(a: MPS, b: MPS) -> list[np.ndarray]:
    envs = [np.ones((1, 1), dtype=np.complex128)]
    for k in range(len(a)):
        envs.append(_transfer(envs[-1], a.tensors[k], b.tensors[k]))
    return envs


def _right_envs(a: MPS, b: MPS) -> list[np.ndarray]:
    n = len(a)
    envs: list[np.ndarray] = [np.ones((1, 1), dtype=np.complex128)] * (n + 1)
    for k in range(n - 1, -1, -1):
        x = np.tensordot(b.tensors[k], envs[k + 1], axes=(2, 1))  # b_l, s, a_r
        envs[k] = np.tensordot(a.tensors[k].conj(), x, axes=((1, 2), (1, 2)))
    return envs


# ---------------------------------------------------------------- canonical forms


def left_canonicalize(m: MPS, upto: int | None = None) -> MPS:
    """QR sweep making sites ``0..upto-1`` left isometries (default: all but the last)."""
    ts = list(m.tensors)
    upto = len(ts) - 1 if upto is None else upto
    for k in range(upto):
        chi_l, d, chi_r = ts[k].shape
        q, r = np.linalg.qr(ts[k].reshape(chi_l * d, chi_r))
        ts[k] = q.reshape(chi_l, d, q.shape[1])
        ts[k + 1] = np.tensordot(r, ts[k + 1], axes=(1, 0))
    return MPS(tuple(ts), center=upto if upto == len(ts) - 1 else None)


def canonical_compress(m: MPS, center: int = 0, chi_max: int | None = None, tol: float = 0.0) -> MPS:
    """Mixed-canonical form with center ``center`` and truncated bonds.

    ``tol`` is a total discarded-weight budget split over the bonds.  The
    output is the input with the discarded Schmidt components projected out;
    it is not renormalized.
    """
    n = len(m)
    if not 0 <= center < n:
        raise ValueError(f"center {center} out of range")
    ts = list(left_canonicalize(m).tensors)
    per_bond = tol / max(n - 1, 1)
    for k in range(n - 1, center, -1):
        chi_l, d, chi_r = ts[k].shape
        u, s, vh = np.linalg.svd(ts[k].reshape(chi_l, d * chi_r), full_matrices=False)
        keep = truncation_rank(s, chi_max, per_bond)
        ts[k] = vh[:keep].reshape(keep, d, chi_r)
        ts[k - 1] = np.tensordot(ts[k - 1], u[:, :keep] * s[:keep], axes=(2, 0))
    return MPS(tuple(ts), center=center)


def canonical_defects(m: MPS) -> float:
    """Max deviation from the isometry conditions implied by ``m.center``."""
    if m.center is None:
        raise ValueError("state has no declared center")
    dev = 0.0
    for k, t in enumerate(m.tensors):
        chi_l, d, chi_r = t.shape
        if k < m.center:
            mat = t.reshape(chi_l * d, chi_r)
            dev = max(dev, np.max(np.abs(mat.conj().T @ mat - np.eye(chi_r))))
        elif k > m.center:
            mat = t.reshape(chi_l, d * chi_r)
            dev = max(dev, np.max(np.abs(mat @ mat.conj().T - np.eye(chi_l))))
    return float(dev)
