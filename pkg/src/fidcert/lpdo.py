"""Locally purified matrix product density operators.

An LPDO stores a purification ``|psi>>`` of ``rho`` as a two-sided MPS whose
site tensors carry ``(left bond, physical, purification, right bond)``;
``rho = Tr_p |psi>><<psi|`` is positive semidefinite by construction.
Kraus legs are never recompressed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import opt_einsum as oe

from . import mps as mps_mod
from .mps import MPS
from .tensor import Tensor, is_unitary, read_tensors, write_tensors

TRACE_TOL = 1e-10
MIN_TRACE = 1e-14
RADICAND_TOL = 1e-12
# radicands within this many ulps of the cancelling terms are rounding noise
CANCEL_ULPS = 64

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class LPDO:
    tensors: tuple[Tensor, ...]

    def __post_init__(self) -> None:
        ts = tuple(np.asarray(t, dtype=np.complex128) for t in self.tensors)
        if not ts:
            raise ValueError("an LPDO needs at least one site")
        if ts[0].shape[0] != 1 or ts[-1].shape[3] != 1:
            raise ValueError("boundary bonds must have extent 1")
        for k, t in enumerate(ts):
            if t.ndim != 4:
                raise ValueError(f"site {k}: expected (left, phys, kraus, right) tensor, got {t.shape}")
            if k and ts[k - 1].shape[3] != t.shape[0]:
                raise ValueError(f"bond mismatch between sites {k - 1} and {k}")
        object.__setattr__(self, "tensors", ts)

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def kraus_dims(self) -> list[int]:
        return [t.shape[2] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    def purification(self) -> MPS:
        """The purification as an MPS over merged (physical, kraus) legs."""
        return MPS(tuple(t.reshape(t.shape[0], t.shape[1] * t.shape[2], t.shape[3]) for t in self.tensors))

    def purification_vector(self) -> np.ndarray:
        """Dense purification with system legs first: shape ``(D_s, D_p)``."""
        n = len(self)
        v = self.purification().to_dense()
        shape = []
        for t in self.tensors:
            shape += [t.shape[1], t.shape[2]]
        v = v.reshape(shape).transpose(list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2)))
        return v.reshape(int(np.prod(self.phys_dims)), int(np.prod(self.kraus_dims)))

    def to_dense(self) -> np.ndarray:
        a = self.purification_vector()
        return a @ a.conj().T


@dataclass(frozen=True)
class KrausChannel:
    """Single-site channel applied on ``sites`` (``None`` means every site)."""

    operators: tuple[np.ndarray, ...]
    sites: tuple[int, ...] | None = None
    label: str = ""

    def __post_init__(self) -> None:
        ops = tuple(np.asarray(k, dtype=np.complex128) for k in self.operators)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if any(k.shape != (d, d) for k in ops):
            raise ValueError("Kraus operators must be square with equal dimension")
        object.__setattr__(self, "operators", ops)

    def is_trace_preserving(self, tol: float = TRACE_TOL) -> bool:
        d = self.operators[0].shape[0]
        s = sum(k.conj().T @ k for k in self.operators)
        return bool(np.max(np.abs(s - np.eye(d))) <= tol)


def dephasing_channel(q: float, axis: str = "Z", sites: Sequence[int] | None = None) -> KrausChannel:
    """(1 - q/2) rho + (q/2) P rho P with P the Pauli ``axis``.

    Kraus operators are sqrt(1 - q/2) I and sqrt(q/2) P, so ``q`` is twice the
    flip probability.  ``q = 0`` gives the single identity operator.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"dephasing strength q={q} outside [0, 1]")
    axis = axis.upper()
    if axis not in ("X", "Y", "Z"):
        raise ValueError(f"unknown dephasing axis {axis!r}")
    if q == 0:
        ops: tuple[np.ndarray, ...] = (PAULI["I"],)
    else:
        ops = (np.sqrt(1 - q / 2) * PAULI["I"], np.sqrt(q / 2) * PAULI[axis])
    return KrausChannel(ops, None if sites is None else tuple(sites), label=f"{axis}-dephasing q={q}")


# ---------------------------------------------------------------- constructors


def from_pure(m: MPS, tol: float = 1e-8) -> LPDO:
    """|psi><psi| with trivial (extent-1) purification legs."""
    nrm2 = mps_mod.inner(m, m).real
    if abs(nrm2 - 1) > tol:
        raise ValueError(f"from_pure needs a normalized state (norm^2 = {nrm2:.12g})")
    return LPDO(tuple(t[:, :, None, :] for t in m.tensors))


def maximally_mixed(n: int, d: int = 2) -> LPDO:
    """I/d^n purified by one maximally entangled pair per site."""
    t = (np.eye(d) / np.sqrt(d)).reshape(1, d, d, 1)
    return LPDO(tuple(t for _ in range(n)))


def random_lpdo(n: int, d_s: int, d_p: int, chi: int, rng: np.random.Generator, normalized: bool = True) -> LPDO:
    dims = [1]
    for k in range(1, n):
        dims.append(min(chi, (d_s * d_p) ** k, (d_s * d_p) ** (n - k)))
    dims.append(1)
    ts = []
    for k in range(n):
        shape = (dims[k], d_s, d_p, dims[k + 1])
        ts.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    s = LPDO(tuple(ts))
    return trace_and_normalize(s)[1] if normalized else s


# ---------------------------------------------------------------- operations


def apply_channel(s: LPDO, ch: KrausChannel) -> LPDO:
    """Apply ``ch`` on its sites; each targeted kraus dim grows by len(ch.operators)."""
    if not ch.is_trace_preserving():
        raise ValueError(f"channel {ch.label!r} is not trace preserving")
    k_ops = np.stack(ch.operators)  # k, s, t
    sites = range(len(s)) if ch.sites is None else ch.sites
    ts = list(s.tensors)
    for i in sites:
        if not 0 <= i < len(s):
            raise ValueError(f"site {i} out of range")
        if k_ops.shape[1] != s.phys_dims[i]:
            raise ValueError(f"Kraus dimension {k_ops.shape[1]} != physical dimension {s.phys_dims[i]} at site {i}")
        t = np.einsum("kst,ltpr->lspkr", k_ops, ts[i])
        ls, ds, dp, dk, rs = t.shape
        ts[i] = t.reshape(ls, ds, dp * dk, rs)
    return LPDO(tuple(ts))


def conjugate_site_op(s: LPDO, i: int, op: np.ndarray, tol: float = 1e-10) -> LPDO:
    """O_i rho O_i^dagger for unitary O, acting on the ket physical leg."""
    op = np.asarray(op, dtype=np.complex128)
    if not 0 <= i < len(s):
        raise ValueError(f"site {i} out of range")
    if op.shape != (s.phys_dims[i],) * 2:
        raise ValueError(f"operator shape {op.shape} does not match physical dim {s.phys_dims[i]}")
    if not is_unitary(op, tol):
        raise ValueError("conjugate_site_op needs a unitary operator")
    ts = list(s.tensors)
    ts[i] = np.einsum("st,ltpr->lspr", op, ts[i])
    return LPDO(tuple(ts))


def trace(s: LPDO) -> complex:
    p = s.purification()
    return mps_mod.inner(p, p)


def trace_and_normalize(s: LPDO) -> tuple[complex, LPDO]:
    tr = trace(s)
    if abs(tr) < MIN_TRACE:
        raise ValueError(f"trace {abs(tr):.3e} too small to normalize")
    return tr, scale(s, 1.0 / tr.real)


def scale(s: LPDO, c: float) -> LPDO:
    """The LPDO representing c * rho (c > 0)."""
    if not c > 0:
        raise ValueError("scale factor must be positive")
    ts = list(s.tensors)
    ts[0] = ts[0] * np.sqrt(c)
    return LPDO(tuple(ts))


def pad_kraus(s: LPDO, dims: Sequence[int]) -> LPDO:
    """Embed each purification leg into a larger space (zero padding).

    The result purifies the same operator, which lets two LPDOs with different
    Kraus dimensions share one purification space.
    """
    if len(dims) != len(s):
        raise ValueError("need one target dimension per site")
    ts = []
    for t, d in zip(s.tensors, dims):
        if d < t.shape[2]:
            raise ValueError("pad_kraus cannot shrink a purification leg")
        pad = np.zeros((t.shape[0], t.shape[1], d, t.shape[3]), dtype=np.complex128)
        pad[:, :, : t.shape[2], :] = t
        ts.append(pad)
    return LPDO(tuple(ts))


def common_purification(a: LPDO, b: LPDO) -> tuple[LPDO, LPDO]:
    if a.phys_dims != b.phys_dims:
        raise ValueError(f"physical dimension mismatch: {a.phys_dims} vs {b.phys_dims}")
    dims = [max(x, y) for x, y in zip(a.kraus_dims, b.kraus_dims)]
    return pad_kraus(a, dims), pad_kraus(b, dims)


# ---------------------------------------------------------------- moments


@lru_cache(maxsize=None)
def _cycle_expression(k: int) -> str:
    """einsum string for one transfer step of Tr(rho_1 ... rho_k).

    Operands: env, then (ket, bra) site tensors for each factor.  Factor j has
    ket physical index s_j and bra physical index s_{j+1 mod k}.
    """
    sym = oe.get_symbol
    counter = iter(range(10_000))

    def fresh() -> str:
        return sym(next(counter))

    phys = [fresh() for _ in range(k)]
    env_in, env_out, ops = [], [], []
    for j in range(k):
        kl, kr, bl, br, p = fresh(), fresh(), fresh(), fresh(), fresh()
        env_in += [kl, bl]
        env_out += [kr, br]
        ops.append(kl + phys[j] + p + kr)
        ops.append(bl + phys[(j + 1) % k] + p + br)
    return ",".join(["".join(env_in)] + ops) + "->" + "".join(env_out)


def cycle_trace(states: Sequence[LPDO]) -> complex:
    """Tr(rho_1 rho_2 ... rho_k) by a single ladder sweep over 2k MPS layers."""
    n = len(states[0])
    for st in states[1:]:
        if len(st) != n or st.phys_dims != states[0].phys_dims:
            raise ValueError("LPDO dimension mismatch")
    k = len(states)
    expr = _cycle_expression(k)
    env = np.ones((1,) * (2 * k), dtype=np.complex128)
    for i in range(n):
        ops = []
        for st in states:
            t = st.tensors[i]
            ops += [t, t.conj()]
        env = oe.contract(expr, env, *ops, optimize="greedy")
    return complex(env.reshape(-1)[0])


@dataclass(frozen=True)
class Moments:
    tr_rs: float
    tr_rr: float
    tr_ss: float
    tr_rsrs: float


def moments(r: LPDO, s: LPDO, quartic: bool = True, imag_tol: float = 1e-10) -> Moments:
    """Tr(rho sigma), Tr(rho^2), Tr(sigma^2) and Tr(rho sigma rho sigma).

    The quartic moment costs chi^8 per site; pass ``quartic=False`` to skip it
    (the field is then NaN).
    """
    vals = [cycle_trace([r, s]), cycle_trace([r, r]), cycle_trace([s, s])]
    vals.append(cycle_trace([r, s, r, s]) if quartic else complex(np.nan))
    for v in vals:
        if np.isfinite(v) and abs(v.imag) > imag_tol * max(1.0, abs(v.real)):
            raise ValueError(f"moment has imaginary residue {v.imag:.3e}")
    return Moments(*(float(v.real) for v in vals))


def moment_bounds_from(m: Moments) -> tuple[float, float]:
    """(subfidelity E, superfidelity G) with E <= F^2 <= G."""
    sup = m.tr_rs + np.sqrt(max((1 - m.tr_rr) * (1 - m.tr_ss), 0.0))
    if np.isnan(m.tr_rsrs):
        return float("nan"), float(sup)
    rad = m.tr_rs**2 - m.tr_rsrs
    if rad < -RADICAND_TOL:
        raise ArithmeticError(f"subfidelity radicand {rad:.3e} is negative: contraction error")
    # for pure pairs the radicand cancels exactly and sqrt would amplify the
    # rounding residue; zeroing it only lowers E, so the bound stays valid
    if rad <= CANCEL_ULPS * np.finfo(float).eps * max(abs(m.tr_rs), abs(m.tr_rsrs)):
        rad = 0.0
    sub = m.tr_rs + np.sqrt(2.0) * np.sqrt(max(rad, 0.0))
    return float(sub), float(sup)


def moment_bounds(r: LPDO, s: LPDO, quartic: bool = True) -> tuple[float, float]:
    return moment_bounds_from(moments(r, s, quartic=quartic))


def dense_moment_bounds(rho: np.ndarray, sigma: np.ndarray) -> tuple[float, float]:
    rs = rho @ sigma
    m = Moments(
        float(np.trace(rs).real),
        float(np.trace(rho @ rho).real),
        float(np.trace(sigma @ sigma).real),
        float(np.trace(rs @ rs).real),
    )
    return moment_bounds_from(m)


# ---------------------------------------------------------------- serialization


def save_lpdo(path, s: LPDO) -> None:
    manifest = {"kind": "lpdo", "n_sites": len(s), "phys_dims": s.phys_dims, "kraus_dims": s.kraus_dims,
                "bond_dims": s.bond_dims}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lpdo " + json.dumps(manifest, sort_keys=True) + "\n")
        write_tensors(fh, s.tensors)


def load_lpdo(path) -> LPDO:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline()
        if not head.startswith("lpdo "):
            raise ValueError(f"{path}: not an LPDO file")
        manifest = json.loads(head[5:])
        ts = read_tensors(fh)
    s = LPDO(tuple(ts))
    if len(s) != manifest["n_sites"] or s.phys_dims != manifest["phys_dims"] or s.kraus_dims != manifest["kraus_dims"]:
        raise ValueError(f"{path}: tensors disagree with the manifest")
    return s
