"""Exact references: dense fidelity and trace norm, low-rank fidelity, brute-force Uhlmann."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import hermitian_eig, nuclear_norm, polar_maximizer

EIG_FLOOR = -1e-10
TRACE_TOL = 1e-8
MAX_DENSE_DIM = 2**12
RANK_CUT = 1e-13
MAX_PURIFICATION_DIM = 2**10


def _check_state(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} is not a square matrix")
    if m.shape[0] > MAX_DENSE_DIM:
        raise ValueError(f"{name} dimension {m.shape[0]} exceeds the dense cap {MAX_DENSE_DIM}")
    tr = np.trace(m)
    if abs(tr - 1) > TRACE_TOL:
        raise ValueError(f"{name} has trace {tr.real:.10f}")
    return m


def _sqrt_factor(m: np.ndarray, name: str) -> np.ndarray:
    """Factor A with m = A A^dagger from the Hermitian eigendecomposition.

    Eigenvalues below the PSD floor raise; those within the roundoff band
    ``RANK_CUT * max`` are treated as exact zeros, since their square roots
    would otherwise inject O(1e-8) noise.
    """
    w, v = hermitian_eig(m)
    if w[0] < EIG_FLOOR:
        raise ValueError(f"{name} has eigenvalue {w[0]:.3e} below the PSD floor")
    keep = w > RANK_CUT * max(w[-1], 0.0)
    return v[:, keep] * np.sqrt(w[keep])


def dense_fidelity(rho_m: np.ndarray, sigma_m: np.ndarray) -> float:
    """||sqrt(rho) sqrt(sigma)||_1, evaluated as ||A^dagger B||_1 on square-root factors."""
    rho_m, sigma_m = _check_state(rho_m, "rho"), _check_state(sigma_m, "sigma")
    if rho_m.shape != sigma_m.shape:
        raise ValueError("dimension mismatch")
    a, b = _sqrt_factor(rho_m, "rho"), _sqrt_factor(sigma_m, "sigma")
    return nuclear_norm(a.conj().T @ b)


def dense_trace_norm(rho_m: np.ndarray, sigma_m: np.ndarray) -> float:
    """Sum of absolute eigenvalues of rho - sigma."""
    rho_m, sigma_m = _check_state(rho_m, "rho"), _check_state(sigma_m, "sigma")
    if rho_m.shape != sigma_m.shape:
        raise ValueError("dimension mismatch")
    for m, name in ((rho_m, "rho"), (sigma_m, "sigma")):
        if hermitian_eig(m)[0][0] < EIG_FLOOR:
            raise ValueError(f"{name} is not positive semidefinite")
    w, _ = hermitian_eig(rho_m - sigma_m)
    return float(np.sum(np.abs(w)))


@dataclass(frozen=True)
class LowRankFactor:
    """Factor A with rho = A A^dagger; columns are vectors of dimension d_s."""

    columns: np.ndarray  # shape (d_s, r)

    def __post_init__(self) -> None:
        cols = np.asarray(self.columns, dtype=np.complex128)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.ndim != 2 or cols.shape[1] < 1:
            raise ValueError("factor needs at least one column")
        if not np.all(np.isfinite(cols)):
            raise ValueError("factor has non-finite entries")
        object.__setattr__(self, "columns", cols)

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    @property
    def dim(self) -> int:
        return self.columns.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.columns @ self.columns.conj().T


def low_rank_fidelity(a: LowRankFactor, b: LowRankFactor) -> float:
    """||A^dagger B||_1."""
    if a.dim != b.dim:
        raise ValueError(f"factor dimensions {a.dim} and {b.dim} differ")
    return gram_fidelity(a.columns.conj().T @ b.columns)


def gram_fidelity(cross_gram: np.ndarray) -> float:
    """Fidelity from a precomputed cross-Gram matrix A^dagger B."""
    return nuclear_norm(cross_gram)


def brute_force_uhlmann(psi_rho: np.ndarray, psi_sigma: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact max_U |<psi_rho|(1 x U)|psi_sigma>| for (d_s, d_p) purification matrices.

    Returns the optimum and the maximizing unitary on the purifying space.
    """
    a = np.asarray(psi_rho, dtype=np.complex128)
    b = np.asarray(psi_sigma, dtype=np.complex128)
    if a.ndim != 2 or a.shape != b.shape:
        raise ValueError("purifications must be matrices of equal shape (d_s, d_p)")
    if a.shape[1] > MAX_PURIFICATION_DIM:
        raise ValueError(f"purification dimension {a.shape[1]} exceeds cap {MAX_PURIFICATION_DIM}")
    # <a|(1 x U)|b> = Tr(U M) with M = b^T conj(a) (partial trace over the system)
    m = b.T @ a.conj()
    u = polar_maximizer(m)
    return nuclear_norm(m), u


def uhlmann_overlap(psi_rho: np.ndarray, psi_sigma: np.ndarray, u: np.ndarray) -> complex:
    return complex(np.vdot(psi_rho, psi_sigma @ u.T))


# ---------------------------------------------------------------- dephased pure states


def _dephasing_root(q: float) -> np.ndarray:
    """sqrt of k = [[1, 1-q], [1-q, 1]], the single-site Z-dephasing kernel."""
    a, b = np.sqrt(2 - q), np.sqrt(q)
    return 0.5 * np.array([[a + b, a - b], [a - b, a + b]])


def _to_axis(v: np.ndarray, n: int, axis: str) -> np.ndarray:
    if axis.upper() == "Z":
        return v
    if axis.upper() != "X":
        raise ValueError(f"axis must be Z or X, got {axis!r}")
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    t = v.reshape([2] * n)
    for i in range(n):
        t = np.moveaxis(np.tensordot(h, t, axes=(1, i)), 0, i)
    return t.reshape(-1)


def dephased_pure_fidelity(psi: np.ndarray, phi: np.ndarray, q: float, axis: str = "Z") -> float:
    """F(N(|psi><psi|), N(|phi><phi|)) for uniform single-site dephasing.

    In the dephasing basis N(|psi><psi|) = D_psi K D_psi^* with
    K = k^{x n}, so with S = sqrt(K) the fidelity is the nuclear norm of
    S D_{conj(psi) phi} S, a matrix of the Hilbert-space dimension.
    """
    psi, phi = np.asarray(psi, dtype=np.complex128), np.asarray(phi, dtype=np.complex128)
    n = int(round(np.log2(psi.size)))
    if psi.shape != phi.shape or 2**n != psi.size:
        raise ValueError("states must be vectors of equal dimension 2^n")
    if psi.size > MAX_DENSE_DIM:
        raise ValueError(f"dimension {psi.size} exceeds the dense cap {MAX_DENSE_DIM}")
    v = _to_axis(psi, n, axis).conj() * _to_axis(phi, n, axis)
    s = _dephasing_root(q)
    m = np.diag(v).reshape([2] * (2 * n))
    for i in range(n):
        m = np.moveaxis(np.tensordot(s, m, axes=(1, i)), 0, i)
        m = np.moveaxis(np.tensordot(m, s, axes=(n + i, 0)), -1, n + i)
    m = m.reshape(2**n, 2**n)
    if np.max(np.abs(v.imag)) < 1e-14 * max(np.max(np.abs(v)), 1e-300):
        return float(np.sum(np.abs(np.linalg.eigvalsh(m.real))))
    return nuclear_norm(m)


def _translate(x: np.ndarray, n: int, u: int) -> np.ndarray:
    mask = (1 << n) - 1
    return ((x << u) | (x >> (n - u))) & mask if u else x


def dephased_pure_fidelity_translation(psi: np.ndarray, phi: np.ndarray, q: float, axis: str = "Z") -> float:
    """Same as :func:`dephased_pure_fidelity` for real zero-momentum states, block by block.

    ``conj(psi) phi`` must be invariant under cyclic translation; the
    problem then splits into momentum sectors of dimension ~2^n / n.
    """
    psi, phi = np.asarray(psi), np.asarray(phi)
    n = int(round(np.log2(psi.size)))
    if 2**n != psi.size or psi.shape != phi.shape:
        raise ValueError("states must be vectors of equal dimension 2^n")
    v = _to_axis(psi, n, axis).conj() * _to_axis(phi, n, axis)
    if np.max(np.abs(v.imag)) > 1e-12:
        raise ValueError("the blocked oracle needs real amplitude products")
    v = v.real
    x = np.arange(2**n, dtype=np.int64)
    orbit = np.stack([_translate(x, n, u) for u in range(n)])
    rep = orbit.min(axis=0)
    if np.max(np.abs(v - v[rep])) > 1e-10 * np.max(np.abs(v)):
        raise ValueError("amplitude product is not translation invariant")
    reps = np.unique(rep)
    period = np.array([next(u for u in range(1, n + 1) if _translate(np.array([r]), n, u % n)[0] == r) for r in reps])
    # distance[u, a, b] = popcount(T^u r_a xor r_b)
    tr = np.stack([_translate(reps, n, u) for u in range(n)])
    xor = tr[:, :, None] ^ reps[None, None, :]
    dist = np.zeros(xor.shape, dtype=np.int64)
    for b in range(n):
        dist += (xor >> b) & 1
    kern = (1.0 - q) ** dist
    total = 0.0
    for m in range(n):
        allowed = (m * period) % n == 0
        if not np.any(allowed):
            continue
        phase = np.exp(2j * np.pi * m * np.arange(n) / n)
        block = np.tensordot(phase, kern, axes=(0, 0))[np.ix_(allowed, allowed)]
        pr = period[allowed]
        block *= np.sqrt(pr[:, None] * pr[None, :]) / n
        block = (block + block.conj().T) / 2
        w, vec = np.linalg.eigh(block)
        root = (vec * np.sqrt(np.clip(w, 0.0, None))) @ vec.conj().T
        mat = root @ (v[reps[allowed]][:, None] * root)
        total += float(np.sum(np.abs(np.linalg.eigvalsh((mat + mat.conj().T) / 2))))
    return total
