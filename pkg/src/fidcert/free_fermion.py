"""Exact matrix elements of the periodic Ising chain through its free-fermion form.

Jordan-Wigner Majoranas ``g[2i] = c_i + c_i^+`` and ``g[2i+1] = i(c_i^+ - c_i)``
give ``Z_i = -i g[2i] g[2i+1]`` and ``X_i X_{i+1} = -i g[2i+1] g[2i+2]``.
In the spin-flip-even sector the boundary bond is antiperiodic.  States are
Bogoliubov vacua with a few modes filled, and expectation values of
Majorana products follow from Wick's theorem as Pfaffians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import schur


def pfaffian(a: np.ndarray) -> complex:
    """Pfaffian of a skew-symmetric matrix by pivoted Parlett-Reid elimination."""
    a = np.array(a, dtype=np.complex128)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("pfaffian needs a square matrix")
    if n % 2:
        return 0j
    val = 1.0 + 0j
    for k in range(0, n - 1, 2):
        kp = k + 1 + int(np.abs(a[k + 1 :, k]).argmax())
        if kp != k + 1:
            a[[k + 1, kp], k:] = a[[kp, k + 1], k:]
            a[k:, [k + 1, kp]] = a[k:, [kp, k + 1]]
            val = -val
        if a[k + 1, k] == 0:
            return 0j
        val *= a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2 :] / a[k, k + 1]
            col = a[k + 2 :, k + 1].copy()
            a[k + 2 :, k + 2 :] += np.outer(tau, col) - np.outer(col, tau)
    return val


@dataclass(frozen=True)
class IsingFermions:
    """Bogoliubov modes of one parity sector.

    ``modes[k]`` holds the Majorana coefficients of the annihilator
    ``f_k = sum_p modes[k, p] g[p]``; ``energies`` are ascending.
    """

    n: int
    h: float
    parity: int
    energies: np.ndarray
    modes: np.ndarray

    @property
    def ground_energy(self) -> float:
        return float(-0.5 * np.sum(self.energies))

    def vacuum_correlation(self) -> np.ndarray:
        """<0| g_p g_q |0> = 4 sum_k conj(u_kp) u_kq."""
        return 4.0 * self.modes.conj().T @ self.modes


def majorana_hamiltonian(n: int, h: float, parity: int) -> np.ndarray:
    """Real antisymmetric A with H = (i/4) g^T A g in the given parity sector."""
    a = np.zeros((2 * n, 2 * n))

    def put(p: int, q: int, c: float) -> None:
        a[p, q] += 2 * c
        a[q, p] -= 2 * c

    for i in range(n):
        put(2 * i, 2 * i + 1, h)
    for i in range(n - 1):
        put(2 * i + 1, 2 * i + 2, 1.0)
    put(2 * n - 1, 0, -float(parity))
    return a


def ising_fermions(n: int, h: float = 1.0, parity: int = 1) -> IsingFermions:
    a = majorana_hamiltonian(n, h, parity)
    t, q = schur(a, output="real")
    o = q.T.copy()
    eps = np.empty(n)
    for k in range(n):
        b = t[2 * k, 2 * k + 1]
        if b < 0:
            o[[2 * k, 2 * k + 1]] = o[[2 * k + 1, 2 * k]]
            b = -b
        eps[k] = b
    order = np.argsort(eps)
    eps = eps[order]
    modes = np.stack([(o[2 * k] + 1j * o[2 * k + 1]) / 2 for k in order])
    return IsingFermions(n, h, parity, eps, modes)


class GaussianExpectation:
    """Evaluates <0| f_bra ... ops ... f^+_ket |0> for Majorana-linear operators."""

    def __init__(self, ff: IsingFermions) -> None:
        self.ff = ff
        self.u = ff.modes
        self.vac = ff.vacuum_correlation()

    def expect(self, ops: list[np.ndarray]) -> complex:
        """<0| x_1 ... x_k |0> for x = c . g, by Wick's theorem."""
        k = len(ops)
        if k % 2:
            return 0j
        if k == 0:
            return 1.0 + 0j
        c = np.stack(ops)
        m = c @ self.vac @ c.T
        m = np.triu(m, 1)
        return pfaffian(m - m.T)

    def majorana(self, p: int) -> np.ndarray:
        e = np.zeros(2 * self.ff.n, dtype=np.complex128)
        e[p] = 1.0
        return e

    def element(self, bra_modes: tuple[int, ...], ops: list[np.ndarray], ket_modes: tuple[int, ...]) -> complex:
        """<bra| ops |ket> with |ket> = f^+_{k1} f^+_{k2} ... |0> and likewise for bra."""
        left = [self.u[k] for k in reversed(bra_modes)]
        right = [self.u[k].conj() for k in ket_modes]
        return self.expect(left + list(ops) + right)

    def z_ops(self, i: int) -> tuple[complex, list[np.ndarray]]:
        """Z_i = -i g[2i] g[2i+1]."""
        return -1j, [self.majorana(2 * i), self.majorana(2 * i + 1)]

    def xx_string(self, i: int, r: int) -> tuple[complex, list[np.ndarray]]:
        """X_i X_{i+r} = prod_{l=i}^{i+r-1} (-i g[2l+1] g[2l+2]) for i + r < n."""
        if not 0 <= i < i + r < self.ff.n:
            raise ValueError("the string must not cross the boundary")
        ops = []
        for l in range(i, i + r):
            ops += [self.majorana(2 * l + 1), self.majorana(2 * l + 2)]
        return (-1j) ** r, ops


# states are labelled by the tuple of filled modes: () is the vacuum and
# (0, 1) fills the two lowest modes, the m=2 eigenstate of the even sector
GROUND: tuple[int, ...] = ()
EPSILON: tuple[int, ...] = (0, 1)


def z_profiles(n: int, h: float, bra: tuple[int, ...], ket: tuple[int, ...]) -> tuple[complex, np.ndarray, np.ndarray]:
    """(<bra|ket>, <bra|Z_j|ket>, <bra|Z_0 Z_r|ket>) in the even sector.

    Both states are translation invariant, so Z_i Z_j depends on j - i only;
    index r of the last array is the separation (r = 0 gives the overlap).
    """
    g = GaussianExpectation(ising_fermions(n, h, 1))
    ov = g.element(bra, [], ket)
    one = np.empty(n, dtype=np.complex128)
    for j in range(n):
        c, ops = g.z_ops(j)
        one[j] = c * g.element(bra, ops, ket)
    two = np.empty(n, dtype=np.complex128)
    two[0] = ov
    c0, op0 = g.z_ops(0)
    for r in range(1, n):
        c, ops = g.z_ops(r)
        two[r] = c0 * c * g.element(bra, op0 + ops, ket)
    return ov, one, two


def circulant(row: np.ndarray) -> np.ndarray:
    """M[i, j] = row[(j - i) mod n]."""
    n = len(row)
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return row[idx]


def xx_correlator(n: int, h: float, state: tuple[int, ...], r: int) -> float:
    """<state| X_0 X_r |state> in the even sector."""
    g = GaussianExpectation(ising_fermions(n, h, 1))
    c, ops = g.xx_string(0, r)
    return float((c * g.element(state, ops, state)).real)
