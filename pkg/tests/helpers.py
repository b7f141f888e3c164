"""Small dense helpers shared by the tests."""

from __future__ import annotations

import numpy as np

from fidcert import circuit as C
from fidcert import lpdo as lp


def random_complex(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Standard complex Gaussian array of the given shape."""
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    a = random_complex(rng, dim, rank or dim)
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def dense_op(n: int, ops: dict[int, np.ndarray], d: int = 2) -> np.ndarray:
    """Kronecker product placing ``ops[i]`` on site ``i``, identity elsewhere."""
    out = np.ones((1, 1))
    for i in range(n):
        out = np.kron(out, ops.get(i, np.eye(d)))
    return out


def mcu_dense(n: int, u2: np.ndarray) -> np.ndarray:
    """Multi-controlled-U on n qubits by direct block assembly.

    Args:
        n: number of qubits; the last one is the target.
        u2: 2x2 target unitary.

    Returns:
        The ``2^n x 2^n`` unitary.
    """
    m = np.eye(2**n, dtype=complex)
    m[-2:, -2:] = u2
    return m


def data_block(c: C.SequentialCircuit, n: int, d_a: int) -> np.ndarray:
    """Restrict a circuit on the (p, a) chain to ancillas in |0> on input and output.

    Args:
        c: circuit on ``n`` qubit wires interleaved with ``d_a``-level ancillas.
        n: number of data qubits.
        d_a: ancilla dimension.

    Returns:
        The ``2^n x 2^n`` block acting on the data qubits.
    """
    dims = [2, d_a] * n
    idx = []
    for bits in range(2**n):
        multi = []
        for k in range(n):
            multi += [(bits >> (n - 1 - k)) & 1, 0]
        idx.append(np.ravel_multi_index(multi, dims))
    cols = np.zeros((int(np.prod(dims)), len(idx)), dtype=complex)
    cols[idx, np.arange(len(idx))] = 1
    return C.apply_to_vector(c, cols)[idx]


def repetition_code_lpdo(a: np.ndarray, n: int) -> lp.LPDO:
    """LPDO with purification sum_ij a_ij |i...i>_s |j...j>_p (logical factor a)."""
    bulk = np.zeros((4, 2, 2, 4), dtype=complex)
    first = np.zeros((1, 2, 2, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            bulk[2 * i + j, i, j, 2 * i + j] = 1
            first[0, i, j, 2 * i + j] = a[i, j]
    return lp.LPDO([first] + [bulk] * (n - 2) + [bulk.sum(axis=3, keepdims=True)])
