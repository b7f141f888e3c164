"""Dense complex tensor algebra.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` (real
arrays are accepted and promoted where needed).  Everything here is a pure
function of its inputs.

The module also implements the text tensor container used for golden files,
LPDO files and circuit checkpoints::

    tensor 2 3
    1.0 0.0
    0.5 -0.25
    ...

The header holds the word ``tensor`` followed by the extents; each following
line is one entry in row-major order as ``real imag`` written with ``repr`` so
that a reload is bit-exact.  A file may hold several tensors back to back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

HERMITIAN_TOL = 1e-10
RESIDUAL_TOL = 1e-10

Tensor = NDArray[np.complex128]


@dataclass(frozen=True)
class MatrixDecomposition:
    """Result of :func:`svd_split`.

    ``u`` carries the row indices plus a trailing bond index, ``v`` a leading
    bond index plus the column indices.
    """

    u: Tensor
    s: NDArray[np.float64]
    v: Tensor
    truncation_error: float


def as_tensor(data, shape: Sequence[int] | None = None) -> Tensor:
    t = np.asarray(data, dtype=np.complex128)
    if shape is not None:
        shape = tuple(int(x) for x in shape)
        if int(np.prod(shape)) != t.size:
            raise ValueError(f"shape {shape} incompatible with {t.size} entries")
        t = t.reshape(shape)
    return t


def contract(a: np.ndarray, b: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Contract ``a`` and ``b`` over the listed index pairs.

    The result carries the free indices of ``a`` followed by those of ``b``,
    each in their original order.

    Raises:
        ValueError: if an index is out of range, repeated, or the paired
            extents differ.
    """
    ia = [p[0] for p in pairs]
    ib = [p[1] for p in pairs]
    for idx, t, name in ((ia, a, "a"), (ib, b, "b")):
        if len(set(idx)) != len(idx):
            raise ValueError(f"repeated index in {name}")
        for i in idx:
            if not 0 <= i < t.ndim:
                raise ValueError(f"index {i} out of range for {name} with {t.ndim} indices")
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise ValueError(f"extent mismatch: a[{i}]={a.shape[i]} vs b[{j}]={b.shape[j]}")
    return np.tensordot(a, b, axes=(ia, ib))


def svd_split(
    t: np.ndarray,
    row_indices: Sequence[int],
    max_rank: int | None = None,
    tol: float = 0.0,
) -> MatrixDecomposition:
    """Matricize ``t`` with ``row_indices`` as rows and take a truncated SVD.

    Singular values below ``tol * s[0]`` are discarded, then at most
    ``max_rank`` are kept.  ``truncation_error`` is the l2 norm of the
    discarded singular values (the Frobenius reconstruction error).
    """
    rows = [int(i) for i in row_indices]
    cols = [i for i in range(t.ndim) if i not in rows]
    if not rows or not cols or len(set(rows)) != len(rows) or any(not 0 <= i < t.ndim for i in rows):
        raise ValueError("row_indices must split the tensor indices into two nonempty groups")
    row_shape = [t.shape[i] for i in rows]
    col_shape = [t.shape[i] for i in cols]
    m = np.transpose(t, rows + cols).reshape(int(np.prod(row_shape)), int(np.prod(col_shape)))
    u, s, vh = _svd(m)
    keep = len(s)
    if tol > 0 and s[0] > 0:
        keep = max(int(np.count_nonzero(s > tol * s[0])), 1)
    if max_rank is not None:
        keep = min(keep, int(max_rank))
    err = float(np.linalg.norm(s[keep:]))
    return MatrixDecomposition(
        u=u[:, :keep].reshape(*row_shape, keep),
        s=s[:keep],
        v=vh[:keep].reshape(keep, *col_shape),
        truncation_error=err,
    )


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        import scipy.linalg

        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def polar_maximizer(e: np.ndarray) -> Tensor:
    """Unitary ``G`` maximizing ``Re Tr(G @ e)``.

    With ``e = W diag(s) V`` (``V`` as returned by ``numpy.linalg.svd``, i.e.
    already the adjoint of the right singular vectors) the maximizer is
    ``G = V^dagger W^dagger`` and the maximum equals ``sum(s)``, the nuclear
    norm of ``e``.
    """
    e = np.asarray(e)
    if e.ndim != 2 or e.shape[0] != e.shape[1]:
        raise ValueError(f"polar_maximizer needs a square matrix, got shape {e.shape}")
    if not np.all(np.isfinite(e)):
        raise ValueError("non-finite environment")
    w, _, v = _svd(e)
    return (w @ v).conj().T


def nuclear_norm(e: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(e, compute_uv=False)))


def hermitian_eig(m: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def is_unitary(g: np.ndarray, tol: float = 1e-10) -> bool:
    g = np.asarray(g)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        return False
    return bool(np.max(np.abs(g.conj().T @ g - np.eye(g.shape[0]))) <= tol)


def reunitarize(g: np.ndarray) -> Tensor:
    """Closest unitary to ``g`` in Frobenius norm (its polar factor)."""
    w, _, v = _svd(np.asarray(g, dtype=np.complex128))
    return w @ v


# ---------------------------------------------------------------- container


def _format_float(x: float) -> str:
    return repr(float(x))


def write_tensors(stream: IO[str], tensors: Iterable[np.ndarray]) -> None:
    for t in tensors:
        t = np.asarray(t, dtype=np.complex128)
        stream.write("tensor " + " ".join(str(d) for d in t.shape) + "\n")
        for z in t.reshape(-1):
            stream.write(f"{_format_float(z.real)} {_format_float(z.imag)}\n")


def read_tensors(lines: Iterable[str]) -> list[Tensor]:
    """Parse every tensor block from ``lines``; other lines must be blank."""
    out: list[Tensor] = []
    it = iter(lines)
    for raw in it:
        line = raw.strip()
        if not line:
            continue
        head = line.split()
        if head[0] != "tensor":
            raise ValueError(f"expected tensor header, got {line!r}")
        shape = tuple(int(x) for x in head[1:])
        size = int(np.prod(shape)) if shape else 1
        data = np.empty(size, dtype=np.complex128)
        for k in range(size):
            try:
                re_s, im_s = next(it).split()
            except (StopIteration, ValueError) as exc:
                raise ValueError(f"truncated tensor block for shape {shape}") from exc
            data[k] = complex(float(re_s), float(im_s))
        out.append(data.reshape(shape))
    return out


def save_tensor(path, t: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_tensors(fh, [t])


def load_tensor(path) -> Tensor:
    with open(path, encoding="utf-8") as fh:
        ts = read_tensors(fh)
    if len(ts) != 1:
        raise ValueError(f"{path}: expected exactly one tensor, found {len(ts)}")
    return ts[0]
