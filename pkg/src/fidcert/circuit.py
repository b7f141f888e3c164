"""Sequential circuit ansatz on purification (+ ancilla) wires.

Wires are ordered ``p_1, a_1, p_2, a_2, ..., p_N, a_N`` (or ``p_1, ..., p_N``
without ancillas).  A gate acts on two adjacent wires and is stored as a
``(d_a d_b) x (d_a d_b)`` matrix with the first wire as the major index.

The composite layouts instead merge each site's ancilla into its purification
wire, so a chain of N wires of dimension ``d_p d_a`` carries gates acting on
two neighboring sites' ``(p_k, a_k)`` pairs at once.  The LPDO is embedded by
zero-padding its Kraus legs, which is the same as appending ``|0>`` ancillas.

One depth unit of a sequential layout is a forward pass over all adjacent
pairs followed by a backward pass; one depth unit of the FDLU layout is an
even brick layer followed by an odd one.  The depth-t schedule is always a
prefix of the depth-(t+1) schedule.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

from .lpdo import LPDO, pad_kraus
from .tensor import is_unitary, read_tensors, reunitarize, write_tensors

MAX_DENSE_DIM = 2**14
_SVD_CUTOFF = 1e-14


class Layout(str, enum.Enum):
    SEQUENTIAL_ANCILLA = "sequential_ancilla"
    SEQUENTIAL_NO_ANCILLA = "sequential_no_ancilla"
    FDLU_ANCILLA = "fdlu_ancilla"
    SEQUENTIAL_COMPOSITE = "sequential_composite"
    FDLU_COMPOSITE = "fdlu_composite"

    @property
    def has_ancilla(self) -> bool:
        """Separate ancilla wires in the chain."""
        return self in (Layout.SEQUENTIAL_ANCILLA, Layout.FDLU_ANCILLA)

    @property
    def is_composite(self) -> bool:
        return self in (Layout.SEQUENTIAL_COMPOSITE, Layout.FDLU_COMPOSITE)

    @property
    def is_fdlu(self) -> bool:
        return self in (Layout.FDLU_ANCILLA, Layout.FDLU_COMPOSITE)


@dataclass(frozen=True)
class Wire:
    site: int
    kind: str  # "purification" or "ancilla"
    dim: int


@dataclass(frozen=True)
class WireChain:
    wires: tuple[Wire, ...]

    @classmethod
    def build(cls, wire_dims: Sequence[int], d_a: int | None) -> "WireChain":
        """Chain over per-site wire dims, with one ancilla per site when ``d_a`` is given."""
        wires = []
        for k, d in enumerate(wire_dims):
            wires.append(Wire(k, "purification", int(d)))
            if d_a is not None:
                wires.append(Wire(k, "ancilla", int(d_a)))
        return cls(tuple(wires))

    def __len__(self) -> int:
        return len(self.wires)

    @property
    def dims(self) -> list[int]:
        return [w.dim for w in self.wires]

    @property
    def has_ancilla(self) -> bool:
        return any(w.kind == "ancilla" for w in self.wires)

    @property
    def n_sites(self) -> int:
        return len({w.site for w in self.wires})

    def site_wire(self, site: int) -> int:
        for i, w in enumerate(self.wires):
            if w.site == site and w.kind == "purification":
                return i
        raise KeyError(site)

    def ancilla_wire(self, site: int) -> int | None:
        for i, w in enumerate(self.wires):
            if w.site == site and w.kind == "ancilla":
                return i
        return None


@dataclass(frozen=True)
class Gate:
    wires: tuple[int, ...]
    matrix: np.ndarray
    position: tuple[int, str, int]  # (depth unit, pass name, step within pass)


@dataclass
class SequentialCircuit:
    chain: WireChain
    depth_t: int
    layout: Layout
    gates: list[Gate] = field(default_factory=list)
    seed: int | None = None

    @property
    def layers(self) -> list[list[Gate]]:
        out: list[list[Gate]] = []
        key = None
        for g in self.gates:
            if g.position[:2] != key:
                out.append([])
                key = g.position[:2]
            out[-1].append(g)
        return out

    def set_gate(self, index: int, matrix: np.ndarray) -> None:
        g = self.gates[index]
        self.gates[index] = replace(g, matrix=np.asarray(matrix, dtype=np.complex128))

    def copy(self) -> "SequentialCircuit":
        return SequentialCircuit(self.chain, self.depth_t, self.layout, list(self.gates), self.seed)

    def max_unitarity_defect(self) -> float:
        return max((float(np.max(np.abs(g.matrix.conj().T @ g.matrix - np.eye(g.matrix.shape[0]))))
                    for g in self.gates), default=0.0)


# ---------------------------------------------------------------- schedules


def schedule(n_wires: int, depth_t: int, layout: Layout | str) -> list[tuple[tuple[int, ...], tuple[int, str, int]]]:
    """Gate positions of a layout; a pure function of its arguments."""
    layout = Layout(layout)
    if depth_t < 1 or n_wires < 1:
        raise ValueError("depth and wire count must be positive")
    out = []
    for unit in range(depth_t):
        if layout.is_fdlu:
            if n_wires < 2:
                raise ValueError("FDLU layers need at least two wires")
            even = [(w, w + 1) for w in range(0, n_wires - 1, 2)]
            odd = [(w, w + 1) for w in range(1, n_wires - 1, 2)]
            out += [(p, (unit, "even", s)) for s, p in enumerate(even)]
            out += [(p, (unit, "odd", s)) for s, p in enumerate(odd)]
        else:
            if n_wires == 1:
                pairs: list[tuple[int, ...]] = [(0,)]
            else:
                pairs = [(w, w + 1) for w in range(n_wires - 1)]
            out += [(p, (unit, "forward", s)) for s, p in enumerate(pairs)]
            out += [(p, (unit, "backward", s)) for s, p in enumerate(reversed(pairs))]
    return out


def _random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(dim, random_state=rng)


def build_circuit(
    n_sites: int,
    depth_t: int,
    layout: Layout | str,
    d_p: int | Sequence[int] = 2,
    d_a: int = 2,
    init: str = "identity",
    eps: float = 0.01,
    seed: int | None = None,
) -> SequentialCircuit:
    """Depth-t circuit of the given layout on ``n_sites`` purification wires.

    ``init`` is ``"identity"``, ``"noise"`` (identity plus ``eps``-scaled
    complex Gaussian noise, reunitarized) or ``"haar"``.
    """
    layout = Layout(layout)
    if n_sites < 1 or depth_t < 1:
        raise ValueError("n_sites and depth_t must be positive")
    if (layout.has_ancilla or layout.is_composite) and d_a < 2:
        raise ValueError(f"layout {layout.value} needs an ancilla dimension >= 2")
    if layout is Layout.SEQUENTIAL_NO_ANCILLA and d_a != 1:
        raise ValueError("sequential_no_ancilla requires d_a = 1")
    dims = [int(d_p)] * n_sites if np.isscalar(d_p) else [int(x) for x in d_p]
    if len(dims) != n_sites or min(dims) < 1:
        raise ValueError("invalid purification dimensions")
    if layout.is_composite:
        dims = [d * d_a for d in dims]
    chain = WireChain.build(dims, d_a if layout.has_ancilla else None)
    rng = np.random.default_rng(seed)
    gates = []
    for wires, pos in schedule(len(chain), depth_t, layout):
        dim = int(np.prod([chain.wires[w].dim for w in wires]))
        if init == "identity":
            m = np.eye(dim, dtype=np.complex128)
        elif init == "noise":
            noise = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
            m = reunitarize(np.eye(dim) + eps * noise)
        elif init == "haar":
            m = _random_unitary(dim, rng)
        else:
            raise ValueError(f"unknown init {init!r}")
        gates.append(Gate(wires, m, pos))
    return SequentialCircuit(chain, depth_t, layout, gates, seed)


def extend_depth(c: SequentialCircuit, depth_t: int) -> SequentialCircuit:
    """Pad a circuit with identity depth units (nested initialization)."""
    if depth_t < c.depth_t:
        raise ValueError("cannot shrink a circuit")
    gates = []
    for i, (wires, pos) in enumerate(schedule(len(c.chain), depth_t, c.layout)):
        if i < len(c.gates):
            if c.gates[i].wires != wires or c.gates[i].position != pos:
                raise AssertionError("schedules are not nested")
            gates.append(c.gates[i])
        else:
            dim = int(np.prod([c.chain.wires[w].dim for w in wires]))
            gates.append(Gate(wires, np.eye(dim, dtype=np.complex128), pos))
    return SequentialCircuit(c.chain, depth_t, c.layout, gates, c.seed)


def embed_purification(s: LPDO, c: SequentialCircuit) -> LPDO:
    """Zero-pad Kraus legs to the merged wire dims of a composite layout."""
    pur_dims = [w.dim for w in c.chain.wires if w.kind == "purification"]
    if c.layout.is_composite and pur_dims != s.kraus_dims:
        if len(pur_dims) != len(s) or any(p < k for p, k in zip(pur_dims, s.kraus_dims)):
            raise ValueError(f"circuit purification dims {pur_dims} cannot hold LPDO kraus dims {s.kraus_dims}")
        s = pad_kraus(s, pur_dims)
    return s


def concatenate(c1: SequentialCircuit, c2: SequentialCircuit) -> SequentialCircuit:
    """Circuit applying ``c1`` then ``c2`` (same chain)."""
    if c1.chain != c2.chain:
        raise ValueError("circuits live on different wire chains")
    gates = list(c1.gates) + [replace(g, position=(g.position[0] + c1.depth_t, *g.position[1:])) for g in c2.gates]
    return SequentialCircuit(c1.chain, c1.depth_t + c2.depth_t, c1.layout, gates, c1.seed)


# ---------------------------------------------------------------- dense action


def apply_to_vector(c: SequentialCircuit, psi: np.ndarray) -> np.ndarray:
    """Apply the circuit to vectors on the full wire space.

    ``psi`` has shape ``(D,)`` or ``(D, k)`` with wire 0 the most significant
    index.
    """
    dims = c.chain.dims
    total = int(np.prod(dims))
    psi = np.asarray(psi, dtype=np.complex128)
    cols = psi.shape[1:] if psi.ndim > 1 else ()
    if psi.shape[0] != total:
        raise ValueError(f"vector dimension {psi.shape[0]} != wire space dimension {total}")
    t = psi.reshape(*dims, *cols)
    for g in c.gates:
        gd = [dims[w] for w in g.wires]
        m = g.matrix.reshape(*gd, *gd)
        k = len(g.wires)
        t = np.tensordot(m, t, axes=(list(range(k, 2 * k)), list(g.wires)))
        t = np.moveaxis(t, list(range(k)), list(g.wires))
    return t.reshape(psi.shape)


def to_dense_unitary(c: SequentialCircuit, max_dim: int = MAX_DENSE_DIM) -> np.ndarray:
    """Ordered product of the embedded gate matrices."""
    total = int(np.prod(c.chain.dims))
    if total > max_dim:
        raise ValueError(f"wire space dimension {total} exceeds cap {max_dim}")
    return apply_to_vector(c, np.eye(total, dtype=np.complex128))


def check_unitary(c: SequentialCircuit, tol: float = 1e-10) -> None:
    for i, g in enumerate(c.gates):
        if not is_unitary(g.matrix, tol):
            raise ValueError(f"gate {i} is not unitary")


# ---------------------------------------------------------------- on LPDOs


def _fine_chain(s: LPDO, chain: WireChain) -> list[np.ndarray]:
    """Per-wire tensors (left, passive, wire, right) with ancillas in |0>."""
    fine: list[np.ndarray] = []
    for k, t in enumerate(s.tensors):
        fine.append(t)
        a = chain.ancilla_wire(k)
        if a is not None:
            chi = t.shape[3]
            d_a = chain.wires[a].dim
            anc = np.zeros((chi, 1, d_a, chi), dtype=np.complex128)
            anc[np.arange(chi), 0, 0, np.arange(chi)] = 1.0
            fine.append(anc)
    return fine


def _apply_gate_fine(fine: list[np.ndarray], g: Gate) -> None:
    if len(g.wires) == 1:
        w = g.wires[0]
        fine[w] = np.einsum("ab,lsbr->lsar", g.matrix, fine[w])
        return
    w1, w2 = g.wires
    a, b = fine[w1], fine[w2]
    theta = np.tensordot(a, b, axes=(3, 0))  # l s1 x1 s2 x2 r
    d1, d2 = a.shape[2], b.shape[2]
    m = g.matrix.reshape(d1, d2, d1, d2)
    theta = np.einsum("abcd,lsctdr->lsatbr", m, theta, optimize=True)
    l, s1, _, s2, _, r = theta.shape
    u, sv, vh = np.linalg.svd(theta.reshape(l * s1 * d1, s2 * d2 * r), full_matrices=False)
    keep = max(int(np.count_nonzero(sv > _SVD_CUTOFF * sv[0])), 1) if sv[0] > 0 else 1
    fine[w1] = u[:, :keep].reshape(l, s1, d1, keep)
    fine[w2] = (sv[:keep, None] * vh[:keep]).reshape(keep, s2, d2, r)


def apply_to_purification(s: LPDO, c: SequentialCircuit) -> LPDO:
    """(1 x U)|psi>> with ancillas appended in |0>; represents the same rho.

    Each site's purification leg becomes the merged ``(p_k, a_k)`` leg.
    """
    s = embed_purification(s, c)
    pur_dims = [w.dim for w in c.chain.wires if w.kind == "purification"]
    if pur_dims != s.kraus_dims:
        raise ValueError(f"circuit purification dims {pur_dims} != LPDO kraus dims {s.kraus_dims}")
    fine = _fine_chain(s, c.chain)
    for g in c.gates:
        _apply_gate_fine(fine, g)
    out = []
    w = 0
    for k in range(len(s)):
        t = fine[w]
        w += 1
        if c.chain.ancilla_wire(k) is not None:
            anc = fine[w]
            w += 1
            t = np.einsum("lspm,mxar->lspar", t, anc).reshape(t.shape[0], t.shape[1], -1, anc.shape[3])
        out.append(t)
    return LPDO(tuple(out))


# ---------------------------------------------------------------- reference constructions


def _controlled_shift(d_a: int) -> np.ndarray:
    """(p, a) -> (p, a + p mod d_a) on a qubit p and a d_a-level ancilla."""
    m = np.zeros((2 * d_a, 2 * d_a))
    for p in range(2):
        for a in range(d_a):
            m[p * d_a + (a + p) % d_a, p * d_a + a] = 1.0
    return m


def _and_fold() -> np.ndarray:
    """Permutation on (carry a in 3 levels, data p) leaving the AND in p.

    (0,0)->(0,0), (0,1)->(1,0), (1,0)->(2,0), (1,1)->(0,1); the two unused
    inputs (2,x) fill the remaining outputs.
    """
    perm = {(0, 0): (0, 0), (0, 1): (1, 0), (1, 0): (2, 0), (1, 1): (0, 1), (2, 0): (1, 1), (2, 1): (2, 1)}
    m = np.zeros((6, 6))
    for (a, p), (a2, p2) in perm.items():
        m[a2 * 2 + p2, a * 2 + p] = 1.0
    return m


def _controlled_on_level(u2: np.ndarray, d_a: int, level: int = 1) -> np.ndarray:
    """Apply u2 on the data qubit when the ancilla (first wire) is at ``level``."""
    m = np.eye(2 * d_a, dtype=np.complex128)
    m[level * 2 : level * 2 + 2, level * 2 : level * 2 + 2] = u2
    return m


def mcu_circuit(n: int, u2: np.ndarray) -> SequentialCircuit:
    """t=1 sequential circuit with qutrit ancillas realizing multi-controlled-U.

    The forward pass folds the running AND of the controls into the ancillas,
    applies ``u2`` to the last data qubit when the carry is set, and the
    backward pass uncomputes the carries so every ancilla returns to |0>.
    """
    if n < 2:
        raise ValueError("mcu_circuit needs n >= 2")
    u2 = np.asarray(u2, dtype=np.complex128)
    if not is_unitary(u2):
        raise ValueError("u2 must be a 2x2 unitary")
    d_a = 3
    c = build_circuit(n, 1, Layout.SEQUENTIAL_ANCILLA, d_p=2, d_a=d_a)
    shift, fold = _controlled_shift(d_a), _and_fold()
    cu = _controlled_on_level(u2, d_a)
    forward: dict[tuple[int, int], np.ndarray] = {}
    backward: dict[tuple[int, int], np.ndarray] = {}
    for k in range(n - 1):
        p, a = 2 * k, 2 * k + 1
        forward[(p, a)] = shift
        backward[(p, a)] = shift.T
        if k > 0:
            forward[(a - 2, p)] = fold
            backward[(a - 2, p)] = fold.T
    forward[(2 * n - 3, 2 * n - 2)] = cu
    for i, g in enumerate(c.gates):
        table = forward if g.position[1] == "forward" else backward
        if g.wires in table:
            c.set_gate(i, table[g.wires])
    return c


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_I2 = np.eye(2, dtype=np.complex128)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)


def logical_rotation_circuit(n: int, alpha: float, beta: float, gamma: float) -> SequentialCircuit:
    """t=1 sequential circuit (no ancilla) acting as Rz(alpha) Rx(beta) Rz(gamma) on span{|0..0>, |1..1>}.

    Logical Rz is exp(-i theta Z_1 / 2) and logical Rx is
    exp(-i beta X_1...X_N / 2), built from Hadamards and a CNOT parity ladder.
    """
    if n < 2:
        raise ValueError("logical_rotation_circuit needs n >= 2")
    c = build_circuit(n, 1, Layout.SEQUENTIAL_NO_ANCILLA, d_p=2, d_a=1)
    for i, g in enumerate(c.gates):
        k, _ = g.wires
        if g.position[1] == "forward":
            pre = np.kron(_H @ _rz(gamma), _H) if k == 0 else np.kron(_I2, _H)
            m = _CNOT @ pre
            if k == n - 2:
                m = np.kron(_I2, _rz(beta)) @ m
        else:
            post = np.kron(_rz(alpha) @ _H, _H) if k == 0 else np.kron(_I2, _H)
            m = post @ _CNOT
        c.set_gate(i, m)
    return c


def logical_block(u: np.ndarray, n: int) -> np.ndarray:
    """2x2 block of ``u`` on span{|0..0>, |1..1>}."""
    idx = [0, 2**n - 1]
    return u[np.ix_(idx, idx)]


def euler_rotation(alpha: float, beta: float, gamma: float) -> np.ndarray:
    rx = np.array([[np.cos(beta / 2), -1j * np.sin(beta / 2)], [-1j * np.sin(beta / 2), np.cos(beta / 2)]])
    return _rz(alpha) @ rx @ _rz(gamma)


# ---------------------------------------------------------------- checkpoints


def save_circuit(path, c: SequentialCircuit) -> None:
    manifest = {
        "kind": "sequential_circuit",
        "layout": c.layout.value,
        "depth_t": c.depth_t,
        "wires": [[w.site, w.kind, w.dim] for w in c.chain.wires],
        "gates": [[list(g.wires), list(g.position)] for g in c.gates],
        "seed": c.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("circuit " + json.dumps(manifest, sort_keys=True) + "\n")
        write_tensors(fh, [g.matrix for g in c.gates])


def load_circuit(path) -> SequentialCircuit:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline()
        if not head.startswith("circuit "):
            raise ValueError(f"{path}: not a circuit checkpoint")
        manifest = json.loads(head[8:])
        mats = read_tensors(fh)
    chain = WireChain(tuple(Wire(int(s), str(k), int(d)) for s, k, d in manifest["wires"]))
    if len(mats) != len(manifest["gates"]):
        raise ValueError(f"{path}: gate count disagrees with the manifest")
    gates = [Gate(tuple(w), m, (int(p[0]), str(p[1]), int(p[2]))) for (w, p), m in zip(manifest["gates"], mats)]
    return SequentialCircuit(chain, int(manifest["depth_t"]), Layout(manifest["layout"]), gates, manifest["seed"])
