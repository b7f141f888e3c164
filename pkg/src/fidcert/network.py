"""Column-ordered tensor networks with cached left/right environments.

A network is a list of nodes, each an array with integer leg labels and a
column index.  Every leg joins exactly two nodes.  Left environments
contract all columns up to a cut; right environments contract everything
after it.  The environment of a single node is the contraction of the rest
of the network with that node's legs left open.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import opt_einsum as oe

from .circuit import Gate, WireChain


@dataclass
class Node:
    array: np.ndarray
    legs: tuple[int, ...]
    column: int


class ColumnNetwork:
    """Closed network evaluated column by column."""

    def __init__(self, nodes: Sequence[Node], n_columns: int) -> None:
        self.nodes = list(nodes)
        self.n_columns = n_columns
        self.by_column: list[list[int]] = [[] for _ in range(n_columns)]
        for i, nd in enumerate(self.nodes):
            if len(set(nd.legs)) != len(nd.legs) or nd.array.ndim != len(nd.legs):
                raise ValueError(f"node {i} has inconsistent legs")
            self.by_column[nd.column].append(i)
        owners: dict[int, list[int]] = {}
        for i, nd in enumerate(self.nodes):
            for leg in nd.legs:
                owners.setdefault(leg, []).append(i)
        for leg, who in owners.items():
            if len(who) != 2:
                raise ValueError(f"leg {leg} joins {len(who)} nodes")
            a, b = (self.nodes[j] for j in who)
            if a.array.shape[a.legs.index(leg)] != b.array.shape[b.legs.index(leg)]:
                raise ValueError(f"leg {leg} has mismatched extents")
        # open legs at cut c (between column c and c+1)
        self.cut_legs: list[tuple[int, ...]] = []
        for c in range(n_columns):
            legs = [leg for leg, (i, j) in owners.items()
                    if min(self.nodes[i].column, self.nodes[j].column) <= c < max(self.nodes[i].column, self.nodes[j].column)]
            self.cut_legs.append(tuple(sorted(legs)))
        self._left: list[np.ndarray | None] = [None] * n_columns
        self._right: list[np.ndarray | None] = [None] * n_columns
        self._exprs: dict = {}

    # ------------------------------------------------------------ plumbing

    def _contract(self, operands: list[tuple[np.ndarray, tuple[int, ...]]], out: tuple[int, ...]) -> np.ndarray:
        key = (tuple((a.shape, legs) for a, legs in operands), out)
        expr = self._exprs.get(key)
        if expr is None:
            sym = {}
            for _, legs in operands:
                for leg in legs:
                    sym.setdefault(leg, oe.get_symbol(len(sym)))
            eq = ",".join("".join(sym[leg] for leg in legs) for _, legs in operands)
            eq += "->" + "".join(sym[leg] for leg in out)
            expr = oe.contract_expression(eq, *[a.shape for a, _ in operands])
            self._exprs[key] = expr
        return expr(*[a for a, _ in operands])

    def set_array(self, index: int, array: np.ndarray) -> None:
        nd = self.nodes[index]
        if array.shape != nd.array.shape:
            raise ValueError("replacement changes the node shape")
        nd.array = array
        c = nd.column
        for k in range(c, self.n_columns):
            self._left[k] = None
        for k in range(0, c + 1):
            self._right[k] = None

    def left(self, c: int) -> tuple[np.ndarray, tuple[int, ...]] | None:
        """Contraction of columns 0..c with legs ``cut_legs[c]``."""
        if c < 0:
            return None
        if self._left[c] is None:
            ops = [(self.nodes[i].array, self.nodes[i].legs) for i in self.by_column[c]]
            prev = self.left(c - 1)
            if prev is not None:
                ops.insert(0, prev)
            self._left[c] = self._contract(ops, self.cut_legs[c])
        return self._left[c], self.cut_legs[c]

    def right(self, c: int) -> tuple[np.ndarray, tuple[int, ...]] | None:
        """Contraction of columns c..end with legs ``cut_legs[c-1]``."""
        if c >= self.n_columns:
            return None
        if self._right[c] is None:
            ops = [(self.nodes[i].array, self.nodes[i].legs) for i in self.by_column[c]]
            nxt = self.right(c + 1)
            if nxt is not None:
                ops.append(nxt)
            out = self.cut_legs[c - 1] if c > 0 else ()
            self._right[c] = self._contract(ops, out)
        return self._right[c], (self.cut_legs[c - 1] if c > 0 else ())

    def value(self) -> complex:
        r = self.right(0)
        return complex(r[0]) if r is not None else 1.0 + 0j

    def environment(self, index: int) -> np.ndarray:
        """Rest of the network contracted, open on ``nodes[index].legs``."""
        nd = self.nodes[index]
        c = nd.column
        ops = [(self.nodes[i].array, self.nodes[i].legs) for i in self.by_column[c] if i != index]
        left, right = self.left(c - 1), self.right(c + 1)
        if left is not None:
            ops.insert(0, left)
        if right is not None:
            ops.append(right)
        return self._contract(ops, nd.legs)


def _strip_boundaries(t: np.ndarray, first: bool, last: bool) -> np.ndarray:
    if first:
        t = t[0:1].reshape(t.shape[1:])
        if last:
            return t[..., 0]
        return t
    if last:
        return t[..., 0]
    return t


def sandwich_network(
    bra: Sequence[np.ndarray],
    ket: Sequence[np.ndarray],
    chain: WireChain,
    gates: Sequence[Gate],
) -> tuple[ColumnNetwork, list[int]]:
    """Network for <bra| (U x 1) |ket> with U acting on the wire legs.

    ``bra`` and ``ket`` are per-site tensors (left, passive, wire, right);
    the wire leg of site k is chain wire ``chain.site_wire(k)``.  Ancilla
    wires enter and leave in |0>.  Returns the network and, per gate, the
    index of its node.
    """
    n = len(ket)
    if len(bra) != n or chain.n_sites != n:
        raise ValueError("site counts disagree")
    counter = iter(range(10**9))
    nodes: list[Node] = []
    cur: dict[int, int] = {}
    kb = [next(counter) for _ in range(n + 1)]
    bb = [next(counter) for _ in range(n + 1)]
    passive = [next(counter) for _ in range(n)]

    def site_node(arr: np.ndarray, k: int, bonds: list[int], wire_leg: int) -> Node:
        legs = [bonds[k], passive[k], wire_leg, bonds[k + 1]]
        keep = [i for i in range(4) if not ((i == 0 and k == 0) or (i == 3 and k == n - 1))]
        a = _strip_boundaries(arr, k == 0, k == n - 1)
        return Node(np.ascontiguousarray(a), tuple(legs[i] for i in keep), chain.site_wire(k))

    zero_cache: dict[int, np.ndarray] = {}

    def zero(d: int) -> np.ndarray:
        if d not in zero_cache:
            zero_cache[d] = np.eye(d, 1, dtype=np.complex128)[:, 0]
        return zero_cache[d]

    for k in range(n):
        w = chain.site_wire(k)
        for arr in (ket[k], bra[k]):
            if arr.shape[2] != chain.wires[w].dim:
                raise ValueError(f"site {k} wire dimension disagrees with the chain")
        if ket[k].shape[1] != bra[k].shape[1]:
            raise ValueError(f"site {k} passive dimensions differ")
        cur[w] = next(counter)
        nodes.append(site_node(ket[k], k, kb, cur[w]))
    for w, wire in enumerate(chain.wires):
        if wire.kind == "ancilla":
            cur[w] = next(counter)
            nodes.append(Node(zero(wire.dim), (cur[w],), w))
    gate_nodes = []
    for g in gates:
        dims = [chain.wires[w].dim for w in g.wires]
        outs = [next(counter) for _ in g.wires]
        legs = tuple(outs) + tuple(cur[w] for w in g.wires)
        for w, o in zip(g.wires, outs):
            cur[w] = o
        gate_nodes.append(len(nodes))
        nodes.append(Node(g.matrix.reshape(*dims, *dims), legs, max(g.wires)))
    for k in range(n):
        nodes.append(site_node(bra[k].conj(), k, bb, cur[chain.site_wire(k)]))
    for w, wire in enumerate(chain.wires):
        if wire.kind == "ancilla":
            nodes.append(Node(zero(wire.dim), (cur[w],), w))
    return ColumnNetwork(nodes, len(chain)), gate_nodes
