"""Structure generators, hardware connectivity and CNOT-count formulas."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .circuit import CircuitFormatError, Pair, Structure, _content_lines, _header, _qubit

CART_MAX_QUBITS = 6


@dataclass(frozen=True)
class ConnectivityGraph:
    """Undirected qubit coupling graph; edges are stored as ``(j, k)`` with ``j < k``."""

    n: int
    edges: frozenset[Pair]
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a connectivity graph needs at least one qubit")
        edges = frozenset((min(e), max(e)) for e in self.edges)
        for j, k in edges:
            if not 1 <= j < k <= self.n:
                raise ValueError(f"edge ({j}, {k}) out of range for {self.n} qubits")
        object.__setattr__(self, "edges", edges)

    def __contains__(self, pair) -> bool:
        j, k = pair
        return (min(j, k), max(j, k)) in self.edges

    @classmethod
    def full(cls, n: int) -> "ConnectivityGraph":
        pairs = [(j, k) for j in range(1, n + 1) for k in range(j + 1, n + 1)]
        return cls(n, frozenset(pairs), "full")

    @classmethod
    def star(cls, n: int) -> "ConnectivityGraph":
        return cls(n, frozenset((1, k) for k in range(2, n + 1)), "star")

    @classmethod
    def line(cls, n: int) -> "ConnectivityGraph":
        return cls(n, frozenset((j, j + 1) for j in range(1, n)), "line")

    @property
    def is_full(self) -> bool:
        return len(self.edges) == self.n * (self.n - 1) // 2


PRESETS = {
    "full": ConnectivityGraph.full,
    "star": ConnectivityGraph.star,
    "line": ConnectivityGraph.line,
}


def parse_connectivity(text: str) -> ConnectivityGraph:
    """Parse ``qubits <n>`` followed by ``edge <j> <k>`` lines."""
    lines = _content_lines(text)
    n = _header(lines, "qubits")
    edges = set()
    for lineno, parts in lines:
        if parts[0] != "edge" or len(parts) != 3:
            raise CircuitFormatError(f"line {lineno}: expected 'edge <j> <k>'")
        j, k = (_qubit(t, n, lineno) for t in parts[1:])
        if j == k:
            raise CircuitFormatError(f"line {lineno}: self-loop on qubit {j}")
        edges.add((min(j, k), max(j, k)))
    return ConnectivityGraph(n, frozenset(edges), "file")


def connectivity(spec: str, n: int) -> ConnectivityGraph:
    """Resolve a preset name or ``file:PATH``."""
    if spec in PRESETS:
        return PRESETS[spec](n)
    if spec.startswith("file:"):
        g = parse_connectivity(Path(spec[5:]).read_text())
        if g.n != n:
            raise ValueError(f"connectivity file is for {g.n} qubits, expected {n}")
        return g
    raise ValueError(f"unknown connectivity {spec!r}; use full, star, line or file:PATH")


# --- counting formulas ------------------------------------------------------


def tlb(n: int) -> int:
    """Lower bound on CNOTs for exact compilation of generic n-qubit unitaries."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return -(-(4**n - 3 * n - 1) // 4)


def qsd_count(n: int) -> int:
    """Closed-form CNOT count of the quantum Shannon decomposition."""
    if n < 2:
        raise ValueError("n must be >= 2")
    value = Fraction(23, 48) * 4**n - Fraction(3, 2) * 2**n + Fraction(4, 3)
    return round(value)


# --- generators -------------------------------------------------------------


def sequ_order(n: int, j: int, k: int) -> int:
    """1-based position of pair ``(j, k)`` within one sequ cycle."""
    return n * (j - 1) + k - j * (j + 1) // 2


def sequ(n: int, length: int, g: ConnectivityGraph | None = None) -> Structure:
    """Cycle through all ``j < k`` pairs in order, skipping pairs missing from ``g``."""
    if length < 0:
        raise ValueError("length must be >= 0")
    g = g if g is not None else ConnectivityGraph.full(n)
    if g.n != n:
        raise ValueError(f"graph has {g.n} qubits, structure needs {n}")
    pairs = sorted(
        ((j, k) for j in range(1, n + 1) for k in range(j + 1, n + 1)),
        key=lambda p: sequ_order(n, *p),
    )
    cycle = [p for p in pairs if p in g]
    if length and not cycle:
        raise ValueError("connectivity graph has no edges")
    return Structure(n, tuple(cycle[i % len(cycle)] for i in range(length)))


def spin(n: int, length: int) -> Structure:
    """Alternate the blocks ``(1->2, 3->4, ...)`` and ``(2->3, 4->5, ...)``."""
    if n < 2:
        raise ValueError("spin needs n >= 2")
    if length < 0:
        raise ValueError("length must be >= 0")
    blocks = [
        [(j, j + 1) for j in range(start, n, 2)] for start in (1, 2)
    ]
    blocks = [b for b in blocks if b]
    units: list[Pair] = []
    b = 0
    while len(units) < length:
        units += blocks[b % len(blocks)]
        b += 1
    return Structure(n, tuple(units[:length]))


def _trailing_zeros(i: int) -> int:
    return (i & -i).bit_length() - 1


def _multiplexor(n: int, drop_last: bool) -> list[Pair]:
    """Gray-code CNOT ladder of a uniformly controlled rotation on qubit n."""
    steps = 2 ** (n - 1)
    pairs = [(max(1, n - 1 - _trailing_zeros(i)), n) for i in range(1, steps + 1)]
    return pairs[:-1] if drop_last else pairs


def _cart(n: int, top: bool) -> list[Pair]:
    if n == 2:
        return [(1, 2)] * 3
    block = _cart(n - 1, top=False)
    # only the three-qubit layout merges the trailing CNOT of each z multiplexor
    merge = top and n == 3
    mz = _multiplexor(n, drop_last=merge)
    my = _multiplexor(n, drop_last=False)
    return block + mz + block + my + block + mz + block


def cart(n: int) -> Structure:
    """Recursive Shannon-decomposition layout.

    Three demultiplexed ``(n-1)``-qubit blocks interleaved with z, y and z
    multiplexors targeting qubit n. The three-qubit layout lets each z
    multiplexor share its last CNOT with a neighbour, giving 22 units; larger
    layouts are built from unmerged blocks.
    """
    if not 2 <= n <= CART_MAX_QUBITS:
        raise ValueError(f"cart supports 2 <= n <= {CART_MAX_QUBITS}, got {n}")
    return Structure(n, tuple(_cart(n, top=True)))


def validate(s: Structure, g: ConnectivityGraph) -> bool:
    """True iff every unit sits on an edge of ``g``."""
    if s.n != g.n:
        raise ValueError(f"structure has {s.n} qubits, graph has {g.n}")
    return all(u in g for u in s.units)


def permute(s: Structure, seed) -> Structure:
    """Uniformly random reordering of the units of ``s``."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(s.units))
    return Structure(s.n, tuple(s.units[i] for i in order))


def build(name: str, n: int, length: int | None, g: ConnectivityGraph) -> Structure:
    """Construct a named structure family under connectivity ``g``."""
    if name == "sequ":
        return sequ(n, _need_length(name, length), g)
    if name == "spin":
        s = spin(n, _need_length(name, length))
    elif name == "cart":
        if not g.is_full:
            raise ValueError("cart requires full connectivity")
        s = cart(n)
        if length is not None and length != len(s):
            raise ValueError(f"cart({n}) has fixed length {len(s)}")
    else:
        raise ValueError(f"unknown structure {name!r}; use sequ, spin or cart")
    if not validate(s, g):
        raise ValueError(f"{name} structure does not fit the {g.name} connectivity")
    return s


def _need_length(name: str, length: int | None) -> int:
    if length is None:
        raise ValueError(f"{name} needs a length")
    return length
