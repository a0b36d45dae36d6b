"""CNOT-word rewriting and the group-LASSO compression pipeline.

A word is a list of ``(control, target)`` pairs in time order. A downward
CNOT ``j -> k`` acts on bit vectors as ``x_k ^= x_j``, i.e. as the elementary
lower unitriangular matrix ``I + e_{kj}`` over GF(2); a word acts as the
product of its gates, latest on the left.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, Pair, Structure, assemble, emit_circuit, group_slice
from .matrixcore import align_phase, fidelity_from_cost
from .optimize import OptimizerConfig, nesterov, prox_group_lasso
from .structures import ConnectivityGraph

Word = list[Pair]


class Gf2LowerMatrix:
    """Lower unitriangular n x n matrix over GF(2), rows stored as bitsets.

    Bit ``c - 1`` of ``rows[r - 1]`` holds entry ``(r, c)``.
    """

    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: Sequence[int]):
        self.n = n
        self.rows = tuple(rows)
        for r, bits in enumerate(self.rows):
            if bits >> (r + 1) or not (bits >> r) & 1:
                raise ValueError("matrix is not lower unitriangular")

    @classmethod
    def identity(cls, n: int) -> "Gf2LowerMatrix":
        return cls(n, [1 << r for r in range(n)])

    @classmethod
    def elementary(cls, n: int, j: int, k: int) -> "Gf2LowerMatrix":
        """Matrix of CNOT ``j -> k``, which must point downward."""
        if not 1 <= j < k <= n:
            raise ValueError(f"CNOT {j}->{k} is not downward-facing on {n} qubits")
        rows = [1 << r for r in range(n)]
        rows[k - 1] |= 1 << (j - 1)
        return cls(n, rows)

    @classmethod
    def from_word(cls, word: Iterable[Pair], n: int) -> "Gf2LowerMatrix":
        m = cls.identity(n)
        for j, k in word:
            m = cls.elementary(n, j, k) @ m
        return m

    def __matmul__(self, other: "Gf2LowerMatrix") -> "Gf2LowerMatrix":
        out = []
        for bits in self.rows:
            acc = 0
            c = 0
            while bits:
                if bits & 1:
                    acc ^= other.rows[c]
                bits >>= 1
                c += 1
            out.append(acc)
        return Gf2LowerMatrix(self.n, out)

    def __eq__(self, other) -> bool:
        return isinstance(other, Gf2LowerMatrix) and self.rows == other.rows

    def __hash__(self) -> int:
        return hash(self.rows)

    def entry(self, r: int, c: int) -> int:
        return (self.rows[r - 1] >> (c - 1)) & 1

    def to_array(self) -> np.ndarray:
        return np.array(
            [[self.entry(r, c) for c in range(1, self.n + 1)] for r in range(1, self.n + 1)],
            dtype=np.uint8,
        )


def _check_word(word: Iterable[Pair], n: int) -> Word:
    out = []
    for j, k in word:
        if not 1 <= j < k <= n:
            raise ValueError(f"CNOT {j}->{k} is not downward-facing on {n} qubits")
        out.append((int(j), int(k)))
    return out


def synthesize(word: Iterable[Pair], n: int) -> Word:
    """Shortest-form rewrite through the word's GF(2) matrix.

    Gaussian elimination column by column, rows top to bottom; the recorded
    row operations, reversed, reproduce the matrix. At most n(n-1)/2 gates.
    """
    rows = list(Gf2LowerMatrix.from_word(_check_word(word, n), n).rows)
    ops = []
    for c in range(1, n + 1):
        for k in range(c + 1, n + 1):
            if (rows[k - 1] >> (c - 1)) & 1:
                rows[k - 1] ^= rows[c - 1]
                ops.append((c, k))
    return ops[::-1]


def simulate(word: Iterable[Pair], n: int, state: int) -> int:
    """Apply a CNOT word to a basis state (qubit 1 is the most significant bit)."""
    for j, k in word:
        if (state >> (n - j)) & 1:
            state ^= 1 << (n - k)
    return state


def basis_map(word: Sequence[Pair], n: int) -> tuple[int, ...]:
    return tuple(simulate(word, n, x) for x in range(2**n))


def equivalent(a: Sequence[Pair], b: Sequence[Pair], n: int) -> bool:
    """True iff both words permute all 2^n basis states identically."""
    return basis_map(a, n) == basis_map(b, n)


# --- identity rules ---------------------------------------------------------


def commute(a: Pair, b: Pair) -> bool:
    """CNOTs commute unless one's control is the other's target."""
    return a[0] != b[1] and b[0] != a[1]


def _cancel_once(w: Word) -> Word | None:
    for i, gi in enumerate(w):
        for j in range(i + 1, len(w)):
            if w[j] == gi:
                return w[:i] + w[i + 1 : j] + w[j + 1 :]
            if not commute(gi, w[j]):
                break
    return None


def _mirror_middle(first: Pair, gate: Pair, g: ConnectivityGraph) -> Word | None:
    """Replacement for ``first gate first`` if it is a mirror pattern allowed by g."""
    a, b = first
    if gate[0] == b:
        # (a->b)(b->c)(a->b) = (b->c)(a->c)
        c = gate[1]
        if (a, c) in g:
            return [gate, (a, c)]
    elif gate[1] == a:
        # (b->c)(a->b)(b->c) = (a->b)(a->c), here first = (b->c), gate = (a->b)
        z = gate[0]
        if (z, b) in g:
            return [gate, (z, b)]
    return None


def _mirror_once(w: Word, g: ConnectivityGraph) -> Word | None:
    for i, first in enumerate(w):
        middle = None
        repl = None
        moved = []
        for j in range(i + 1, len(w)):
            gate = w[j]
            if middle is None:
                r = _mirror_middle(first, gate, g)
                if r is not None:
                    middle, repl = j, r
                    continue
                if not commute(gate, first):
                    break
                moved.append(gate)
            else:
                if gate == first:
                    return w[:i] + moved + repl + w[j + 1 :]
                if not (commute(gate, first) and commute(gate, w[middle])):
                    break
                moved.append(gate)
    return None


def _reduce(w: Word, g: ConnectivityGraph, budget: int) -> Word:
    for _ in range(budget):
        nxt = _cancel_once(w)
        if nxt is None:
            nxt = _mirror_once(w, g)
        if nxt is None:
            break
        w = nxt
    return w


def _inverse_mirrors(w: Word, g: ConnectivityGraph):
    """Words obtained by growing one adjacent pair into a mirror triple."""
    for i in range(len(w) - 1):
        p, q = w[i], w[i + 1]
        for x, y in ((p, q), (q, p)):
            if x[1] == y[1] and x[0] > y[0]:
                # (b->c)(a->c) = (a->b)(b->c)(a->b)
                (b, c), a = x, y[0]
                if (a, b) in g:
                    yield w[:i] + [(a, b), (b, c), (a, b)] + w[i + 2 :]
            elif x[0] == y[0] and x[1] < y[1]:
                # (a->b)(a->c) = (b->c)(a->b)(b->c)
                (a, b), c = x, y[1]
                if (b, c) in g:
                    yield w[:i] + [(b, c), (a, b), (b, c)] + w[i + 2 :]


def apply_identities(word: Iterable[Pair], g: ConnectivityGraph) -> Word:
    """Shorten a downward CNOT word with cancellation, commutation and mirror rules.

    Mirror rewrites only introduce pairs that are edges of ``g``. The inverse
    mirror, which lengthens a word, is tried only as a lookahead and kept
    when the reduction that follows ends strictly shorter. The result is
    never longer than the input.
    """
    w = _check_word(word, g.n)
    budget = 10 * max(len(w), 1)
    w = _reduce(w, g, budget)
    for _ in range(budget):
        best = None
        for cand in _inverse_mirrors(w, g):
            red = _reduce(cand, g, budget)
            if len(red) < len(w) and (best is None or len(red) < len(best)):
                best = red
        if best is None:
            break
        w = best
    return w


# --- compression pipeline ---------------------------------------------------


def zero_runs(s: Structure, theta: np.ndarray) -> list[tuple[int, int]]:
    """Maximal ``[start, stop)`` ranges of units whose four angles are all exact zeros."""
    theta = np.asarray(theta)
    dead = [not np.any(theta[group_slice(s.n, ell)]) for ell in range(1, len(s) + 1)]
    runs = []
    start = None
    for i, z in enumerate(dead + [False]):
        if z and start is None:
            start = i
        elif not z and start is not None:
            runs.append((start, i))
            start = None
    return runs


def eliminate_zero_units(s: Structure, theta) -> tuple[Circuit, list[tuple[int, int]]]:
    """Drop zero-angle rotations and report the CNOT-only runs of zero units.

    Returns the circuit plus the ``[start, stop)`` unit ranges (0-based) whose
    rotations were all zero.
    """
    theta = np.asarray(theta, dtype=float)
    full = emit_circuit(s, theta)
    gates = tuple(g for g in full.gates if g.name == "cx" or g.angle != 0.0)
    return Circuit(s.n, gates), zero_runs(s, theta)


def _run_word(s: Structure, start: int, stop: int) -> Word:
    word = list(s.units[start:stop])
    if stop < len(s):
        word.append(s.units[stop])
    return word


def rewrite_word(word: Word, g: ConnectivityGraph, use_synthesis: bool) -> Word:
    """Synthesis (kept only if not longer) followed by the identity rules."""
    if use_synthesis:
        syn = synthesize(word, g.n)
        if len(syn) <= len(word):
            word = syn
    return apply_identities(word, g)


def compact(
    s: Structure, theta, g: ConnectivityGraph, use_synthesis: bool
) -> tuple[Structure, np.ndarray]:
    """Rewrite every zero-unit run and rebuild a unit structure.

    A run's word is its own CNOTs plus the CNOT of the next live unit, since
    nothing but CNOTs sits between them. The last gate of the rewritten word
    inherits the live unit's angles; the others get zero angles. If the word
    vanishes the live unit's rotations are dropped.
    """
    theta = np.asarray(theta, dtype=float)
    n = s.n
    runs = {start: stop for start, stop in zero_runs(s, theta)}
    units: list[Pair] = []
    groups: list[np.ndarray] = []
    ell = 0
    while ell < len(s):
        if ell not in runs:
            units.append(s.units[ell])
            groups.append(theta[group_slice(n, ell + 1)])
            ell += 1
            continue
        stop = runs[ell]
        word = _run_word(s, ell, stop)
        new = rewrite_word(word, g, use_synthesis)
        if len(new) > len(word):
            new = word
        tail = theta[group_slice(n, stop + 1)] if stop < len(s) else np.zeros(4)
        for i, pair in enumerate(new):
            units.append(pair)
            groups.append(tail if i == len(new) - 1 else np.zeros(4))
        ell = stop + 1
    out = Structure(n, tuple(units))
    theta_out = np.concatenate([theta[: 3 * n]] + groups) if groups else theta[: 3 * n].copy()
    return out, theta_out


@dataclass
class CompressionReport:
    lam: float
    cnots_before: int
    cnots_after: int
    cost_after: float
    fidelity_after: float
    iters_prox: int
    iters_reopt: int
    wall_ms: float | None = None

    def as_record(self, timing: bool = True) -> dict:
        rec = {
            "lambda": self.lam,
            "cnots_before": self.cnots_before,
            "cnots_after": self.cnots_after,
            "cost_after": self.cost_after,
            "fidelity_after": self.fidelity_after,
            "iters_prox": self.iters_prox,
            "iters_reopt": self.iters_reopt,
        }
        if timing:
            rec["wall_ms"] = self.wall_ms
        return rec

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.as_record(timing))


def compress(
    s: Structure,
    u,
    lam: float,
    cfg: OptimizerConfig,
    g: ConnectivityGraph | None = None,
    use_synthesis: bool | None = None,
    theta0=None,
    reopt_cfg: OptimizerConfig | None = None,
) -> tuple[Structure, np.ndarray, CompressionReport]:
    """Group-LASSO compression: prox, drop zero units, rewrite CNOT runs, re-optimize.

    ``use_synthesis`` defaults to whether ``g`` is fully connected, since
    synthesis ignores connectivity. Re-optimization runs Nesterov from the
    surviving angles with ``reopt_cfg`` (``cfg`` with ``lam = 0`` by default).

    The target is only fixed up to a d-th root of unity, and dropping units
    can move the circuit towards another representative. Re-optimization
    aims at the representative nearest the compacted circuit and is repeated
    once if it ends nearer a different one; cost and fidelity are reported
    against the final representative.
    """
    t0 = time.perf_counter()
    g = g if g is not None else ConnectivityGraph.full(s.n)
    if use_synthesis is None:
        use_synthesis = g.is_full
    u = np.asarray(u, dtype=complex)
    prox = prox_group_lasso(s, u, replace(cfg, method="prox", lam=lam), theta0)
    s2, theta2 = compact(s, prox.theta, g, use_synthesis)
    reopt_cfg = reopt_cfg or replace(cfg, method="nesterov", lam=0.0)
    target = align_phase(u, assemble(s2, theta2))
    res = nesterov(s2, target, reopt_cfg, theta2)
    iters = res.iterations
    nearest = align_phase(u, assemble(s2, res.theta))
    if not np.array_equal(nearest, target):
        res = nesterov(s2, nearest, reopt_cfg, res.theta)
        iters += res.iterations
    d = 2**s.n
    report = CompressionReport(
        lam=float(lam),
        cnots_before=len(s),
        cnots_after=len(s2),
        cost_after=res.final_cost,
        fidelity_after=fidelity_from_cost(res.final_cost, d),
        iters_prox=prox.iterations,
        iters_reopt=iters,
        wall_ms=(time.perf_counter() - t0) * 1e3,
    )
    return s2, res.theta, report


def compressed_circuit(s: Structure, theta) -> Circuit:
    """Emit a circuit with zero-angle rotations stripped."""
    return eliminate_zero_units(s, theta)[0]

