"""Benchmark target unitaries and the target loader."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import matrixcore as mc

LOAD_TOL = 1e-6
KINDS = ("file", "haar", "toffoli", "fredkin", "adder")


def permutation_matrix(n: int, f: Callable[[int], int]) -> np.ndarray:
    """Matrix sending basis state ``x`` to ``f(x)``."""
    d = 2**n
    images = [f(x) for x in range(d)]
    if sorted(images) != list(range(d)):
        raise ValueError("map is not a permutation of basis states")
    p = np.zeros((d, d), dtype=complex)
    p[images, np.arange(d)] = 1
    return p


def _bit(x: int, q: int, n: int) -> int:
    return (x >> (n - q)) & 1


def mcx(n: int, controls: tuple[int, ...], target: int) -> np.ndarray:
    """Multi-controlled X: flip ``target`` when every control qubit is 1."""
    if target in controls or len(set(controls)) != len(controls):
        raise ValueError("controls and target must be distinct")
    for q in (*controls, target):
        if not 1 <= q <= n:
            raise ValueError(f"qubit {q} out of range 1..{n}")

    def flip(x: int) -> int:
        if all(_bit(x, c, n) for c in controls):
            return x ^ (1 << (n - target))
        return x

    return permutation_matrix(n, flip)


def toffoli(n: int = 3) -> np.ndarray:
    """n-qubit Toffoli: qubit n flips iff qubits 1..n-1 are all 1."""
    if n < 3:
        raise ValueError("toffoli needs n >= 3")
    return mc.special_unitarize(mcx(n, tuple(range(1, n)), n))


def fredkin() -> np.ndarray:
    """Controlled swap of qubits 2 and 3, controlled by qubit 1."""
    # CSWAP = CX(3->2) . CCX(1,2->3) . CX(3->2)
    cx32 = mcx(3, (3,), 2)
    return mc.special_unitarize(cx32 @ mcx(3, (1, 2), 3) @ cx32)


# (controls, target) in time order on (cin, a, b, 0) -> (cin, a, sum, carry)
FULL_ADDER_GATES: tuple[tuple[tuple[int, ...], int], ...] = (
    ((2, 3), 4),
    ((2,), 3),
    ((1, 3), 4),
    ((1,), 3),
)


def full_adder() -> np.ndarray:
    """Reversible one-bit full adder on qubits (cin, a, b, 0).

    Output is (cin, a, sum, carry). Built from two Toffolis and two CNOTs.
    """
    u = np.eye(16, dtype=complex)
    for controls, target in FULL_ADDER_GATES:
        u = mcx(4, controls, target) @ u
    return mc.special_unitarize(u)


@dataclass(frozen=True)
class TargetSpec:
    kind: str
    n: int | None = None
    path: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}; use one of {KINDS}")
        if self.kind == "file" and not self.path:
            raise ValueError("file target needs a path")
        if self.kind in ("haar", "toffoli") and self.n is None:
            raise ValueError(f"{self.kind} target needs n")

    @classmethod
    def parse(cls, text: str, n: int | None = None, seed: int = 0) -> "TargetSpec":
        """Parse the CLI form: ``file:PATH``, ``haar``, ``toffoliN``, ``fredkin``, ``adder``."""
        if text.startswith("file:"):
            return cls("file", n, text[5:], seed)
        if text == "haar":
            return cls("haar", n, seed=seed)
        if text.startswith("toffoli"):
            digits = text[len("toffoli") :]
            if digits and not digits.isdigit():
                raise ValueError(f"bad target {text!r}")
            width = int(digits) if digits else n
            if n is not None and width is not None and n != width:
                raise ValueError(f"{text} is a {width}-qubit gate, but n = {n}")
            return cls("toffoli", width)
        if text == "fredkin":
            return cls("fredkin", 3 if n is None else n)
        if text == "adder":
            return cls("adder", 4 if n is None else n)
        raise ValueError(f"unknown target {text!r}")


def load(spec: TargetSpec) -> np.ndarray:
    """Build or read the target and return it in SU(2^n)."""
    if spec.kind == "haar":
        return mc.haar_random(spec.n, spec.seed)
    if spec.kind == "toffoli":
        return toffoli(spec.n)
    if spec.kind == "fredkin":
        _expect(spec.n, 3, "fredkin")
        return fredkin()
    if spec.kind == "adder":
        _expect(spec.n, 4, "adder")
        return full_adder()
    u = mc.read_unitary(Path(spec.path))
    n = u.shape[0].bit_length() - 1
    if spec.n is not None and spec.n != n:
        raise ValueError(f"{spec.path}: file holds {n} qubits, expected {spec.n}")
    return mc.special_unitarize(u, tol=LOAD_TOL)


def _expect(n: int | None, want: int, name: str) -> None:
    if n is not None and n != want:
        raise ValueError(f"{name} acts on {want} qubits, not {n}")
