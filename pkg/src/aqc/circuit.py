"""CNOT-unit circuit model.

A :class:`Structure` lists where CNOT units sit; together with an angle
vector it determines the matrix

    V(theta) = CU_L ... CU_1 . [Rz Ry Rz] (x) ... (x) [Rz Ry Rz]

Angle layout (0-indexed): qubit ``q`` owns ``theta[3(q-1):3q]`` for its
initial ``Rz(t0) Ry(t1) Rz(t2)`` (matrix order, so ``t2`` acts first in
time); unit ``l`` owns ``theta[3n+4(l-1):3n+4l]`` ordered as (Ry on control,
Rz on control, Ry on target, Rx on target). A unit applies its CNOT first,
then the Ry/Rz pair on the control and the Ry/Rx pair on the target.

Gate lists are applied left to right in time; matrices compose right to left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import matrixcore as mc

Pair = tuple[int, int]

_CX4 = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_HALF_I = -0.5j


class CircuitFormatError(ValueError):
    """Malformed circuit, structure or connectivity text."""


@dataclass(frozen=True)
class Structure:
    """Ordered control->target pairs with ``control < target``, 1-indexed."""

    n: int
    units: tuple[Pair, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("a structure needs at least one qubit")
        units = tuple((int(j), int(k)) for j, k in self.units)
        for j, k in units:
            if not 1 <= j < k <= self.n:
                raise ValueError(
                    f"unit {j}->{k} violates 1 <= control < target <= {self.n}"
                )
        object.__setattr__(self, "units", units)

    def __len__(self) -> int:
        return len(self.units)

    @property
    def num_params(self) -> int:
        return param_count(self.n, len(self.units))


def param_count(n: int, length: int) -> int:
    return 3 * n + 4 * length


def group_slice(n: int, ell: int) -> slice:
    """Slice of the four angles of unit ``ell`` (1-indexed)."""
    return slice(3 * n + 4 * (ell - 1), 3 * n + 4 * ell)


def group_norms(n: int, theta: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(theta)[3 * n :].reshape(-1, 4), axis=1)


def _check_theta(s: Structure, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (s.num_params,):
        raise ValueError(
            f"angle vector has shape {theta.shape}, structure needs ({s.num_params},)"
        )
    return theta


# --- batched local gate matrices --------------------------------------------


def _rot_batch(axis: str, t: np.ndarray) -> np.ndarray:
    c = np.cos(t / 2)
    s = np.sin(t / 2)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    if axis == "x":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif axis == "y":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    else:
        out[..., 0, 0] = np.exp(-0.5j * t)
        out[..., 1, 1] = np.exp(0.5j * t)
    return out


def _kron_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m = a.shape[-1] * b.shape[-1]
    return np.einsum("...ab,...cd->...acbd", a, b).reshape(a.shape[:-2] + (m, m))


def initial_locals(theta0: np.ndarray, with_derivatives: bool = False):
    """Per-qubit ``Rz Ry Rz`` blocks from a (n, 3) angle array."""
    za = _rot_batch("z", theta0[:, 0])
    yb = _rot_batch("y", theta0[:, 1])
    zc = _rot_batch("z", theta0[:, 2])
    yz = yb @ zc
    u = za @ yz
    if not with_derivatives:
        return u
    du = np.empty(u.shape[:1] + (3, 2, 2), dtype=complex)
    du[:, 0] = _HALF_I * (mc.Z @ u)
    du[:, 1] = za @ (_HALF_I * mc.Y) @ yz
    du[:, 2] = _HALF_I * (u @ mc.Z)
    return u, du


def unit_locals(theta_units: np.ndarray, with_derivatives: bool = False):
    """4x4 CNOT-unit blocks (control is the high local bit) from (L, 4) angles."""
    ry1 = _rot_batch("y", theta_units[:, 0])
    rz2 = _rot_batch("z", theta_units[:, 1])
    ry3 = _rot_batch("y", theta_units[:, 2])
    rx4 = _rot_batch("x", theta_units[:, 3])
    ctrl = rz2 @ ry1
    targ = rx4 @ ry3
    g = _kron_batch(ctrl, targ) @ _CX4
    if not with_derivatives:
        return g
    dctrl1 = rz2 @ (_HALF_I * mc.Y) @ ry1
    dctrl2 = _HALF_I * (mc.Z @ ctrl)
    dtarg3 = rx4 @ (_HALF_I * mc.Y) @ ry3
    dtarg4 = _HALF_I * (mc.X @ targ)
    dg = np.stack(
        [
            _kron_batch(dctrl1, targ),
            _kron_batch(dctrl2, targ),
            _kron_batch(ctrl, dtarg3),
            _kron_batch(ctrl, dtarg4),
        ],
        axis=1,
    ) @ _CX4
    return g, dg


@lru_cache(maxsize=None)
def _block_index(n: int, qubits: tuple[int, ...]) -> np.ndarray:
    """Index table ``P[a, r]``: basis state with ``qubits`` set to ``a``.

    ``a`` reads the listed qubits most-significant first; ``r`` enumerates the
    remaining qubits in increasing order.
    """
    k = len(qubits)
    rest = [q for q in range(1, n + 1) if q not in qubits]
    idx = np.empty((2**k, 2 ** (n - k)), dtype=np.intp)
    for a in range(2**k):
        for r in range(2 ** (n - k)):
            x = 0
            for pos, q in enumerate(qubits):
                if (a >> (k - 1 - pos)) & 1:
                    x |= 1 << (n - q)
            for pos, q in enumerate(rest):
                if (r >> (n - k - 1 - pos)) & 1:
                    x |= 1 << (n - q)
            idx[a, r] = x
    idx.setflags(write=False)
    return idx


@lru_cache(maxsize=256)
def layer_indices(n: int, units: tuple[Pair, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Stacked block-index tables for the n one-qubit layers and the L units."""
    single = np.stack([_block_index(n, (q,)) for q in range(1, n + 1)])
    if units:
        pairs = np.stack([_block_index(n, u) for u in units])
    else:
        pairs = np.empty((0, 4, 2 ** max(n - 2, 0)), dtype=np.intp)
    single.setflags(write=False)
    pairs.setflags(write=False)
    return single, pairs


def scatter_blocks(local: np.ndarray, index: np.ndarray, d: int) -> np.ndarray:
    """Expand (N, b, b) local blocks into (N, d, d) full layer matrices."""
    count, b, _ = local.shape
    full = np.zeros((count, d, d), dtype=complex)
    if count == 0:
        return full
    layer = np.arange(count)[:, None, None, None]
    rows = index[:, :, None, :]
    cols = index[:, None, :, :]
    full[layer, rows, cols] = local[:, :, :, None]
    return full


def layer_stack(s: Structure, theta) -> np.ndarray:
    """Full d x d matrices of the n one-qubit layers then the L units, in time order."""
    theta = _check_theta(s, theta)
    n = s.n
    d = 2**n
    single_idx, pair_idx = layer_indices(n, s.units)
    u = initial_locals(theta[: 3 * n].reshape(n, 3))
    layers = [scatter_blocks(u, single_idx, d)]
    if s.units:
        g = unit_locals(theta[3 * n :].reshape(-1, 4))
        layers.append(scatter_blocks(g, pair_idx, d))
    return np.concatenate(layers)


def assemble(s: Structure, theta) -> np.ndarray:
    """The circuit matrix ``V_ct(theta)``."""
    v = np.eye(2**s.n, dtype=complex)
    for g in layer_stack(s, theta):
        v = g @ v
    return v


def cnot_unit_matrix(n: int, j: int, k: int, t1, t2, t3, t4) -> np.ndarray:
    """Full matrix of one CNOT unit ``CU_{j->k}(t1, t2, t3, t4)``."""
    if not 1 <= j < k <= n:
        raise ValueError(f"unit {j}->{k} violates 1 <= control < target <= {n}")
    ctrl = mc.embed(mc.rz(t2) @ mc.ry(t1), j, n)
    targ = mc.embed(mc.rx(t4) @ mc.ry(t3), k, n)
    return ctrl @ targ @ mc.cnot_matrix(n, j, k)


# --- concrete gate lists ----------------------------------------------------


class Gate(NamedTuple):
    name: str  # "rx" | "ry" | "rz" | "cx"
    qubits: tuple[int, ...]
    angle: float | None = None


def rotation(axis: str, qubit: int, angle: float) -> Gate:
    return Gate("r" + axis, (qubit,), float(angle))


def cx(control: int, target: int) -> Gate:
    return Gate("cx", (control, target))


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        gates = tuple(Gate(*g) for g in self.gates)
        for g in gates:
            if g.name == "cx":
                if len(g.qubits) != 2 or g.qubits[0] == g.qubits[1]:
                    raise ValueError(f"bad CNOT {g.qubits}")
            elif g.name in ("rx", "ry", "rz"):
                if len(g.qubits) != 1 or g.angle is None or not np.isfinite(g.angle):
                    raise ValueError(f"bad rotation {g}")
            else:
                raise ValueError(f"unknown gate {g.name!r}")
            if any(not 1 <= q <= self.n for q in g.qubits):
                raise ValueError(f"qubit index out of range in {g}")
        object.__setattr__(self, "gates", gates)

    @property
    def cnot_count(self) -> int:
        return sum(g.name == "cx" for g in self.gates)


def emit_circuit(s: Structure, theta) -> Circuit:
    """Gate list, in time order, realizing ``assemble(s, theta)``."""
    theta = _check_theta(s, theta)
    n = s.n
    gates = []
    for q in range(1, n + 1):
        a, b, c = theta[3 * (q - 1) : 3 * q]
        gates += [rotation("z", q, c), rotation("y", q, b), rotation("z", q, a)]
    for ell, (j, k) in enumerate(s.units, start=1):
        t1, t2, t3, t4 = theta[group_slice(n, ell)]
        gates += [
            cx(j, k),
            rotation("y", j, t1),
            rotation("z", j, t2),
            rotation("y", k, t3),
            rotation("x", k, t4),
        ]
    return Circuit(n, tuple(gates))


def gate_matrix(g: Gate, n: int) -> np.ndarray:
    if g.name == "cx":
        return mc.cnot_matrix(n, *g.qubits)
    return mc.embed(mc.ROTATIONS[g.name[1]](g.angle), g.qubits[0], n)


def circuit_matrix(c: Circuit) -> np.ndarray:
    """Matrix of a gate list by plain dense products, one gate at a time."""
    v = np.eye(2**c.n, dtype=complex)
    for g in c.gates:
        v = gate_matrix(g, c.n) @ v
    return v


# --- text formats -----------------------------------------------------------


def serialize(c: Circuit) -> str:
    lines = [f"qubits {c.n}"]
    for g in c.gates:
        if g.name == "cx":
            lines.append(f"cx {g.qubits[0]} {g.qubits[1]}")
        else:
            lines.append(f"{g.name} {g.qubits[0]} {g.angle:.17g}")
    return "\n".join(lines) + "\n"


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _header(lines, keyword: str) -> int:
    try:
        lineno, parts = next(lines)
    except StopIteration:
        raise CircuitFormatError(f"missing '{keyword} <n>' header") from None
    if len(parts) != 2 or parts[0] != keyword:
        raise CircuitFormatError(f"line {lineno}: expected '{keyword} <n>'")
    try:
        n = int(parts[1])
    except ValueError:
        raise CircuitFormatError(f"line {lineno}: bad qubit count {parts[1]!r}") from None
    if n < 1:
        raise CircuitFormatError(f"line {lineno}: qubit count must be positive")
    return n


def _qubit(token: str, n: int, lineno: int) -> int:
    try:
        q = int(token)
    except ValueError:
        raise CircuitFormatError(f"line {lineno}: bad qubit index {token!r}") from None
    if not 1 <= q <= n:
        raise CircuitFormatError(f"line {lineno}: qubit {q} out of range 1..{n}")
    return q


def parse(text: str) -> Circuit:
    """Inverse of :func:`serialize`. Upward CNOTs are allowed here."""
    lines = _content_lines(text)
    n = _header(lines, "qubits")
    gates = []
    for lineno, parts in lines:
        op = parts[0]
        if op == "cx" and len(parts) == 3:
            j, k = (_qubit(t, n, lineno) for t in parts[1:])
            if j == k:
                raise CircuitFormatError(f"line {lineno}: control equals target")
            gates.append(cx(j, k))
        elif op in ("rx", "ry", "rz") and len(parts) == 3:
            q = _qubit(parts[1], n, lineno)
            try:
                angle = float(parts[2])
            except ValueError:
                raise CircuitFormatError(f"line {lineno}: bad angle {parts[2]!r}") from None
            if not np.isfinite(angle):
                raise CircuitFormatError(f"line {lineno}: angle must be finite")
            gates.append(rotation(op[1], q, angle))
        else:
            raise CircuitFormatError(f"line {lineno}: cannot parse {' '.join(parts)!r}")
    return Circuit(n, tuple(gates))


def serialize_structure(s: Structure) -> str:
    return "\n".join([f"qubits {s.n}"] + [f"unit {j} {k}" for j, k in s.units]) + "\n"


def parse_structure(text: str) -> Structure:
    lines = _content_lines(text)
    n = _header(lines, "qubits")
    units = []
    for lineno, parts in lines:
        if parts[0] != "unit" or len(parts) != 3:
            raise CircuitFormatError(f"line {lineno}: expected 'unit <j> <k>'")
        j, k = (_qubit(t, n, lineno) for t in parts[1:])
        if j >= k:
            raise CircuitFormatError(
                f"line {lineno}: unit {j}->{k} must point downward (control < target)"
            )
        units.append((j, k))
    return Structure(n, tuple(units))


def read_circuit(path: str | Path) -> Circuit:
    text = Path(path).read_text()
    if Path(path).suffix.lower() == ".qasm" or text.lstrip().startswith("OPENQASM"):
        from .qasm import parse_qasm

        return parse_qasm(text)
    return parse(text)


def write_circuit(path: str | Path, c: Circuit) -> None:
    Path(path).write_text(serialize(c))


# --- importing arbitrary rotation/CNOT circuits into unit form --------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _as_units(gates: Sequence[Gate]) -> list[Gate]:
    """Rewrite upward CNOTs as Hadamard-sandwiched downward ones.

    The Hadamards are kept as 2x2 matrices in a pseudo-gate so the import
    pass can fold them into neighbouring rotations.
    """
    out: list = []
    for g in gates:
        if g.name == "cx" and g.qubits[0] > g.qubits[1]:
            c, t = g.qubits
            out += [("h", c), ("h", t), cx(t, c), ("h", c), ("h", t)]
        else:
            out.append(g)
    return out


def circuit_to_units(c: Circuit) -> tuple[Structure, np.ndarray]:
    """Recast a rotation+CNOT circuit as a structure and angle vector.

    Equal to the original circuit up to a global phase. Single-qubit runs are
    pushed backwards through CNOTs (Rz through controls, Rx through targets)
    so that each CNOT keeps exactly the four rotations of a unit.
    """
    n = c.n
    pending = [np.eye(2, dtype=complex) for _ in range(n)]
    units: list[Pair] = []
    angles: list[np.ndarray] = []
    for g in reversed(_as_units(c.gates)):
        if isinstance(g, tuple) and g[0] == "h":
            pending[g[1] - 1] = pending[g[1] - 1] @ _H
        elif g.name == "cx":
            j, k = g.qubits
            a, b, rest = mc.zyz_angles(pending[j - 1])
            pending[j - 1] = mc.rz(rest)
            ax, bx, restx = mc.xyx_angles(pending[k - 1])
            pending[k - 1] = mc.rx(restx)
            units.append((j, k))
            angles.append(np.array([b, a, bx, ax]))
        else:
            q = g.qubits[0]
            pending[q - 1] = pending[q - 1] @ mc.ROTATIONS[g.name[1]](g.angle)
    units.reverse()
    angles.reverse()
    head = np.concatenate([np.array(mc.zyz_angles(p)) for p in pending])
    theta = np.concatenate([head] + angles) if angles else head
    return Structure(n, tuple(units)), theta
