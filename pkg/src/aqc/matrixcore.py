"""Dense unitary utilities, rotation gates, and distance metrics.

Qubit 1 is the most significant bit of a basis-state index, so a one-qubit
gate ``u`` on qubit ``j`` of an ``n``-qubit register is
``I_{2^(j-1)} (x) u (x) I_{2^(n-j)}``. Rotations follow
``R_g(t) = exp(-i t sigma_g / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from pathlib import Path

import numpy as np

UNITARY_TOL = 1e-10
DET_TOL = 1e-8

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": X, "y": Y, "z": Z}

_P0 = np.array([[1, 0], [0, 0]], dtype=complex)
_P1 = np.array([[0, 0], [0, 1]], dtype=complex)


class NotUnitaryError(ValueError):
    """Raised when a matrix fails the unitarity check."""


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex
    )


ROTATIONS = {"x": rx, "y": ry, "z": rz}


def kron(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more matrices, left to right."""
    return reduce(np.kron, mats)


def embed(u: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Place a one-qubit matrix on ``qubit`` (1-indexed) of an n-qubit register."""
    if not 1 <= qubit <= n:
        raise ValueError(f"qubit {qubit} out of range 1..{n}")
    return kron(np.eye(2 ** (qubit - 1)), u, np.eye(2 ** (n - qubit)))


def cnot_matrix(n: int, j: int, k: int) -> np.ndarray:
    """CNOT with control ``j`` and target ``k`` on ``n`` qubits (1-indexed).

    Built from the projector form ``|0><0|_j + |1><1|_j X_k``, so both the
    downward (j < k) and upward (k < j) cases come out of the same sum.
    """
    if not (1 <= j <= n and 1 <= k <= n):
        raise ValueError(f"CNOT indices ({j}, {k}) out of range 1..{n}")
    if j == k:
        raise ValueError("CNOT control and target must differ")
    ops0 = [I2] * n
    ops0[j - 1] = _P0
    ops1 = [I2] * n
    ops1[j - 1] = _P1
    ops1[k - 1] = X
    return (kron(*ops0) + kron(*ops1)).real.astype(complex)


def unitarity_error(u: np.ndarray) -> float:
    """Frobenius norm of ``U^dagger U - I``."""
    u = np.asarray(u)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and unitarity_error(u) <= tol


def is_special_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    return is_unitary(u, tol) and abs(np.linalg.det(u) - 1) <= DET_TOL


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise NotUnitaryError(f"expected a square matrix, got shape {u.shape}")
    err = unitarity_error(u)
    if err > tol:
        raise NotUnitaryError(f"||U^dag U - I||_F = {err:.3e} exceeds {tol:.1e}")
    return u


def special_unitarize(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    """Rescale a unitary into SU(d) by the principal d-th root of its determinant.

    Only a global phase changes. Of the d valid roots the principal one is
    taken, which makes the map idempotent.
    """
    u = check_unitary(u, tol)
    d = u.shape[0]
    det = np.linalg.det(u)
    phase = np.exp(1j * np.angle(det) / d)
    return u / phase


def align_phase(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Multiply ``u`` by the d-th root of unity that brings it closest to ``v``.

    Every root of unity keeps a special unitary special, so this picks the
    representative of ``u``'s projective class that minimizes the Frobenius
    cost against ``v``.
    """
    d = u.shape[0]
    t = np.trace(u.conj().T @ v)
    m = int(np.round(np.angle(t) * d / (2 * np.pi))) % d
    return u * np.exp(2j * np.pi * m / d)


def _check_same_shape(v: np.ndarray, u: np.ndarray) -> None:
    if v.shape != u.shape or v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError(f"dimension mismatch: {v.shape} vs {u.shape}")


def frobenius_cost(v: np.ndarray, u: np.ndarray) -> float:
    """Half the squared Frobenius distance, ``0.5 * ||V - U||_F^2``."""
    v = np.asarray(v)
    u = np.asarray(u)
    _check_same_shape(v, u)
    cost = 0.5 * float(np.linalg.norm(v - u) ** 2)
    assert abs(cost - (v.shape[0] - np.trace(u.conj().T @ v).real)) <= 1e-9 * max(
        1.0, cost
    ) + 1e-9 * v.shape[0], "trace form of the cost disagrees with the norm form"
    return cost


@dataclass(frozen=True)
class MetricReport:
    frobenius_cost: float
    hst_cost: float
    frobenius_fidelity: float


def fidelity_from_cost(cost: float, d: int) -> float:
    """Frobenius fidelity as a function of the Frobenius cost alone."""
    return 1.0 - d / (d + 1) + (d - cost) ** 2 / (d * (d + 1))


def metrics(v: np.ndarray, u: np.ndarray) -> MetricReport:
    """Frobenius cost, Hilbert-Schmidt test cost and Frobenius fidelity.

    All three are derived from the single trace ``Tr[V^dagger U]``.
    """
    v = np.asarray(v)
    u = np.asarray(u)
    _check_same_shape(v, u)
    d = v.shape[0]
    t = np.trace(v.conj().T @ u)
    cost = max(0.0, d - t.real)
    hst = min(1.0, max(0.0, 1.0 - abs(t) ** 2 / d**2))
    fid = min(1.0, max(0.0, fidelity_from_cost(cost, d)))
    return MetricReport(float(cost), float(hst), float(fid))


def class_metrics(v: np.ndarray, u: np.ndarray) -> MetricReport:
    """:func:`metrics` against the SU(d) representative of ``u`` nearest to ``v``.

    A target normalized into SU(d) is only fixed up to a d-th root of unity,
    and the Frobenius cost and fidelity see that choice.
    """
    return metrics(v, align_phase(np.asarray(u), np.asarray(v)))


def average_fidelity(v: np.ndarray, u: np.ndarray) -> float:
    d = v.shape[0]
    return 1.0 - d / (d + 1) * metrics(v, u).hst_cost


def haar_random(n: int, seed: int | np.random.Generator | None = None) -> np.ndarray:
    """Haar-random element of SU(2^n).

    Ginibre matrix, QR, column phases fixed by ``diag(R)``, then rescaled
    into SU(d). Deterministic for an integer seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    d = 2**n
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    diag = np.diagonal(r)
    q = q * (diag / np.abs(diag))
    return special_unitarize(q)


# --- unitary text files -----------------------------------------------------


def write_unitary(path: str | Path, u: np.ndarray) -> None:
    """Write ``u`` as ``n <qubits>`` followed by ``row col re im`` lines."""
    u = np.asarray(u, dtype=complex)
    d = u.shape[0]
    n = d.bit_length() - 1
    if u.shape != (d, d) or 2**n != d:
        raise ValueError(f"matrix of shape {u.shape} is not 2^n x 2^n")
    lines = [f"n {n}"]
    for r in range(d):
        for c in range(d):
            z = u[r, c]
            lines.append(f"{r} {c} {z.real:.17g} {z.imag:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_unitary(path: str | Path) -> np.ndarray:
    """Parse a unitary text file. Entries must appear in row-major order."""
    text = Path(path).read_text().splitlines()
    rows = [(i + 1, ln.split()) for i, ln in enumerate(text)]
    rows = [(i, parts) for i, parts in rows if parts and not parts[0].startswith("#")]
    if not rows or rows[0][1][0] != "n" or len(rows[0][1]) != 2:
        raise ValueError(f"{path}: first line must be 'n <qubits>'")
    try:
        n = int(rows[0][1][1])
    except ValueError:
        raise ValueError(f"{path}:{rows[0][0]}: bad qubit count") from None
    if n < 1:
        raise ValueError(f"{path}: qubit count must be positive")
    d = 2**n
    body = rows[1:]
    if len(body) != d * d:
        raise ValueError(f"{path}: expected {d * d} entries, found {len(body)}")
    u = np.empty((d, d), dtype=complex)
    for expect, (lineno, parts) in enumerate(body):
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'row col re im'")
        try:
            r, c = int(parts[0]), int(parts[1])
            re, im = float(parts[2]), float(parts[3])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed entry") from None
        if (r, c) != divmod(expect, d):
            if 0 <= r < d and 0 <= c < d and r * d + c < expect:
                raise ValueError(f"{path}:{lineno}: duplicate entry ({r}, {c})")
            raise ValueError(f"{path}:{lineno}: entry ({r}, {c}) out of row-major order")
        u[r, c] = complex(re, im)
    return u


# --- Euler angles -----------------------------------------------------------

_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def zyz_angles(u: np.ndarray, atol: float = 1e-12) -> tuple[float, float, float]:
    """Angles ``(a, b, c)`` with ``u = e^{i phi} Rz(a) Ry(b) Rz(c)``."""
    u = np.asarray(u, dtype=complex)
    su = u / np.sqrt(np.linalg.det(u))
    alpha, beta = su[0, 0], su[1, 0]
    b = 2 * np.arctan2(abs(beta), abs(alpha))
    if abs(beta) <= atol:
        a, c = -2 * np.angle(alpha), 0.0
    elif abs(alpha) <= atol:
        a, c = 2 * np.angle(beta), 0.0
    else:
        total = -2 * np.angle(alpha)
        diff = 2 * np.angle(beta)
        a, c = (total + diff) / 2, (total - diff) / 2
    return float(a), float(b), float(c)


def xyx_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(a, b, c)`` with ``u = e^{i phi} Rx(a) Ry(b) Rx(c)``."""
    # H Rx(t) H = Rz(t) and H Ry(t) H = Ry(-t)
    a, b, c = zyz_angles(_HAD @ np.asarray(u, dtype=complex) @ _HAD)
    return a, -b, c
